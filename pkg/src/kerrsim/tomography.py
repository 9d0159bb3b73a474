"""Iterative maximum-likelihood reconstruction from binned quadrature data.

The estimator maximizes the binned log-likelihood L = sum_j f_j log Tr[rho E_j]
over density matrices with the diluted fixed-point iteration

    R(rho) = (1/N) sum_j f_j E_j / Tr[rho E_j],
    rho <- (I + lam R) rho (I + lam R) / trace,

halving ``lam`` whenever a step would decrease the likelihood, which makes the
monotone-likelihood property assertable.  POVM elements are bin-integrated
quadrature projectors pushed through the adjoint loss channel, so the
reconstruction compensates detector efficiency and estimates the pre-detector
state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import LossChannel, loss_adjoint_on_operator
from .errors import NumericalError
from .fock import DensityMatrix
from .homodyne import SampleBatch, wavefunction_table
from .tolerances import TOL

__all__ = [
    "TomographyConfig",
    "BinnedData",
    "ReconstructionDiagnostics",
    "bin_samples",
    "build_povm",
    "loglikelihood",
    "reconstruct",
    "save_density_matrix",
    "load_density_matrix",
    "matrix_to_json_dict",
    "matrix_from_json_dict",
]

_PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class TomographyConfig:
    dim: int = 8
    eta: float = 0.66
    bin_width: float = 0.05
    x_max: float = 6.0
    max_iterations: int = 2000
    dilution: float = 0.5
    stop_tolerance: float = 1e-9  # required log-likelihood gain per sample

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError("dim must be >= 3")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must be in (0, 1]")
        if self.bin_width <= 0 or self.x_max <= 0:
            raise ValueError("bin width and range must be positive")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if not 0.0 < self.dilution <= 1.0:
            raise ValueError("dilution must be in (0, 1]")
        if self.stop_tolerance <= 0:
            raise ValueError("stop_tolerance must be positive")

    @property
    def n_bins(self) -> int:
        return int(round(2.0 * self.x_max / self.bin_width))

    def bin_edges(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n_bins + 1)

    def bin_centers(self) -> np.ndarray:
        edges = self.bin_edges()
        return 0.5 * (edges[:-1] + edges[1:])


@dataclass(frozen=True)
class BinnedData:
    """Histogram counts per (phase, x bin); bins are half-open [lo, hi).

    Counts are stored as floats so that exact Born frequencies can stand in
    for data in fixed-point checks; histogram counts are integers.
    """

    thetas: np.ndarray            # (n_phases,)
    centers: np.ndarray           # (n_bins,)
    counts: np.ndarray            # (n_phases, n_bins) nonnegative
    out_of_range: int = 0

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=np.float64)
        centers = np.asarray(self.centers, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.float64)
        if counts.shape != (thetas.size, centers.size):
            raise ValueError("counts must have shape (n_phases, n_bins)")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise ValueError("counts must be nonnegative and finite")
        for name, arr in (("thetas", thetas), ("centers", centers), ("counts", counts)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def total(self) -> float:
        return float(self.counts.sum())


def bin_samples(samples: SampleBatch, config: TomographyConfig) -> BinnedData:
    """Histogram a sample batch on the config grid.

    A value exactly on an interior bin edge lands in the upper bin; values
    outside [-x_max, x_max) are dropped from the histogram but counted in
    ``out_of_range``.
    """
    if len(samples) == 0:
        raise ValueError("empty sample batch")
    edges = config.bin_edges()
    thetas = np.unique(samples.thetas)
    counts = np.zeros((thetas.size, config.n_bins), dtype=np.float64)
    out_of_range = 0
    for i, theta in enumerate(thetas):
        x = samples.xs[samples.thetas == theta]
        idx = np.digitize(x, edges, right=False)
        in_range = (idx >= 1) & (idx <= config.n_bins)
        out_of_range += int(np.count_nonzero(~in_range))
        np.add.at(counts[i], idx[in_range] - 1, 1.0)
    return BinnedData(thetas, config.bin_centers(), counts, out_of_range)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)
_MAX_PANEL_WIDTH = 0.1  # subdivide wide bins so the quadrature stays accurate


def _bin_integrated_projectors(dim: int, theta: float, config: TomographyConfig) -> np.ndarray:
    """integral over each bin of |x_theta><x_theta| dx, shape (n_bins, dim, dim)."""
    panels = max(1, int(math.ceil(config.bin_width / _MAX_PANEL_WIDTH)))
    half = 0.5 * config.bin_width / panels
    offsets = -0.5 * config.bin_width + (2 * np.arange(panels) + 1) * half
    nodes = (offsets[:, None] + half * _GL_NODES[None, :]).ravel()
    x = (config.bin_centers()[:, None] + nodes[None, :]).ravel()
    psi = wavefunction_table(dim, x).reshape(dim, config.n_bins, nodes.size)
    w = np.exp(-1j * theta * np.arange(dim))[:, None, None] * psi
    weights = np.tile(_GL_WEIGHTS * half, panels)
    return np.einsum("mbk,nbk,k->bmn", w, w.conj(), weights, optimize=True)


def build_povm(config: TomographyConfig, thetas) -> np.ndarray:
    """Efficiency-compensated POVM, shape (n_phases, n_bins, dim, dim).

    Each element is the bin-integrated quadrature projector pushed through the
    adjoint loss channel at config.eta.  Raises if any phase's elements fail
    to resolve the identity within tolerance.
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    channel = LossChannel(config.eta)
    povm = np.empty((thetas.size, config.n_bins, config.dim, config.dim), dtype=np.complex128)
    eye = np.eye(config.dim)
    for i, theta in enumerate(thetas):
        raw = _bin_integrated_projectors(config.dim, float(theta), config)
        for b in range(config.n_bins):
            povm[i, b] = loss_adjoint_on_operator(raw[b], channel)
        residual = np.linalg.norm(povm[i].sum(axis=0) - eye, ord=2)
        if residual > TOL.completeness:
            raise NumericalError(
                f"POVM completeness residual {residual:.3e} at theta={theta:.4f}"
            )
    return povm


def loglikelihood(rho: DensityMatrix, data: BinnedData, povm: np.ndarray) -> float:
    """L = sum_j f_j log Tr[rho E_j] over occupied bins (floored at 1e-300)."""
    counts = data.counts.reshape(-1)
    elements = povm.reshape(-1, rho.dim, rho.dim)
    occupied = counts > 0
    probs = np.einsum("jmn,nm->j", elements[occupied], rho.elems, optimize=True).real
    floored = np.maximum(probs, _PROB_FLOOR)
    return float(np.sum(counts[occupied] * np.log(floored)))


@dataclass
class ReconstructionDiagnostics:
    iterations: int = 0
    converged: bool = False
    final_loglik: float = math.nan
    loglik_per_sample: float = math.nan
    completeness_residual: float = math.nan
    dilution_final: float = math.nan
    loglik_trace: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def reconstruct(
    data: BinnedData,
    config: TomographyConfig,
    povm: np.ndarray | None = None,
    initial: np.ndarray | None = None,
) -> tuple[DensityMatrix, ReconstructionDiagnostics]:
    """Diluted RrhoR maximum-likelihood estimate from binned data.

    Starts from the maximally mixed state unless ``initial`` is given.
    Accepted iterations never decrease the log-likelihood; on a decrease the
    dilution parameter is halved and the step retried.  Returns the estimate
    plus diagnostics; non-convergence within max_iterations returns the best
    iterate flagged, it does not raise.
    """
    if data.total <= 0:
        raise ValueError("no counts to reconstruct from")
    if povm is None:
        povm = build_povm(config, data.thetas)

    diag = ReconstructionDiagnostics()
    if data.thetas.size < 2:
        diag.warnings.append(
            "single-phase data: off-diagonal elements are not reliably constrained"
        )
    eye = np.eye(config.dim)
    diag.completeness_residual = max(
        float(np.linalg.norm(povm[i].sum(axis=0) - eye, ord=2))
        for i in range(povm.shape[0])
    )

    counts = data.counts.reshape(-1).astype(np.float64)
    elements = povm.reshape(-1, config.dim, config.dim)
    occupied = counts > 0
    c = counts[occupied]
    e = np.ascontiguousarray(elements[occupied])
    total = float(c.sum())

    if initial is None:
        rho = eye.astype(np.complex128) / config.dim
    else:
        rho = np.asarray(initial, dtype=np.complex128).copy()
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real

    floor_warning = "bin probability floored at 1e-300"

    def loglik_of(mat: np.ndarray) -> tuple[float, np.ndarray]:
        probs = np.einsum("jmn,nm->j", e, mat, optimize=True).real
        floored = np.maximum(probs, _PROB_FLOOR)
        if np.any(probs <= 0.0) and floor_warning not in diag.warnings:
            diag.warnings.append(floor_warning)
        return float(np.sum(c * np.log(floored))), floored

    loglik, probs = loglik_of(rho)
    diag.loglik_trace.append(loglik)
    lam = config.dilution
    threshold = config.stop_tolerance * total

    for iteration in range(1, config.max_iterations + 1):
        r_op = np.einsum("j,jmn->mn", c / probs, e, optimize=True) / total
        accepted = False
        while lam > 1e-14:
            step = eye + lam * r_op
            cand = step @ rho @ step
            cand = 0.5 * (cand + cand.conj().T)
            cand /= np.trace(cand).real
            cand_loglik, cand_probs = loglik_of(cand)
            if cand_loglik >= loglik:
                accepted = True
                break
            lam *= 0.5
        diag.iterations = iteration
        if not accepted:
            diag.converged = True
            break
        gain = cand_loglik - loglik
        rho, loglik, probs = cand, cand_loglik, cand_probs
        diag.loglik_trace.append(loglik)
        lam = min(2.0 * lam, config.dilution)
        if gain < threshold:
            diag.converged = True
            break

    if not diag.converged:
        diag.warnings.append(
            f"no convergence after {config.max_iterations} iterations; best iterate returned"
        )
    diag.final_loglik = loglik
    diag.loglik_per_sample = loglik / total
    diag.dilution_final = lam
    return DensityMatrix(config.dim, rho), diag


def matrix_to_json_dict(rho: DensityMatrix) -> dict:
    return {
        "schema_version": 1,
        "dim": rho.dim,
        "re": rho.elems.real.tolist(),
        "im": rho.elems.imag.tolist(),
    }


def matrix_from_json_dict(payload: dict) -> DensityMatrix:
    dim = int(payload["dim"])
    elems = np.asarray(payload["re"], dtype=np.float64) + 1j * np.asarray(
        payload["im"], dtype=np.float64
    )
    return DensityMatrix(dim, elems)


def save_density_matrix(rho: DensityMatrix, path) -> None:
    with open(str(path), "w") as fh:
        json.dump(matrix_to_json_dict(rho), fh, sort_keys=True)
        fh.write("\n")


def load_density_matrix(path) -> DensityMatrix:
    with open(str(path)) as fh:
        return matrix_from_json_dict(json.load(fh))
