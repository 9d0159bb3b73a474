"""Quadrature statistics and seeded Monte Carlo homodyne sampling.

Conventions (used consistently by the tomography module):

* quadrature operator scaled so the vacuum variance is 1/2,
* oscillator eigenfunctions psi_n(x) = pi^(-1/4) (2^n n!)^(-1/2) H_n(x) e^(-x^2/2),
* phase enters as p(x | theta) = sum_{mn} rho_mn e^{i(m-n)theta} psi_m(x) psi_n(x).

Sampling is inverse-CDF on a tabulated grid with a counter-based (Philox)
generator keyed per phase, so per-phase blocks are independent and the whole
batch is bit-reproducible for a fixed seed and schedule order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .channels import LossChannel, apply_loss
from .errors import NumericalError
from .fock import DensityMatrix
from .tolerances import TOL

__all__ = [
    "QuadratureSample",
    "PhaseSchedule",
    "SampleBatch",
    "quadrature_wavefunction",
    "wavefunction_table",
    "quadrature_pdf",
    "projector_matrix",
    "sample_quadratures",
    "default_schedule",
    "save_samples",
    "load_samples",
]

GRID_HALFWIDTH = 6.0
GRID_STEP = 0.01


@dataclass(frozen=True)
class QuadratureSample:
    """One homodyne outcome: local-oscillator phase and quadrature value."""

    theta: float
    x: float

    def __post_init__(self):
        if not 0.0 <= self.theta < math.pi:
            raise ValueError("theta must lie in [0, pi)")


@dataclass(frozen=True)
class PhaseSchedule:
    """Per-phase sample counts plus the RNG seed for the whole batch."""

    phases: tuple[tuple[float, int], ...]
    seed: int

    def __post_init__(self):
        phases = tuple((float(t), int(c)) for t, c in self.phases)
        thetas = [t for t, _ in phases]
        if len(set(thetas)) != len(thetas):
            raise ValueError("phases must be distinct")
        if any(c <= 0 for _, c in phases):
            raise ValueError("sample counts must be positive")
        object.__setattr__(self, "phases", phases)

    @property
    def total(self) -> int:
        return sum(c for _, c in self.phases)


@dataclass(frozen=True)
class SampleBatch:
    """Batch of samples as parallel arrays; carries the seed that produced it."""

    thetas: np.ndarray
    xs: np.ndarray
    seed: int

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=np.float64)
        x = np.asarray(self.xs, dtype=np.float64)
        if t.shape != x.shape or t.ndim != 1:
            raise ValueError("thetas and xs must be 1-d arrays of equal length")
        t.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "xs", x)

    def __len__(self) -> int:
        return self.thetas.size

    def to_samples(self) -> list[QuadratureSample]:
        return [QuadratureSample(float(t), float(x)) for t, x in zip(self.thetas, self.xs)]


def default_schedule(seed: int, n_phases: int = 12, samples_per_phase: int = 16667) -> PhaseSchedule:
    """Uniform phases in [0, pi) with equal counts."""
    thetas = np.arange(n_phases) * math.pi / n_phases
    return PhaseSchedule(tuple((float(t), samples_per_phase) for t in thetas), seed)


def wavefunction_table(dim: int, x: np.ndarray) -> np.ndarray:
    """psi_n(x) for n = 0..dim-1, shape (dim, len(x)).

    Uses the normalized three-term recurrence, which stays O(1) in magnitude
    (no factorial overflow) well past n = 32.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((dim, x.size))
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if dim > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(2, dim):
        out[n] = math.sqrt(2.0 / n) * x * out[n - 1] - math.sqrt((n - 1) / n) * out[n - 2]
    return out


def quadrature_wavefunction(n: int, x) -> np.ndarray | float:
    """Real oscillator eigenfunction psi_n evaluated at x (scalar or array)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    val = wavefunction_table(n + 1, arr)[n]
    return float(val[0]) if np.ndim(x) == 0 else val


def _phased_vectors(dim: int, theta: float, x: np.ndarray) -> np.ndarray:
    """Columns w(x) with w_m = e^{-i m theta} psi_m(x); p = <w|rho|w>."""
    psi = wavefunction_table(dim, x)
    return np.exp(-1j * theta * np.arange(dim))[:, None] * psi


def quadrature_pdf(rho: DensityMatrix, theta: float, x) -> np.ndarray | float:
    """p(x | theta) = sum_{mn} rho_mn e^{i(m-n)theta} psi_m(x) psi_n(x)."""
    herm = np.max(np.abs(rho.elems - rho.elems.conj().T))
    if herm > TOL.hermitian:
        raise ValueError(f"density matrix not Hermitian: residual {herm:.3e}")
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    w = _phased_vectors(rho.dim, theta, arr)
    p = np.einsum("mg,mn,ng->g", w.conj(), rho.elems, w, optimize=True)
    vals = p.real
    return float(vals[0]) if np.ndim(x) == 0 else vals


def projector_matrix(theta: float, x: float, dim: int) -> np.ndarray:
    """Quadrature projector |x_theta><x_theta| in the Fock basis.

    Defined so that Tr[rho * projector] == quadrature_pdf(rho, theta, x).
    """
    w = _phased_vectors(dim, theta, np.atleast_1d(float(x)))[:, 0]
    return np.outer(w, w.conj())


def _tabulated_cdf(rho: DensityMatrix, theta: float, grid: np.ndarray) -> np.ndarray:
    pdf = np.clip(quadrature_pdf(rho, theta, grid), 0.0, None)
    cdf = np.concatenate(([0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))))
    mass = cdf[-1]
    if rho.trace - mass > TOL.grid_deficit:
        raise NumericalError(
            f"quadrature grid covers mass {mass:.9f} of trace {rho.trace:.9f}"
        )
    return cdf / mass


def sample_quadratures(
    rho: DensityMatrix,
    schedule: PhaseSchedule,
    eta: float,
    grid_halfwidth: float = GRID_HALFWIDTH,
    grid_step: float = GRID_STEP,
) -> SampleBatch:
    """Draw homodyne samples from the state after detection loss eta.

    Per phase, draws i.i.d. samples by inverse-CDF lookup on a tabulated grid
    (linear interpolation).  Each phase gets its own Philox stream derived
    from (seed, phase index), so output is deterministic given the schedule.
    """
    lossy = apply_loss(rho, LossChannel(eta))
    n_points = int(round(2.0 * grid_halfwidth / grid_step)) + 1
    grid = np.linspace(-grid_halfwidth, grid_halfwidth, n_points)
    thetas_out = []
    xs_out = []
    for index, (theta, count) in enumerate(schedule.phases):
        cdf = _tabulated_cdf(lossy, theta, grid)
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=schedule.seed, spawn_key=(index,)))
        )
        u = rng.random(count)
        xs_out.append(np.interp(u, cdf, grid))
        thetas_out.append(np.full(count, theta))
    return SampleBatch(np.concatenate(thetas_out), np.concatenate(xs_out), schedule.seed)


def save_samples(batch: SampleBatch, csv_path, meta: dict | None = None) -> None:
    """Write samples as CSV (header theta,x) plus a seed-recording sidecar JSON."""
    csv_path = str(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "x"])
        for t, x in zip(batch.thetas, batch.xs):
            writer.writerow([repr(float(t)), repr(float(x))])
    sidecar = {"schema_version": 1, "seed": batch.seed, "count": len(batch)}
    if meta:
        sidecar.update(meta)
    with open(csv_path.rsplit(".", 1)[0] + "_meta.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_samples(csv_path) -> SampleBatch:
    """Read a sample CSV written by save_samples; seed comes from the sidecar."""
    csv_path = str(csv_path)
    thetas = []
    xs = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["theta", "x"]:
            raise ValueError(f"unexpected sample CSV header: {header}")
        for row in reader:
            thetas.append(float(row[0]))
            xs.append(float(row[1]))
    seed = 0
    try:
        with open(csv_path.rsplit(".", 1)[0] + "_meta.json") as fh:
            seed = int(json.load(fh).get("seed", 0))
    except FileNotFoundError:
        pass
    return SampleBatch(np.asarray(thetas), np.asarray(xs), seed)
