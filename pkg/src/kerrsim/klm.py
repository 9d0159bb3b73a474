"""Three-mode heralded nonlinear sign gate with PNR or on-off detectors.

Fixed conventions (mode indices are 0-based):

* mode 0: signal; mode 1: ancilla prepared with one photon (herald: exactly
  one photon / click); mode 2: ancilla vacuum (herald: zero photons / no
  click).
* A beam splitter on modes (i, j) with amplitude transmittance t and phase
  convention angle phi maps creation operators as

      a_i+ -> t a_i+ - r e^{-i phi} a_j+,
      a_j+ -> r e^{i phi} a_i+ + t a_j+,        r = sqrt(1 - t^2).

* The gate network is: pi phase on the signal path (the folding mirror),
  then beam splitters (1,2), (0,1), (1,2); the last one carries phi = pi.
  Under these conventions the heralded map on signal levels {0, 1, 2} is
  proportional to diag(1, 1, -1).
* run_ns_gate appends a pi phase plate on the signal output, turning
  diag(1, 1, -1) into the vacuum sign flip diag(-1, 1, 1) up to a global
  factor -1.

The ancilla photon is modeled as an ideal |1>; heralded outputs under
inefficient detectors are weighted pure-branch ensembles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy import optimize

from .fock import DensityMatrix, FockVector, basis_state, density_from_pure, fidelity
from .gates import nonlinear_sign_target
from .tolerances import TOL

__all__ = [
    "MultimodeState",
    "BeamSplitterSpec",
    "DetectorModel",
    "HeraldResult",
    "NsGateSolution",
    "NsGateResult",
    "product_state",
    "apply_beam_splitter",
    "apply_mode_phase",
    "herald_project",
    "solve_ns_transmittances",
    "run_ns_gate",
]

SIGNAL, HERALD_ONE, HERALD_ZERO = 0, 1, 2


@lru_cache(maxsize=None)
def _simplex(modes: int, cutoff: int) -> tuple[tuple[tuple[int, ...], ...], dict]:
    """All occupation tuples with total photon number <= cutoff, plus index map."""
    tuples = tuple(
        occ for occ in product(range(cutoff + 1), repeat=modes) if sum(occ) <= cutoff
    )
    return tuples, {occ: i for i, occ in enumerate(tuples)}


@dataclass(frozen=True)
class MultimodeState:
    """Complex amplitudes over occupation tuples (n_1..n_M) with sum <= cutoff."""

    modes: int
    cutoff: int
    amps: np.ndarray

    def __post_init__(self):
        if self.modes < 1 or self.cutoff < 0:
            raise ValueError("modes must be >= 1 and cutoff >= 0")
        basis, _ = _simplex(self.modes, self.cutoff)
        arr = np.asarray(self.amps, dtype=np.complex128)
        if arr.shape != (len(basis),):
            raise ValueError(
                f"amps must have length {len(basis)} for {self.modes} modes, cutoff {self.cutoff}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "amps", arr)

    @property
    def basis(self) -> tuple[tuple[int, ...], ...]:
        return _simplex(self.modes, self.cutoff)[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def to_fock_vector(self) -> FockVector:
        if self.modes != 1:
            raise ValueError("only single-mode states convert to FockVector")
        amps = np.zeros(self.cutoff + 1, dtype=np.complex128)
        for occ, i in _simplex(1, self.cutoff)[1].items():
            amps[occ[0]] = self.amps[i]
        return FockVector(self.cutoff + 1, amps)


@dataclass(frozen=True)
class BeamSplitterSpec:
    """Mode pair, amplitude transmittance t in [0, 1], and phase convention angle."""

    mode_pair: tuple[int, int]
    t: float
    phi: float = 0.0

    def __post_init__(self):
        i, j = self.mode_pair
        if i == j:
            raise ValueError("beam splitter needs two distinct modes")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("transmittance amplitude must lie in [0, 1]")


@dataclass(frozen=True)
class DetectorModel:
    """kind 'pnr' (photon number resolving) or 'on_off'; efficiency in (0, 1]."""

    kind: str
    efficiency: float = 1.0

    def __post_init__(self):
        if self.kind not in ("pnr", "on_off"):
            raise ValueError("detector kind must be 'pnr' or 'on_off'")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in (0, 1]")


def product_state(factors: list[FockVector], cutoff: int) -> MultimodeState:
    """Tensor product of single-mode vectors, truncated to the total-photon cutoff."""
    modes = len(factors)
    basis, _ = _simplex(modes, cutoff)
    amps = np.empty(len(basis), dtype=np.complex128)
    for i, occ in enumerate(basis):
        value = 1.0 + 0.0j
        for n, vec in zip(occ, factors):
            value *= vec.amps[n] if n < vec.dim else 0.0
        amps[i] = value
    return MultimodeState(modes, cutoff, amps)


@lru_cache(maxsize=None)
def _bs_block(s: int, t: float, phi: float) -> np.ndarray:
    """Two-mode mixing block on the s-photon sector: U[p, m] = <p, s-p|B|m, s-m>."""
    r = math.sqrt(max(0.0, 1.0 - t * t))
    log_fact = [math.lgamma(k + 1) for k in range(s + 1)]
    block = np.zeros((s + 1, s + 1), dtype=np.complex128)
    for m in range(s + 1):
        n = s - m
        for p in range(s + 1):
            acc = 0.0
            for k in range(max(0, p - n), min(m, p) + 1):
                acc += (
                    math.comb(m, k)
                    * math.comb(n, p - k)
                    * (-1.0) ** (m - k)
                    * t ** (n - p + 2 * k)
                    * r ** (m + p - 2 * k)
                )
            scale = math.exp(
                0.5 * (log_fact[p] + log_fact[s - p] - log_fact[m] - log_fact[n])
            )
            block[p, m] = acc * scale * np.exp(1j * phi * (p - m))
    return block


def _mix(state: MultimodeState, i: int, j: int, t: float, phi: float) -> MultimodeState:
    basis, index = _simplex(state.modes, state.cutoff)
    out = np.zeros_like(state.amps)
    for idx, occ in enumerate(basis):
        amp = state.amps[idx]
        if amp == 0.0:
            continue
        s = occ[i] + occ[j]
        block = _bs_block(s, float(t), float(phi))
        column = block[:, occ[i]]
        occ_list = list(occ)
        for p in range(s + 1):
            occ_list[i] = p
            occ_list[j] = s - p
            out[index[tuple(occ_list)]] += column[p] * amp
    return MultimodeState(state.modes, state.cutoff, out)


def apply_beam_splitter(state: MultimodeState, spec: BeamSplitterSpec) -> MultimodeState:
    """Mix two modes; preserves norm and total photon number."""
    i, j = spec.mode_pair
    if not (0 <= i < state.modes and 0 <= j < state.modes):
        raise ValueError(f"mode pair {spec.mode_pair} invalid for {state.modes} modes")
    return _mix(state, i, j, spec.t, spec.phi)


def apply_mode_phase(state: MultimodeState, mode: int, phi: float) -> MultimodeState:
    """Phase plate on one mode: amplitude factor e^{i phi n_mode}."""
    if not 0 <= mode < state.modes:
        raise ValueError(f"mode {mode} invalid for {state.modes} modes")
    basis, _ = _simplex(state.modes, state.cutoff)
    factors = np.exp(1j * phi * np.array([occ[mode] for occ in basis]))
    return MultimodeState(state.modes, state.cutoff, factors * state.amps)


@dataclass(frozen=True)
class HeraldResult:
    """Weighted pure branches on the remaining modes; weights sum to probability."""

    branches: tuple[tuple[float, MultimodeState], ...]
    probability: float


def _detector_weight(detector: DetectorModel, outcome, n: int) -> float:
    eta = detector.efficiency
    if detector.kind == "pnr":
        m = int(outcome)
        if n < m:
            return 0.0
        return math.comb(n, m) * eta**m * (1.0 - eta) ** (n - m)
    if outcome == "click":
        return 1.0 - (1.0 - eta) ** n
    if outcome == "no_click":
        return (1.0 - eta) ** n
    raise ValueError(f"on-off detector outcome must be 'click' or 'no_click', got {outcome!r}")


def herald_project(
    state: MultimodeState,
    mode: int,
    outcome,
    detector: DetectorModel,
) -> HeraldResult:
    """Condition on a detector outcome on one mode and trace that mode out.

    PNR detectors project onto each photon number compatible with the outcome,
    weighted binomially by the efficiency; on-off detectors use the click /
    no-click POVM diag(1 - (1-eta)^n) / diag((1-eta)^n).  Each surviving
    photon number yields one normalized pure branch, so inefficient heralds
    return mixed-state ensembles.
    """
    if not 0 <= mode < state.modes:
        raise ValueError(f"mode {mode} invalid for {state.modes} modes")
    if state.modes < 2:
        raise ValueError("cannot remove the only mode")
    basis, _ = _simplex(state.modes, state.cutoff)
    branches = []
    probability = 0.0
    for n in range(state.cutoff + 1):
        weight = _detector_weight(detector, outcome, n)
        if weight == 0.0:
            continue
        reduced_cutoff = state.cutoff - n
        reduced_basis, reduced_index = _simplex(state.modes - 1, reduced_cutoff)
        amps = np.zeros(len(reduced_basis), dtype=np.complex128)
        mass = 0.0
        for idx, occ in enumerate(basis):
            if occ[mode] != n:
                continue
            amp = state.amps[idx]
            if amp == 0.0:
                continue
            reduced = occ[:mode] + occ[mode + 1 :]
            amps[reduced_index[reduced]] = amp
            mass += abs(amp) ** 2
        if mass == 0.0:
            continue
        branch_prob = weight * mass
        probability += branch_prob
        branches.append(
            (branch_prob, MultimodeState(state.modes - 1, reduced_cutoff, amps / math.sqrt(mass)))
        )
    return HeraldResult(tuple(branches), probability)


@dataclass(frozen=True)
class NsGateSolution:
    """Solved beam-splitter settings plus the heralded diagonal they produce."""

    transmittances: tuple[float, float, float]
    lambdas: tuple[float, float, float]
    success_probability: float
    residuals: tuple[float, float]

    @property
    def splitters(self) -> tuple[BeamSplitterSpec, BeamSplitterSpec, BeamSplitterSpec]:
        t1, t2, t3 = self.transmittances
        return (
            BeamSplitterSpec((HERALD_ONE, HERALD_ZERO), t1, 0.0),
            BeamSplitterSpec((SIGNAL, HERALD_ONE), t2, 0.0),
            BeamSplitterSpec((HERALD_ONE, HERALD_ZERO), t3, math.pi),
        )


def _network(state: MultimodeState, t1: float, t2: float, t3: float) -> MultimodeState:
    state = apply_mode_phase(state, SIGNAL, math.pi)
    state = _mix(state, HERALD_ONE, HERALD_ZERO, t1, 0.0)
    state = _mix(state, SIGNAL, HERALD_ONE, t2, 0.0)
    state = _mix(state, HERALD_ONE, HERALD_ZERO, t3, math.pi)
    return state


def _heralded_lambdas(t1: float, t2: float, t3: float) -> np.ndarray:
    """Conditional amplitudes lambda_n = <n,1,0|network|n,1,0> for n = 0, 1, 2."""
    out = np.empty(3, dtype=np.complex128)
    for n in range(3):
        factors = [basis_state(n, 3), basis_state(1, 2), basis_state(0, 1)]
        state = product_state(factors, cutoff=n + 1)
        final = _network(state, t1, t2, t3)
        _, index = _simplex(3, n + 1)
        out[n] = final.amps[index[(n, 1, 0)]]
    return out


def _conditions(t1: float, t2: float, t3: float) -> np.ndarray:
    lam = _heralded_lambdas(t1, t2, t3)
    return np.array([(lam[1] - lam[0]).real, (lam[2] + lam[0]).real])


@lru_cache(maxsize=1)
def solve_ns_transmittances() -> NsGateSolution:
    """Numerically solve the three transmittances of the heralded sign gate.

    The two ratio conditions lambda_1/lambda_0 = 1 and lambda_2/lambda_0 = -1
    leave a one-parameter family in (t1, t2, t3); the returned point maximizes
    the success probability |lambda_0|^2 along it.
    """

    def solve_pair(t1: float) -> tuple[float, float] | None:
        # angle variables keep the probed transmittances inside [-1, 1]
        sol = optimize.root(
            lambda v: _conditions(t1, math.cos(v[0]), math.cos(v[1])),
            x0=np.array([math.acos(0.45), math.acos(min(t1, 0.98))]),
            method="hybr",
            tol=1e-13,
        )
        t2, t3 = math.cos(sol.x[0]), math.cos(sol.x[1])
        if not sol.success or not (0.0 < t2 < 1.0 and 0.0 < t3 < 1.0):
            return None
        return float(t2), float(t3)

    def negative_success(t1: float) -> float:
        pair = solve_pair(t1)
        if pair is None:
            return 0.0
        lam = _heralded_lambdas(t1, *pair)
        return -float(abs(lam[0]) ** 2)

    best = optimize.minimize_scalar(
        negative_success, bounds=(0.75, 0.99), method="bounded",
        options={"xatol": 1e-12},
    )
    t1 = float(best.x)
    pair = solve_pair(t1)
    if pair is None:
        raise RuntimeError("transmittance solve failed to converge on the constraint manifold")
    t2, t3 = pair
    lam = _heralded_lambdas(t1, t2, t3)
    residuals = (
        float(abs(lam[1] / lam[0] - 1.0)),
        float(abs(lam[2] / lam[0] + 1.0)),
    )
    if max(residuals) > 1e-10:
        raise RuntimeError(f"ratio conditions not met: residuals {residuals}")
    return NsGateSolution(
        transmittances=(t1, t2, t3),
        lambdas=tuple(float(x.real) for x in lam),
        success_probability=float(abs(lam[0]) ** 2),
        residuals=residuals,
    )


@dataclass(frozen=True)
class NsGateResult:
    branches: tuple[tuple[float, FockVector], ...]
    output: DensityMatrix
    probability: float
    fidelity: float


def run_ns_gate(
    state: FockVector,
    detectors: DetectorModel | tuple[DetectorModel, DetectorModel],
) -> NsGateResult:
    """Full heralded gate: ancilla preparation, network, heralds, output phase.

    ``detectors`` is a single model for both heralds or a (one-photon herald,
    zero-photon herald) pair.  Reports the heralded output ensemble (as a
    density matrix on the input space), the success probability, and the
    Uhlmann fidelity against the vacuum-sign-flip target.
    """
    if isinstance(detectors, DetectorModel):
        det_one = det_zero = detectors
    else:
        det_one, det_zero = detectors
    if state.dim < 3:
        raise ValueError("input must cover levels {0, 1, 2}")
    norm = state.norm
    if norm == 0.0:
        raise ValueError("zero input state")
    excess = float(np.max(np.abs(state.amps[3:]), initial=0.0))
    if excess > TOL.subspace * norm:
        raise ValueError("input support above n=2 exceeds tolerance")

    signal_in = FockVector(3, state.amps[:3] / norm)
    multimode = product_state(
        [signal_in, basis_state(1, 2), basis_state(0, 1)], cutoff=3
    )
    sol = solve_ns_transmittances()
    final = _network(multimode, *sol.transmittances)

    outcome_zero = 0 if det_zero.kind == "pnr" else "no_click"
    outcome_one = 1 if det_one.kind == "pnr" else "click"
    first = herald_project(final, HERALD_ZERO, outcome_zero, det_zero)

    probability = 0.0
    branches: list[tuple[float, FockVector]] = []
    phase = np.exp(1j * math.pi * np.arange(state.dim))
    for weight_zero, branch in first.branches:
        second = herald_project(branch, 1, outcome_one, det_one)
        for weight_one, signal in second.branches:
            weight = weight_zero * weight_one
            probability += weight
            vec = signal.to_fock_vector()
            amps = np.zeros(state.dim, dtype=np.complex128)
            amps[: vec.dim] = vec.amps
            branches.append((weight, FockVector(state.dim, phase * amps)))

    if probability <= 0.0:
        raise RuntimeError("herald pattern has zero probability")
    rho = np.zeros((state.dim, state.dim), dtype=np.complex128)
    for weight, vec in branches:
        rho += weight * np.outer(vec.amps, vec.amps.conj())
    output = DensityMatrix(state.dim, rho / probability)
    target = density_from_pure(nonlinear_sign_target(FockVector(state.dim, state.amps / norm)))
    return NsGateResult(
        branches=tuple(branches),
        output=output,
        probability=probability,
        fidelity=fidelity(output, target),
    )
