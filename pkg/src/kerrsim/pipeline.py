"""End-to-end experiment reproduction: prepare -> gate -> loss -> sample ->
reconstruct -> compare, with seeded configs and JSON/CSV artifacts.

A run is deterministic given its config and seed; output files are written
atomically and carry a schema_version field.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy

from . import __version__
from .errors import ConfigError, StageError
from .fock import (
    DensityMatrix,
    FockVector,
    coherent_state,
    density_from_pure,
    fidelity,
    truncate_density,
)
from .gates import (
    SuperpositionParams,
    amplified_sign_target,
    apply_conditional,
    build_superposition_operator,
    solve_superposition,
)
from .homodyne import PhaseSchedule, sample_quadratures, save_samples
from .klm import DetectorModel, run_ns_gate, solve_ns_transmittances
from .tomography import (
    ReconstructionDiagnostics,
    TomographyConfig,
    bin_samples,
    build_povm,
    matrix_to_json_dict,
    reconstruct,
    save_density_matrix,
)

__all__ = [
    "ExperimentConfig",
    "AlphaRecord",
    "RunReport",
    "run_pipeline",
    "simulate_forward",
    "report_density_matrix_tables",
    "klm_compare",
    "superposition_for_mode",
    "fix_global_phase",
    "BESTFIT_RATIO_MAGNITUDE",
    "BESTFIT_RATIO_PHASE",
]

# best-fit operator ratio: magnitude 5.97, phase pi (ideal negative sign)
# shifted by the extra -pi/7 between the two operator orderings
BESTFIT_RATIO_MAGNITUDE = 5.97
BESTFIT_RATIO_PHASE = math.pi - math.pi / 7.0

_MODES = ("ideal", "bestfit", "custom")


@dataclass(frozen=True)
class ExperimentConfig:
    alphas: tuple[float, ...] = (0.23, 0.53, 0.79)
    mode: str = "ideal"
    custom_a: complex = 1.0 + 0.0j
    custom_b: complex = 0.0 + 0.0j
    eta: float = 0.66
    n_phases: int = 12
    samples_per_phase: int = 16667
    seed: int = 20230
    sim_dim: int = 16
    recon_dim: int = 8
    bin_width: float = 0.05
    x_max: float = 6.0
    max_iterations: int = 2000
    dilution: float = 0.5
    outdir: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))

    def validate(self) -> None:
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if any(a < 0 or not math.isfinite(a) for a in self.alphas):
            raise ConfigError("alphas must be nonnegative finite reals")
        if not self.alphas:
            raise ConfigError("at least one alpha is required")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must lie in (0, 1]")
        if self.n_phases < 1 or self.samples_per_phase < 1:
            raise ConfigError("phase count and samples per phase must be positive")
        if not 3 <= self.recon_dim <= self.sim_dim:
            raise ConfigError("need 3 <= recon_dim <= sim_dim")
        if self.mode == "custom" and self.custom_a == 0 and self.custom_b == 0:
            raise ConfigError("custom mode needs nonzero (a, b)")

    def tomography(self) -> TomographyConfig:
        return TomographyConfig(
            dim=self.recon_dim,
            eta=self.eta,
            bin_width=self.bin_width,
            x_max=self.x_max,
            max_iterations=self.max_iterations,
            dilution=self.dilution,
        )

    def schedule(self, alpha_index: int) -> PhaseSchedule:
        # each alpha gets its own seed offset; phases split further inside the sampler
        thetas = np.arange(self.n_phases) * math.pi / self.n_phases
        return PhaseSchedule(
            tuple((float(t), self.samples_per_phase) for t in thetas),
            seed=self.seed + alpha_index,
        )

    @staticmethod
    def from_dict(payload: dict) -> "ExperimentConfig":
        def as_complex(v):
            if isinstance(v, (list, tuple)) and len(v) == 2:
                return complex(float(v[0]), float(v[1]))
            return complex(v)

        known = {}
        for key in (
            "alphas mode eta n_phases samples_per_phase seed sim_dim recon_dim "
            "bin_width x_max max_iterations dilution outdir"
        ).split():
            if key in payload:
                known[key] = payload[key]
        if "alphas" in known:
            known["alphas"] = tuple(known["alphas"])
        for key in ("custom_a", "custom_b"):
            if key in payload:
                known[key] = as_complex(payload[key])
        unknown = set(payload) - set(known)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return ExperimentConfig(**known)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["alphas"] = list(self.alphas)
        for key in ("custom_a", "custom_b"):
            z = complex(payload[key])
            payload[key] = [z.real, z.imag]
        return payload


def superposition_for_mode(config: ExperimentConfig) -> SuperpositionParams:
    """Operator weights implied by the parameter mode."""
    if config.mode == "ideal":
        return SuperpositionParams(1.0, solve_superposition().ratio)
    if config.mode == "bestfit":
        ratio = BESTFIT_RATIO_MAGNITUDE * complex(
            math.cos(BESTFIT_RATIO_PHASE), math.sin(BESTFIT_RATIO_PHASE)
        )
        return SuperpositionParams(1.0, ratio)
    return SuperpositionParams(config.custom_a, config.custom_b)


def fix_global_phase(state: FockVector) -> FockVector:
    """Rotate so the single-photon amplitude is real nonnegative (display convention)."""
    a1 = state.amps[1] if state.dim > 1 else 0.0
    if abs(a1) < 1e-14:
        return state
    return FockVector(state.dim, state.amps * np.exp(-1j * np.angle(a1)))


@dataclass
class SignSummary:
    re01: float
    re02: float
    re12: float
    im01: float

    @staticmethod
    def of(rho: DensityMatrix) -> "SignSummary":
        e = rho.elems
        return SignSummary(
            re01=float(e[0, 1].real),
            re02=float(e[0, 2].real),
            re12=float(e[1, 2].real),
            im01=float(e[0, 1].imag),
        )

    def vacuum_flip_visible(self) -> bool:
        return self.re01 < 0.0 and self.re02 < 0.0 and self.re12 > 0.0


@dataclass
class AlphaRecord:
    alpha: float
    success_weight: float
    input_model: DensityMatrix
    output_model: DensityMatrix
    reconstructed: DensityMatrix
    fidelity_model: float
    model_tail: float
    signs_model: SignSummary
    signs_reconstructed: SignSummary
    diagnostics: ReconstructionDiagnostics


@dataclass
class RunReport:
    config: ExperimentConfig
    records: list[AlphaRecord] = field(default_factory=list)
    versions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "versions": self.versions,
            "records": [
                {
                    "alpha": r.alpha,
                    "success_weight": r.success_weight,
                    "fidelity_model": r.fidelity_model,
                    "model_tail": r.model_tail,
                    "signs_model": asdict(r.signs_model),
                    "signs_reconstructed": asdict(r.signs_reconstructed),
                    "vacuum_flip_model": r.signs_model.vacuum_flip_visible(),
                    "vacuum_flip_reconstructed": r.signs_reconstructed.vacuum_flip_visible(),
                    "input_model": matrix_to_json_dict(r.input_model),
                    "output_model": matrix_to_json_dict(r.output_model),
                    "reconstructed": matrix_to_json_dict(r.reconstructed),
                    "reconstruction": {
                        "iterations": r.diagnostics.iterations,
                        "converged": r.diagnostics.converged,
                        "final_loglik": r.diagnostics.final_loglik,
                        "loglik_per_sample": r.diagnostics.loglik_per_sample,
                        "completeness_residual": r.diagnostics.completeness_residual,
                        "warnings": r.diagnostics.warnings,
                    },
                }
                for r in self.records
            ],
        }


def _versions() -> dict:
    return {"kerrsim": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _atomic_write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path: str, payload: dict) -> None:
    _atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def simulate_forward(
    config: ExperimentConfig, alpha: float
) -> tuple[FockVector, FockVector, float]:
    """Input state and phase-fixed conditional output at the simulation cutoff."""
    try:
        psi_in = coherent_state(alpha, config.sim_dim)
        operator = build_superposition_operator(
            superposition_for_mode(config), config.sim_dim
        )
        raw, weight = apply_conditional(operator, psi_in)
    except Exception as exc:
        raise StageError("forward-model", str(exc)) from exc
    return psi_in, fix_global_phase(raw), weight


def _alpha_dir(outdir: str, alpha: float) -> str:
    return os.path.join(outdir, f"alpha_{alpha:g}")


def _run_alpha(
    config: ExperimentConfig, index: int, alpha: float, povm, emit: bool
) -> AlphaRecord:
    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, str(exc)) from exc

    psi_in, psi_out, weight = stage("forward-model", simulate_forward, config, alpha)
    rho_in_full = density_from_pure(psi_in)
    rho_out_full = density_from_pure(psi_out)
    rho_in, _ = truncate_density(rho_in_full, config.recon_dim)
    rho_out, tail = stage("truncate", truncate_density, rho_out_full, config.recon_dim)

    batch = stage(
        "sample", sample_quadratures, rho_out_full, config.schedule(index), config.eta
    )
    tomo = config.tomography()
    binned = stage("bin", bin_samples, batch, tomo)
    rho_hat, diag = stage("reconstruct", reconstruct, binned, tomo, povm)
    for matrix in (rho_in, rho_out, rho_hat):
        stage("validate", matrix.validate)
    fid = stage("compare", fidelity, rho_hat, rho_out)

    record = AlphaRecord(
        alpha=alpha,
        success_weight=weight,
        input_model=rho_in,
        output_model=rho_out,
        reconstructed=rho_hat,
        fidelity_model=fid,
        model_tail=tail,
        signs_model=SignSummary.of(rho_out),
        signs_reconstructed=SignSummary.of(rho_hat),
        diagnostics=diag,
    )

    if config.mode in ("ideal", "bestfit") and alpha > 0:
        if not record.signs_model.vacuum_flip_visible():
            raise StageError("signature", f"model sign signature violated at alpha={alpha}")
        if not record.signs_reconstructed.vacuum_flip_visible():
            raise StageError(
                "signature", f"reconstructed sign signature violated at alpha={alpha}"
            )

    if emit:
        adir = _alpha_dir(config.outdir, alpha)
        os.makedirs(adir, exist_ok=True)
        save_samples(
            batch,
            os.path.join(adir, "samples.csv"),
            meta={"alpha": alpha, "eta": config.eta, "mode": config.mode},
        )
        save_density_matrix(rho_in, os.path.join(adir, "input_model.json"))
        save_density_matrix(rho_out, os.path.join(adir, "output_model.json"))
        save_density_matrix(rho_hat, os.path.join(adir, "output_reconstructed.json"))
        _write_json(
            os.path.join(adir, "reconstruction_diag.json"),
            {
                "schema_version": 1,
                "iterations": diag.iterations,
                "converged": diag.converged,
                "final_loglik": diag.final_loglik,
                "loglik_per_sample": diag.loglik_per_sample,
                "completeness_residual": diag.completeness_residual,
                "out_of_range": binned.out_of_range,
                "warnings": diag.warnings,
            },
        )
    return record


def run_pipeline(config: ExperimentConfig, emit: bool = True) -> RunReport:
    """Run the full chain for every alpha and emit all artifacts.

    Deterministic for a fixed config and seed.  In ideal and bestfit modes the
    vacuum sign signature is asserted on model and reconstruction for every
    nonzero alpha; a violation aborts with a structured stage error.
    """
    config.validate()
    if emit:
        os.makedirs(config.outdir, exist_ok=True)
    tomo = config.tomography()
    thetas = np.arange(config.n_phases) * math.pi / config.n_phases
    try:
        povm = build_povm(tomo, thetas)
    except Exception as exc:
        raise StageError("povm", str(exc)) from exc

    report = RunReport(config=config, versions=_versions())
    for index, alpha in enumerate(config.alphas):
        report.records.append(_run_alpha(config, index, alpha, povm, emit))
    if emit:
        _write_json(os.path.join(config.outdir, "report.json"), report.to_dict())
        report_density_matrix_tables(report)
    return report


def _write_matrix_table(path: str, rho: DensityMatrix) -> None:
    lines = ["part,m," + ",".join(str(n) for n in range(rho.dim))]
    for part, values in (("re", rho.elems.real), ("im", rho.elems.imag)):
        for m in range(rho.dim):
            row = ",".join(repr(float(v)) for v in values[m])
            lines.append(f"{part},{m},{row}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def report_density_matrix_tables(report: RunReport) -> list[str]:
    """Emit plot-ready CSV tables (rows m, columns n; re and im blocks) per panel."""
    paths = []
    for record in report.records:
        tdir = os.path.join(_alpha_dir(report.config.outdir, record.alpha), "tables")
        os.makedirs(tdir, exist_ok=True)
        for panel, rho in (
            ("input_model", record.input_model),
            ("output_model", record.output_model),
            ("output_reconstructed", record.reconstructed),
        ):
            path = os.path.join(tdir, f"{panel}.csv")
            _write_matrix_table(path, rho)
            paths.append(path)
    return paths


_KLM_PROBES = (
    ("balanced", np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0)),
    ("qubit", np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0)),
    ("two_heavy", np.array([1.0, 1.0, 2.0]) / math.sqrt(6.0)),
)


def klm_compare(eta_heralds: float = 0.66) -> list[dict]:
    """Resource-comparison table: heralded sign gate vs conditional v(n) scheme.

    For each probe state supported on {0, 1, 2}: gate fidelity and success
    probability under PNR/on-off detectors at unit and reduced efficiency, and
    the addition/subtraction scheme's fidelity to the amplified target (its
    herald efficiency only rescales the success weight, so the fidelity column
    is detector independent).
    """
    solution = solve_ns_transmittances()
    gain = solve_superposition()
    operator_dim = 8
    operator = build_superposition_operator(
        SuperpositionParams(1.0, gain.ratio), operator_dim
    )
    detectors = (
        ("pnr", 1.0),
        ("pnr", eta_heralds),
        ("on_off", 1.0),
        ("on_off", eta_heralds),
    )
    rows = []
    for name, amps in _KLM_PROBES:
        probe3 = FockVector(3, amps)
        for kind, eta in detectors:
            result = run_ns_gate(probe3, DetectorModel(kind, eta))
            rows.append(
                {
                    "probe": name,
                    "scheme": "ns_gate",
                    "detector": kind,
                    "eta": eta,
                    "fidelity": result.fidelity,
                    "success": result.probability,
                }
            )
        probe8 = FockVector(operator_dim, np.concatenate([amps, np.zeros(operator_dim - 3)]))
        conditional, weight = apply_conditional(operator, probe8)
        target = density_from_pure(amplified_sign_target(probe8, gain.gain))
        fid = fidelity(density_from_pure(conditional), target)
        for kind, eta in (("on_off", 1.0), ("on_off", eta_heralds)):
            rows.append(
                {
                    "probe": name,
                    "scheme": "addition_subtraction",
                    "detector": kind,
                    "eta": eta,
                    "fidelity": fid,
                    # two herald detections, each scaling the weight by eta
                    "success": weight * eta * eta,
                }
            )
    # side metadata rows are not mixed into the table; expose the solution once
    rows.append(
        {
            "probe": "-",
            "scheme": "ns_gate_settings",
            "detector": "-",
            "eta": math.nan,
            "fidelity": math.nan,
            "success": solution.success_probability,
        }
    )
    return rows


def write_klm_report(rows: list[dict], outdir: str) -> tuple[str, str]:
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "klm_table.csv")
    header = ["probe", "scheme", "detector", "eta", "fidelity", "success"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(
                repr(float(row[k])) if isinstance(row[k], float) else str(row[k])
                for k in header
            )
        )
    _atomic_write_text(csv_path, "\n".join(lines) + "\n")
    json_path = os.path.join(outdir, "klm_table.json")
    _write_json(json_path, {"schema_version": 1, "rows": rows})
    return csv_path, json_path
