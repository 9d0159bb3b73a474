import json
import math
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kerrsim.cli import main
from kerrsim.errors import ConfigError, StageError
from kerrsim.fock import basis_state, density_from_pure, fidelity
from kerrsim.pipeline import (
    BESTFIT_RATIO_MAGNITUDE,
    BESTFIT_RATIO_PHASE,
    ExperimentConfig,
    fix_global_phase,
    klm_compare,
    run_pipeline,
    simulate_forward,
    superposition_for_mode,
)
from kerrsim.tomography import load_density_matrix

FAST = dict(n_phases=6, samples_per_phase=2000, max_iterations=300)


def test_config_validation():
    ExperimentConfig().validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="nope").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(alphas=(-0.1,)).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(eta=0.0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(recon_dim=20).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus_field": 1})


def test_config_roundtrip():
    config = ExperimentConfig(alphas=(0.3,), mode="custom", custom_b=1.5 - 0.5j)
    again = ExperimentConfig.from_dict(config.to_dict())
    assert again == config


def test_superposition_for_mode():
    ideal = superposition_for_mode(ExperimentConfig(mode="ideal"))
    assert_allclose(ideal.b, -3.0 - math.sqrt(2.0), rtol=1e-14)
    best = superposition_for_mode(ExperimentConfig(mode="bestfit"))
    assert_allclose(abs(best.b), BESTFIT_RATIO_MAGNITUDE, rtol=1e-14)
    assert_allclose(np.angle(best.b), BESTFIT_RATIO_PHASE, rtol=1e-12)
    custom = superposition_for_mode(
        ExperimentConfig(mode="custom", custom_a=2.0, custom_b=1.0j)
    )
    assert custom.a == 2.0 and custom.b == 1.0j


def test_fix_global_phase():
    _, out, _ = simulate_forward(ExperimentConfig(), 0.53)
    assert out.amps[1].imag == pytest.approx(0.0, abs=1e-12)
    assert out.amps[1].real >= 0.0


def test_forward_model_sign_signature():
    # vacuum-coupled off-diagonals flip sign, the 1-2 coherence does not
    from kerrsim.fock import density_from_pure, truncate_density

    for alpha in (0.23, 0.53, 0.79):
        for mode in ("ideal", "bestfit"):
            _, out, _ = simulate_forward(ExperimentConfig(mode=mode), alpha)
            rho, _ = truncate_density(density_from_pure(out), 8)
            assert rho.elems[0, 1].real < 0.0
            assert rho.elems[0, 2].real < 0.0
            assert rho.elems[1, 2].real > 0.0


def test_pipeline_alpha_zero(tmp_path):
    config = ExperimentConfig(alphas=(0.0,), outdir=str(tmp_path / "zero"), **FAST)
    report = run_pipeline(config)
    rec = report.records[0]
    vac = density_from_pure(basis_state(0, 8))
    assert fidelity(rec.output_model, vac) >= 1.0 - 1e-12
    assert fidelity(rec.reconstructed, vac) >= 0.99
    assert_allclose(rec.success_weight, 1.0, rtol=1e-12)


def test_pipeline_deterministic_artifacts(tmp_path):
    files = [
        "report.json",
        os.path.join("alpha_0.53", "samples.csv"),
        os.path.join("alpha_0.53", "samples_meta.json"),
        os.path.join("alpha_0.53", "output_reconstructed.json"),
        os.path.join("alpha_0.53", "tables", "output_model.csv"),
    ]
    outdir = str(tmp_path / "run")
    config = ExperimentConfig(alphas=(0.53,), outdir=outdir, **FAST)
    run_pipeline(config)
    first = {rel: open(os.path.join(outdir, rel), "rb").read() for rel in files}
    run_pipeline(config)
    for rel in files:
        with open(os.path.join(outdir, rel), "rb") as fh:
            assert fh.read() == first[rel], f"artifact {rel} not byte-identical"


def test_pipeline_seed_changes_samples(tmp_path):
    a = run_pipeline(
        ExperimentConfig(alphas=(0.53,), outdir=str(tmp_path / "s1"), seed=1, **FAST)
    )
    b = run_pipeline(
        ExperimentConfig(alphas=(0.53,), outdir=str(tmp_path / "s2"), seed=2, **FAST)
    )
    assert not np.allclose(
        a.records[0].reconstructed.elems, b.records[0].reconstructed.elems
    )


def test_report_contents(tmp_path):
    outdir = str(tmp_path / "rep")
    run_pipeline(ExperimentConfig(alphas=(0.53,), outdir=outdir, **FAST))
    with open(os.path.join(outdir, "report.json")) as fh:
        payload = json.load(fh)
    assert payload["schema_version"] == 1
    assert payload["seed"] == payload["config"]["seed"]
    assert set(payload["versions"]) == {"kerrsim", "numpy", "scipy"}
    record = payload["records"][0]
    assert record["vacuum_flip_model"] is True
    assert record["vacuum_flip_reconstructed"] is True
    assert record["reconstruction"]["completeness_residual"] <= 1e-6

    # matrices in the report match the standalone JSON files exactly
    rho = load_density_matrix(os.path.join(outdir, "alpha_0.53", "output_reconstructed.json"))
    assert record["reconstructed"]["re"] == rho.elems.real.tolist()


def test_tables_match_json_exactly(tmp_path):
    outdir = str(tmp_path / "tab")
    run_pipeline(ExperimentConfig(alphas=(0.53,), outdir=outdir, **FAST))
    rho = load_density_matrix(os.path.join(outdir, "alpha_0.53", "output_model.json"))
    path = os.path.join(outdir, "alpha_0.53", "tables", "output_model.csv")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        assert header == ["part", "m"] + [str(n) for n in range(8)]
        values = {"re": np.zeros((8, 8)), "im": np.zeros((8, 8))}
        for line in fh:
            cells = line.strip().split(",")
            values[cells[0]][int(cells[1])] = [float(v) for v in cells[2:]]
    assert np.array_equal(values["re"], rho.elems.real)
    assert np.array_equal(values["im"], rho.elems.imag)


def test_vacuum_table_trivial(tmp_path):
    outdir = str(tmp_path / "vac")
    run_pipeline(ExperimentConfig(alphas=(0.0,), outdir=outdir, **FAST))
    rho = load_density_matrix(os.path.join(outdir, "alpha_0", "input_model.json"))
    expected = np.zeros((8, 8))
    expected[0, 0] = 1.0
    assert_allclose(rho.elems.real, expected, atol=1e-12)


def test_pipeline_stage_error_names_stage(tmp_path):
    config = ExperimentConfig(alphas=(3.5,), outdir=str(tmp_path / "big"), **FAST)
    with pytest.raises(StageError) as err:
        run_pipeline(config)
    assert err.value.stage == "forward-model"


def test_klm_compare_rows():
    rows = klm_compare()
    ns = [r for r in rows if r["scheme"] == "ns_gate"]
    vscheme = [r for r in rows if r["scheme"] == "addition_subtraction"]
    assert len(ns) == 12 and len(vscheme) == 6

    by_key = {(r["probe"], r["detector"], r["eta"]): r for r in ns}
    perfect = by_key[("balanced", "pnr", 1.0)]
    assert_allclose(perfect["fidelity"], 1.0, atol=1e-9)
    assert_allclose(perfect["success"], 0.25, atol=1e-9)
    assert by_key[("balanced", "on_off", 1.0)]["fidelity"] < perfect["fidelity"]

    # conditional-superposition fidelity does not depend on herald efficiency
    for probe in ("balanced", "qubit", "two_heavy"):
        fids = {r["fidelity"] for r in vscheme if r["probe"] == probe}
        assert max(fids) - min(fids) <= 1e-12
        assert_allclose(max(fids), 1.0, atol=1e-9)
    weights = [r["success"] for r in vscheme if r["probe"] == "balanced"]
    assert weights[0] > weights[1]  # eta^2 rescaling only


# ---------------------------------------------------------------- CLI ------


def test_cli_solve(capsys):
    assert main(["solve"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert_allclose(payload["ratio"], -3.0 - math.sqrt(2.0), rtol=1e-12)
    assert_allclose(payload["gain"], 1.0 + math.sqrt(2.0), rtol=1e-12)
    assert_allclose(payload["ns_success_probability"], 0.25, atol=1e-9)
    assert len(payload["ns_transmittances"]) == 3


def test_cli_invalid_config_exit_code(tmp_path, capsys):
    assert main(["pipeline", "--mode", "ideal", "--eta", "2.0", "--out", str(tmp_path)]) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_cli_numerical_failure_exit_code(tmp_path, capsys):
    code = main(
        ["simulate", "--alpha", "9.0", "--out", str(tmp_path / "x"), "--mode", "ideal"]
    )
    assert code == 3
    assert "forward-model" in capsys.readouterr().err


def test_cli_simulate_sample_reconstruct(tmp_path, capsys):
    out = str(tmp_path / "chain")
    base = ["--alpha", "0.53", "--phases", "6", "--samples-per-phase", "2000", "--out", out]
    assert main(["simulate"] + base) == 0
    assert os.path.exists(os.path.join(out, "alpha_0.53", "output_model.json"))

    assert main(["sample"] + base) == 0
    samples = os.path.join(out, "alpha_0.53", "samples.csv")
    assert os.path.exists(samples)
    with open(os.path.join(out, "alpha_0.53", "samples_meta.json")) as fh:
        meta = json.load(fh)
    assert meta["count"] == 12000 and "seed" in meta

    assert main(["reconstruct", "--samples", samples] + base) == 0
    rho = load_density_matrix(os.path.join(out, "reconstructed.json"))
    model = load_density_matrix(os.path.join(out, "alpha_0.53", "output_model.json"))
    assert fidelity(rho, model) >= 0.9
    capsys.readouterr()


def test_cli_config_file_and_flag_override(tmp_path, capsys):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(
        json.dumps(
            {
                "alphas": [0.23],
                "mode": "ideal",
                "n_phases": 6,
                "samples_per_phase": 1500,
                "max_iterations": 200,
                "outdir": str(tmp_path / "from_file"),
            }
        )
    )
    override = str(tmp_path / "override")
    assert main(["pipeline", "--config", str(cfg_path), "--out", override, "--seed", "4"]) == 0
    with open(os.path.join(override, "report.json")) as fh:
        payload = json.load(fh)
    assert payload["config"]["outdir"] == override
    assert payload["config"]["seed"] == 4
    assert payload["config"]["samples_per_phase"] == 1500
    capsys.readouterr()


def test_cli_reconstruct_missing_samples(tmp_path, capsys):
    code = main(["reconstruct", "--samples", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == 2
    assert "cannot read samples" in capsys.readouterr().err


def test_config_accepts_scalar_complex():
    config = ExperimentConfig.from_dict({"mode": "custom", "custom_a": 1.0, "custom_b": [0.0, 2.0]})
    assert config.custom_a == 1.0 + 0.0j
    assert config.custom_b == 2.0j


def test_cli_klm(tmp_path, capsys):
    out = str(tmp_path / "klm")
    assert main(["klm", "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "klm_table.csv"))
    with open(os.path.join(out, "klm_table.json")) as fh:
        payload = json.load(fh)
    assert payload["schema_version"] == 1
    stdout = capsys.readouterr().out
    assert "ns_gate" in stdout
