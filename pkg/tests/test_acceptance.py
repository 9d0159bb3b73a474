"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; any assertion failure marks the criterion failed.
"""

import math
import time

import numpy as np
from numpy.testing import assert_allclose

from kerrsim.channels import LossChannel, apply_loss, loss_adjoint_on_operator
from kerrsim.fock import (
    DensityMatrix,
    FockVector,
    apply_diagonal,
    basis_state,
    coherent_state,
    density_from_pure,
    fidelity,
)
from kerrsim.gates import (
    DiagonalOperator,
    SuperpositionParams,
    amplified_sign_target,
    apply_conditional,
    build_superposition_operator,
    ideal_kerr,
    noiseless_attenuate,
    nonlinear_sign_target,
    solve_superposition,
)
from kerrsim.homodyne import PhaseSchedule, sample_quadratures
from kerrsim.klm import DetectorModel, run_ns_gate, solve_ns_transmittances

SQRT2 = math.sqrt(2.0)


def _report(number: int, text: str) -> None:
    print(f"ACCEPTANCE PASS {number}: {text}")


def _random_three_level(rng, dim=8):
    amps = np.zeros(dim, dtype=complex)
    amps[:3] = rng.normal(size=3) + 1j * rng.normal(size=3)
    return FockVector(dim, amps / np.linalg.norm(amps))


def test_criterion_1_gain_algebra():
    solution = solve_superposition()
    assert_allclose(solution.ratio, -3.0 - SQRT2, atol=1e-12)
    assert_allclose(solution.gain, SQRT2 + 1.0, atol=1e-12)
    values = build_superposition_operator(SuperpositionParams(1.0, solution.ratio), 4).values
    assert abs(values[1] / values[0] + solution.gain) <= 1e-12
    assert abs(values[2] / values[1] - solution.gain) <= 1e-12
    start = time.perf_counter()
    for _ in range(100):
        solve_superposition()
    per_call = (time.perf_counter() - start) / 100.0
    assert per_call < 1e-3
    _report(1, f"b/a = -3-sqrt(2), g = sqrt(2)+1, residuals <= 1e-12, {per_call*1e6:.1f} us/call")


def test_criterion_2_gate_equivalence_chain():
    dim = 8
    kerr = ideal_kerr(math.pi / 2.0, dim)
    linear_pi = DiagonalOperator(dim, np.exp(1j * math.pi * np.arange(dim)))
    rng = np.random.default_rng(101)
    for _ in range(100):
        psi = _random_three_level(rng, dim)
        chained = apply_diagonal(linear_pi, apply_diagonal(kerr, psi))
        assert_allclose(chained.amps, -nonlinear_sign_target(psi).amps, atol=1e-12)
    _report(2, "kerr(pi/2) + linear pi phase = -1 x vacuum sign flip for 100 random states")


def test_criterion_3_amplified_gate_identity():
    solution = solve_superposition()
    dim = 8
    operator = build_superposition_operator(SuperpositionParams(1.0, solution.ratio), dim)
    attenuator = noiseless_attenuate(1.0 / solution.gain, dim)
    rng = np.random.default_rng(103)
    for _ in range(100):
        psi = _random_three_level(rng, dim)
        conditional, _ = apply_conditional(operator, psi)
        amplified = amplified_sign_target(psi, solution.gain)
        assert_allclose(conditional.amps, -amplified.amps, atol=1e-12)
        restored = apply_diagonal(attenuator, amplified)
        assert_allclose(restored.amps, nonlinear_sign_target(psi).amps, atol=1e-12)
    _report(3, "v(n) = -1 x amplified target on span{0,1,2}; attenuation by 1/g restores the sign flip")


def test_criterion_4_sign_signature(ideal_run):
    report, seconds = ideal_run.report, ideal_run.seconds
    assert tuple(report.config.alphas) == (0.23, 0.53, 0.79)
    per_alpha = seconds / len(report.records)
    for record in report.records:
        for signs in (record.signs_model, record.signs_reconstructed):
            assert signs.re01 < 0.0
            assert signs.re02 < 0.0
            assert signs.re12 > 0.0
    assert per_alpha <= 120.0
    _report(
        4,
        "Re rho01 < 0, Re rho02 < 0, Re rho12 > 0 in model and closed-loop "
        f"reconstruction for all three amplitudes ({per_alpha:.1f} s per alpha)",
    )


def test_criterion_5_bestfit_qualitative(bestfit_run):
    record = bestfit_run.report.records[0]
    assert abs(record.signs_reconstructed.im01) > 0.01
    assert record.signs_reconstructed.re01 < 0.0
    assert record.signs_reconstructed.re02 < 0.0
    # Closed-loop fidelities here quantify sampling noise only; bench
    # measurements of such gates sit near 0.86-0.89 because of experimental
    # imperfections that are out of scope, so no fidelity target is asserted.
    _report(
        5,
        "best-fit parameters give |Im rho01| = "
        f"{abs(record.signs_reconstructed.im01):.3f} > 0.01 with negative real "
        "vacuum off-diagonals",
    )


def test_criterion_6_tomography_closed_loop(ideal_run):
    fidelities = []
    for record in ideal_run.report.records:
        assert record.fidelity_model >= 0.98
        gains = np.diff(record.diagnostics.loglik_trace)
        assert np.all(gains >= 0.0)
        fidelities.append(record.fidelity_model)
    # efficiency compensation recovers the pre-loss state rather than the
    # lossy one (the comparison target above is the pre-loss model)
    from kerrsim.fock import truncate_density
    from kerrsim.pipeline import ExperimentConfig, simulate_forward

    config = ExperimentConfig()
    _, psi_out, _ = simulate_forward(config, 0.53)
    rho_full = density_from_pure(psi_out)
    lossy, _ = truncate_density(apply_loss(rho_full, LossChannel(config.eta)), 8)
    record = ideal_run.report.records[1]
    assert fidelity(record.reconstructed, lossy) < record.fidelity_model
    _report(
        6,
        "closed-loop fidelities "
        + ", ".join(f"{f:.4f}" for f in fidelities)
        + " >= 0.98 with monotone likelihood and eta-compensation",
    )


def test_criterion_7_klm_ns_gate():
    solution = solve_ns_transmittances()
    assert max(solution.residuals) <= 1e-10
    assert_allclose(solution.success_probability, 0.25, atol=1e-9)
    probe = FockVector(3, np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0))
    perfect = run_ns_gate(probe, DetectorModel("pnr", 1.0))
    assert_allclose(perfect.fidelity, 1.0, atol=1e-9)
    assert_allclose(perfect.probability, 0.25, atol=1e-9)
    onoff = run_ns_gate(probe, DetectorModel("on_off", 1.0))
    assert onoff.fidelity < perfect.fidelity - 1e-3
    _report(
        7,
        f"NS gate: fidelity 1, probability 0.25 with ideal PNR heralds; on-off "
        f"drops fidelity to {onoff.fidelity:.3f} for a two-photon-component input",
    )


def test_criterion_8_channel_and_sampler_properties():
    rng = np.random.default_rng(107)

    def random_density(dim):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        m = a @ a.conj().T
        return DensityMatrix(dim, m / np.trace(m).real)

    def random_effect(dim):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        h = 0.5 * (a + a.conj().T)
        w, v = np.linalg.eigh(h)
        u = (w - w.min()) / (w.max() - w.min())
        return (v * u) @ v.conj().T

    # loss semigroup
    for _ in range(10):
        rho = random_density(8)
        chained = apply_loss(apply_loss(rho, LossChannel(0.9)), LossChannel(0.7))
        direct = apply_loss(rho, LossChannel(0.63))
        assert np.max(np.abs(chained.elems - direct.elems)) <= 1e-9

    # POVM duality identity for 100 random pairs
    channel = LossChannel(0.66)
    for _ in range(100):
        rho = random_density(8)
        effect = random_effect(8)
        lhs = np.trace(rho.elems @ loss_adjoint_on_operator(effect, channel)).real
        rhs = np.trace(apply_loss(rho, channel).elems @ effect).real
        assert abs(lhs - rhs) <= 1e-10

    # vacuum sampling statistics at 1e6 samples
    vacuum = density_from_pure(basis_state(0, 8))
    batch = sample_quadratures(vacuum, PhaseSchedule(((0.0, 1000000),), seed=55), eta=1.0)
    se_var = math.sqrt(2.0 * 0.25 / 1e6)
    assert abs(batch.xs.var() - 0.5) <= 4.0 * se_var

    # bit-exact determinism under a fixed seed
    rho = density_from_pure(coherent_state(0.53, 16))
    schedule = PhaseSchedule(((0.0, 5000), (1.0, 5000)), seed=99)
    again = sample_quadratures(rho, schedule, eta=0.66)
    once = sample_quadratures(rho, schedule, eta=0.66)
    assert np.array_equal(once.xs, again.xs)

    _report(
        8,
        "loss semigroup <= 1e-9, duality <= 1e-10 over 100 pairs, vacuum variance "
        f"{batch.xs.var():.5f} within 4 SE of 0.5, sampler bit-exact",
    )
