import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ionchain_nn import gates
from ionchain_nn.errors import InvalidDimension
from ionchain_nn.qnn import QnnParams, QnnSystem
from ionchain_nn.schedules import FieldSchedule, frozen, gate_preset, loop

SMALL = QnnParams(r3=0.01, sites_per_block=1)
# 16-dim analogue: weak final field keeps dressing small; T=1e4 is moderately adiabatic
SMALL_RAMP = FieldSchedule(a_final=0.3, b1_initial=1e-2, b2_initial=1e-3, duration=1e4)

# Fidelities at t0, where M is the adjoint of the target:
# H: Tr V = sqrt2, so (2 + 2)/6 = 2/3.  Bell: Tr V = 2 sqrt2, so (8 + 4)/20 = 3/5.
T0_BASELINE = {"H": 2.0 / 3.0, "Bell": 0.6}


def random_contraction(d, rng):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return z / (np.linalg.norm(z, 2) * (1 + rng.random()))


def test_fidelity_closed_form_cases():
    assert gates.average_gate_fidelity(np.eye(2)) == pytest.approx(1.0)
    assert gates.average_gate_fidelity(np.zeros((4, 4))) == 0.0
    assert gates.average_gate_fidelity(np.diag([1, -1])) == pytest.approx(1 / 3)
    m = random_contraction(4, np.random.default_rng(0))
    assert gates.average_gate_fidelity(np.exp(0.7j) * m) == pytest.approx(gates.average_gate_fidelity(m))


def test_fidelity_rejects_bad_input():
    with pytest.raises(InvalidDimension):
        gates.average_gate_fidelity(np.eye(3))
    with pytest.raises(ValueError):
        gates.average_gate_fidelity(1.1 * np.eye(2))


@pytest.mark.parametrize("case", ["phase-flip", "random-2", "random-4"])
def test_fidelity_against_haar_monte_carlo(case):
    rng = np.random.default_rng(42)
    m = {"phase-flip": np.diag([1.0, -1.0]),
         "random-2": random_contraction(2, rng),
         "random-4": random_contraction(4, rng)}[case]
    mean, err = oracles.haar_fidelity(m, 100_000, rng)
    assert abs(gates.average_gate_fidelity(m) - mean) <= 3 * err


def test_ideal_gates():
    for kind in gates.GATE_KINDS:
        v = gates.ideal_gate(kind)
        np.testing.assert_allclose(v.T @ v, np.eye(len(v)), atol=1e-15)
    h = gates.ideal_gate("H")
    np.testing.assert_allclose(h[:, 0], [1 / np.sqrt(2), 1 / np.sqrt(2)])
    np.testing.assert_allclose(h[:, 1], [-1 / np.sqrt(2), 1 / np.sqrt(2)])


def test_logical_basis_orthonormal():
    for kind in gates.GATE_KINDS:
        p0 = gates.logical_basis(QnnParams(), kind)
        np.testing.assert_allclose(p0.conj().T @ p0, np.eye(p0.shape[1]), atol=1e-10)


@pytest.mark.parametrize("kind", gates.GATE_KINDS)
def test_t0_fidelity_is_identity_baseline(kind):
    run = gates.gate_propagator(QnnParams(), gate_preset("replication"), kind, [0.0])
    np.testing.assert_allclose(run.overlaps[0], gates.ideal_gate(kind).T, atol=1e-12)
    assert run.fidelity[0] == pytest.approx(T0_BASELINE[kind], abs=1e-12)


@pytest.mark.parametrize("kind", gates.GATE_KINDS)
def test_fidelity_independent_of_eigenvector_gauge(kind, monkeypatch):
    system = QnnSystem(SMALL)
    times = np.linspace(0, SMALL_RAMP.t_final, 5)
    plain = gates.gate_propagator(system, SMALL_RAMP, kind, times)
    original = QnnSystem.spectrum
    rng = np.random.default_rng(9)

    def regauged(self, *fields):
        w, v = original(self, *fields)
        return w, v * np.exp(2j * np.pi * rng.random(len(w)))

    monkeypatch.setattr(QnnSystem, "spectrum", regauged)
    other = gates.gate_propagator(system, SMALL_RAMP, kind, times)
    np.testing.assert_allclose(other.fidelity, plain.fidelity, atol=1e-10)


def test_leakage_non_increasing_with_duration():
    leak = []
    for scale in (1, 2, 4):
        sched = SMALL_RAMP.with_duration(scale * SMALL_RAMP.duration)
        leak.append(gates.gate_propagator(SMALL, sched, "H", [sched.t_final]).leakage[-1])
    assert leak[1] <= leak[0] + 1e-3 and leak[2] <= leak[1] + 1e-3


def test_adiabaticity_ratio_scales_inversely_with_duration():
    r1 = gates.adiabaticity_ratio(SMALL, SMALL_RAMP, "H")
    r2 = gates.adiabaticity_ratio(SMALL, SMALL_RAMP.with_duration(4e4), "H")
    assert r2 == pytest.approx(r1 / 4, rel=1e-3)


def test_hold_model_matches_direct_evolution():
    curve = gates.fidelity_curve(SMALL, SMALL_RAMP, "H", n_ramp=11, n_hold=21)
    held = SMALL_RAMP.with_hold(curve.hold)
    run = gates.gate_propagator(SMALL, held, "H", [held.t_final], atol=1e-8)
    assert run.fidelity[-1] == pytest.approx(curve.gate_fidelity, abs=1e-5)
    assert curve.schedule_id == held.schedule_id()


def test_calibrated_hold_is_the_scan_optimum():
    cal = gates.calibrate_hold(SMALL, SMALL_RAMP, "Bell")
    taus = np.linspace(0, cal.window, 200_001)
    assert cal.fidelity >= cal.model.fidelity(taus).max() - 1e-9
    assert cal.fidelity == pytest.approx(cal.model.fidelity(np.array([cal.tau]))[0])


def test_curve_invariants():
    curve = gates.fidelity_curve(SMALL, SMALL_RAMP, "H", n_ramp=11, n_hold=11)
    assert len(curve.times) == len(curve.fidelity)
    assert np.all(np.diff(curve.times) > 0)
    assert curve.max_fidelity >= curve.gate_fidelity
    rows = list(curve.rows())
    assert rows[0][2:4] == ("H", pytest.approx(0.01))
    with pytest.raises(ValueError):
        gates.GateFidelityCurve(np.zeros(2), np.array([0.5, 1.5]), "H", 0.01, "x")


def test_robustness_without_flip_has_zero_delta():
    rep = gates.spin_flip_robustness(SMALL, SMALL_RAMP, "H", None, hold=0.0)
    assert rep.delta == 0.0


def test_robustness_mirror_sites_agree_for_symmetric_fields():
    # symmetry does not need adiabaticity: a short ramp at tight tolerance
    sched = FieldSchedule(a_final=0.3, b1_initial=1e-2, b2_initial=1e-2, duration=100.0)
    tight = {"atol": 1e-9, "population_floor": 0.0}
    a = gates.spin_flip_robustness(SMALL, sched, "H", 1, hold=0.0, **tight)
    b = gates.spin_flip_robustness(SMALL, sched, "H", 4, hold=0.0, **tight)
    assert abs(a.delta - b.delta) <= 1e-6
    with pytest.raises(ValueError):
        gates.spin_flip_robustness(SMALL, sched, "H", 5, hold=0.0)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="a coherent site flip moves the input out of the "
                   "encoded levels; full simulation gives about 0.10")
def test_flipped_h_gate_stays_above_classical_bound():
    system = QnnSystem(QnnParams(r3=0.01))
    rep = gates.spin_flip_robustness(system, gate_preset("replication"), "H", 1)
    print(f"flipped H-gate fidelity {rep.fidelity:.4f}, unflipped {rep.reference_fidelity:.4f}")
    assert rep.fidelity > 2 / 3


@pytest.mark.parametrize("level", [0, 1])
def test_loop_phase_is_dynamical_plus_quantized_berry(level):
    sched = loop(0.1, 3.0, 1.0, 1e3)
    geometric, fidelity = gates.loop_phase(SMALL, sched, level, atol=1e-9)
    assert fidelity == pytest.approx(1.0, abs=1e-6)
    assert min(abs(geometric), abs(geometric - np.pi), abs(geometric - 2 * np.pi)) <= 1e-6
    berry = gates.berry_phase(SMALL, sched, level)
    assert min(abs(berry), abs(berry - np.pi), abs(berry - 2 * np.pi)) <= 1e-6


@settings(max_examples=10, deadline=None)
@given(a=st.floats(0, 1), b1=st.floats(0.01, 1), b2=st.floats(0.01, 1), level=st.integers(0, 3))
def test_berry_phase_quantized_on_random_loops(a, b1, b2, level):
    sched = loop(a, b1, b2, 1.0)
    try:
        berry = gates.berry_phase(SMALL, sched, level, n_points=401)
    except gates.DegenerateLevelCrossing:
        return
    assert min(abs(berry), abs(berry - np.pi), abs(berry - 2 * np.pi)) <= 1e-6


def test_berry_phase_reports_exact_crossing_between_samples():
    # no transverse field: levels cross exactly, so the tracked vector jumps
    with pytest.raises(gates.DegenerateLevelCrossing):
        gates.berry_phase(SMALL, loop(0.0, 0.25, 0.125, 1.0), 1, n_points=401)


def test_dynamical_phase_of_frozen_fields():
    w, _ = QnnSystem(SMALL).spectrum(0.4, 0.05, 0.01)
    assert gates.dynamical_phase(SMALL, frozen(0.4, 0.05, 0.01, 250.0), 1) == pytest.approx(250 * w[1])
