import numpy as np
import pytest
from scipy.linalg import expm

import oracles
from ionchain_nn.errors import StepSizeUnderflow
from ionchain_nn.evolution import evolve, hold_propagator
from ionchain_nn.qnn import QnnParams, QnnSystem, build_qnn_hamiltonian, product_state
from ionchain_nn.schedules import FieldSchedule, FunctionSchedule, frozen

SMALL = QnnParams(sites_per_block=1)
RAMP = FieldSchedule(a_final=1.0, b1_initial=0.3, b2_initial=0.1, duration=20.0)


def shifted(schedule, t0):
    """Same fields, clock started at ``t0``."""
    return FunctionSchedule(lambda t: schedule.fields(t)[0], lambda t: schedule.fields(t)[1],
                            lambda t: schedule.fields(t)[2], t0, schedule.t_final)


def dense_at(params, schedule):
    return lambda t: build_qnn_hamiltonian(params, *schedule.fields(t))


@pytest.mark.parametrize("label", ["uuuu", "uudd", "dudu"])
def test_small_system_matches_dop853(label):
    psi0 = product_state(label)
    ref = oracles.ode_evolve(lambda t: oracles.dense_network(*RAMP.fields(t), sites_per_block=1),
                             psi0, 0.0, 20.0)
    out, info = evolve(SMALL, RAMP, psi0, [20.0], atol=1e-10, method="magnus4", return_info=True)
    assert np.max(np.abs(out[-1] - ref)) <= 1e-8
    assert info.norm_drift <= 1e-9


def test_full_system_short_ramp_matches_dop853():
    params = QnnParams()
    ramp = FieldSchedule(a_final=0.5, b1_initial=0.3, b2_initial=0.1, duration=3.0)
    psi0 = product_state("uuuudddd")
    ref = oracles.ode_evolve(dense_at(params, ramp), psi0, 0.0, 3.0)
    out = evolve(params, ramp, psi0, [3.0], atol=1e-11, method="magnus4")
    assert np.max(np.abs(out[-1] - ref)) <= 1e-8


def test_midpoint_converges_to_oracle():
    psi0 = product_state("uuuu")
    ref = oracles.ode_evolve(dense_at(SMALL, RAMP), psi0, 0.0, 20.0)
    out = evolve(SMALL, RAMP, psi0, [20.0], atol=1e-10)
    assert np.max(np.abs(out[-1] - ref)) <= 1e-7


@pytest.mark.parametrize("method", ["midpoint", "magnus4"])
def test_semigroup(method):
    psi0 = product_state("uduu")
    full = evolve(SMALL, RAMP, psi0, [8.0, 20.0], atol=1e-11, method=method)
    second = evolve(SMALL, shifted(RAMP, 8.0), full[0], [20.0], atol=1e-11, method=method)
    assert np.max(np.abs(second[-1] - full[1])) <= 1e-8


def test_frozen_fields_are_exact_exponential():
    params = QnnParams()
    fields = (0.7, 0.02, 0.01)
    h = build_qnn_hamiltonian(params, *fields)
    psi0 = product_state("uuuuuudd")
    out = evolve(params, frozen(*fields, 50.0), psi0, [13.0, 50.0], atol=1e-12)
    np.testing.assert_allclose(out[0], expm(-1j * h * 13.0) @ psi0, atol=1e-10)
    np.testing.assert_allclose(out[1], expm(-1j * h * 50.0) @ psi0, atol=1e-10)


def test_frozen_eigenstate_only_gains_phase():
    w, v = hold_propagator(SMALL, 0.4, 0.05, 0.01)
    psi0 = v[:, 2].astype(complex)
    ts = np.linspace(0, 300, 7)
    out = evolve(SMALL, frozen(0.4, 0.05, 0.01, 300.0), psi0, ts)
    overlaps = out.conj() @ psi0
    np.testing.assert_allclose(np.abs(overlaps), 1.0, atol=1e-12)
    np.testing.assert_allclose(overlaps, np.exp(1j * w[2] * ts), atol=1e-9)


def test_batch_equals_separate_runs():
    psi = np.stack([product_state("uuuu"), product_state("dddd")], axis=1)
    together = evolve(SMALL, RAMP, psi, [20.0], atol=1e-9)
    one = evolve(SMALL, RAMP, psi[:, 1], [20.0], atol=1e-9)
    assert np.max(np.abs(together[0][:, 1] - one[0])) <= 1e-7


def test_populated_level_control_is_accurate_for_slow_ramp():
    # far levels excluded from error control still give the right slow dynamics
    ramp = FieldSchedule(a_final=0.3, b1_initial=1e-2, b2_initial=1e-3, duration=500.0)
    psi0 = product_state("uuuu")
    loose, info = evolve(SMALL, ramp, psi0, [500.0], atol=1e-6, population_floor=1e-6,
                         return_info=True)
    tight, ref_info = evolve(SMALL, ramp, psi0, [500.0], atol=1e-10, method="magnus4",
                             return_info=True)
    assert abs(abs(loose[0].conj() @ tight[0]) - 1) <= 1e-5
    assert info.steps < ref_info.steps / 3


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        evolve(SMALL, RAMP, 2 * product_state("uuuu"), [1.0])
    with pytest.raises(ValueError):
        evolve(SMALL, RAMP, product_state("uuuu"), [5.0, 1.0])
    with pytest.raises(ValueError):
        evolve(SMALL, RAMP, product_state("uuuu"), [1.0], method="rk4")
    with pytest.raises(StepSizeUnderflow):
        evolve(SMALL, RAMP, product_state("uuuu"), [20.0], atol=1e-12, max_steps=10)
