import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ionchain_nn.chain import (RHO_FIG1B, TrapPotential, chain_spectrum, coulomb_hessian,
                               energy_gradient, mode_ratio_scan, phonon_modes,
                               potential_energy, resolve_stiffness_model, solve_equilibrium,
                               trap_stiffness)
from ionchain_nn.errors import InvalidOddChain, SingularCurvature

# Dimensionless equilibria from oracles.chain_minimum (BFGS + root polish).
FROZEN_OUTER = {
    (5, 2.0): (1.383343196003719, 0.6525018029000159),
    (8, 2.0): (1.9650598559006602, 1.319179194098181),
    (6, 1.5): (1.915240383646628, 1.0381595268775792),
    (20, 0.5): (22.077766957613427, 17.574397285734417),
}
# Ratios from oracles.chain_stiffness at the oracle equilibrium.
FROZEN_RATIO = {(6, 1.5): 1.8659731484569466, (20, 0.5): 1.0200348366863234}


def unit_trap(gamma):
    return TrapPotential(1.0, gamma)


def test_two_ions_harmonic_closed_form():
    chain = solve_equilibrium(unit_trap(2.0), 2)
    # 2a^2 + 1/(2a) is stationary at a = 1/2
    np.testing.assert_allclose(chain.scaled, [-0.5, 0.5], atol=1e-12)
    spec = phonon_modes(chain)
    np.testing.assert_allclose(spec.scaled_frequencies, [np.sqrt(2), np.sqrt(6)], rtol=1e-10)


@pytest.mark.parametrize("key", sorted(FROZEN_OUTER))
def test_equilibrium_matches_frozen_oracle(key):
    n, gamma = key
    u = solve_equilibrium(unit_trap(gamma), n).scaled
    outer, second = FROZEN_OUTER[key]
    assert u[-1] == pytest.approx(outer, abs=1e-8)
    assert u[-2] == pytest.approx(second, abs=1e-8)
    np.testing.assert_allclose(u, -u[::-1], atol=1e-12)


@pytest.mark.parametrize("key", sorted(FROZEN_RATIO))
def test_ratio_matches_frozen_oracle(key):
    n, gamma = key
    _, spec = chain_spectrum(unit_trap(gamma), n)
    assert spec.ratio() == pytest.approx(FROZEN_RATIO[key], abs=1e-7)


def test_live_oracle_spectrum_n12_gamma13():
    u = oracles.chain_minimum(12, 1.3)
    w = np.sqrt(np.linalg.eigvalsh(oracles.chain_stiffness(u, 1.3)))
    _, spec = chain_spectrum(unit_trap(1.3), 12)
    np.testing.assert_allclose(spec.scaled_frequencies, w, rtol=1e-7)


def test_gradient_matches_oracle():
    rng = np.random.default_rng(3)
    u = np.sort(rng.normal(size=7) * 3)
    np.testing.assert_allclose(energy_gradient(u, 1.7), oracles.chain_gradient(u, 1.7), rtol=1e-12)
    assert potential_energy(u, 1.7) == pytest.approx(oracles.chain_energy(u, 1.7), rel=1e-13)


def test_coulomb_hessian_annihilates_translation():
    u = np.array([-2.0, -0.3, 0.9, 2.5])
    np.testing.assert_allclose(coulomb_hessian(u) @ np.ones(4), 0, atol=1e-12)


def test_si_units_roundtrip():
    trap = TrapPotential.harmonic(2 * np.pi * 1e6)
    chain, spec = chain_spectrum(trap, 4)
    assert spec.frequencies[0] == pytest.approx(2 * np.pi * 1e6, rel=1e-9)
    np.testing.assert_allclose(chain.positions / trap.length_scale, chain.scaled)


def test_odd_chain_below_linear_trap_rejected():
    with pytest.raises(InvalidOddChain):
        solve_equilibrium(unit_trap(0.5), 5)
    # an odd chain is fine once the trap is smooth enough at the center
    assert solve_equilibrium(unit_trap(2.0), 5).scaled[2] == pytest.approx(0.0, abs=1e-12)


def test_curvature_at_center_is_singular_for_soft_trap():
    with pytest.raises(SingularCurvature):
        trap_stiffness(np.array([-1.0, 0.0, 1.0]), 1.5)


def test_auto_stiffness_model():
    assert resolve_stiffness_model(1.5) == "hessian"
    assert resolve_stiffness_model(1.0) == "secant"
    assert resolve_stiffness_model(0.5) == "secant"
    assert resolve_stiffness_model(0.5, "hessian") == "hessian"


def test_models_agree_for_harmonic_trap():
    u = solve_equilibrium(unit_trap(2.0), 6).scaled
    np.testing.assert_allclose(trap_stiffness(u, 2.0, "hessian"), trap_stiffness(u, 2.0, "secant"))


def test_scan_reports_failures_and_keeps_order():
    pts = mode_ratio_scan([1.5, 0.5, 2.0], 20, TrapPotential(RHO_FIG1B, 2.0), workers=2)
    assert [p.gamma for p in pts] == [0.5, 1.5, 2.0]
    assert all(p.error is None for p in pts)
    assert pts[2].ratio == pytest.approx(np.sqrt(3), abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 14).filter(lambda n: n % 2 == 0),
       gamma=st.floats(0.3, 3.0))
def test_modes_orthonormal_and_reconstruct_kappa(n, gamma):
    _, spec = chain_spectrum(unit_trap(gamma), n)
    m = spec.modes
    np.testing.assert_allclose(m.T @ m, np.eye(n), atol=1e-8)
    rebuilt = m @ np.diag(spec.scaled_frequencies**2) @ m.T
    np.testing.assert_allclose(rebuilt, spec.stiffness, atol=1e-8 * np.abs(spec.stiffness).max())


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 16).filter(lambda n: n % 2 == 0), gamma=st.floats(0.3, 3.0))
def test_equilibrium_is_ordered_symmetric_and_stationary(n, gamma):
    chain = solve_equilibrium(unit_trap(gamma), n)
    u = chain.scaled
    assert np.all(np.diff(u) > 0)
    np.testing.assert_allclose(u, -u[::-1], atol=1e-10 * max(1, np.abs(u).max()))
    assert np.max(np.abs(energy_gradient(u, gamma))) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(0.1, 10.0), gamma=st.floats(0.4, 2.8))
def test_ratio_independent_of_trap_strength(scale, gamma):
    # in scaled units rho only sets the length; the ratio cannot change
    a = chain_spectrum(TrapPotential(RHO_FIG1B, gamma), 8)[1].ratio()
    b = chain_spectrum(TrapPotential(RHO_FIG1B * scale, gamma), 8)[1].ratio()
    assert a == pytest.approx(b, rel=1e-9)
