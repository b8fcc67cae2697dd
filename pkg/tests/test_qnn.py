import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ionchain_nn.errors import DegenerateLevelCrossing, InvalidParams
from ionchain_nn.qnn import (QnnParams, QnnSystem, build_qnn_hamiltonian, fix_phase, global_flip,
                             instantaneous_levels, product_state, site_flip)

fields = st.tuples(st.floats(0, 3), st.floats(-1, 1), st.floats(-1, 1))
weights = st.tuples(st.floats(0.5, 1.5), st.floats(0.5, 1.5), st.floats(0.001, 0.5))


@settings(max_examples=20, deadline=None)
@given(f=fields, r=weights, k=st.sampled_from([1, 2]))
def test_hamiltonian_matches_kronecker_oracle(f, r, k):
    params = QnnParams(1.3, *r, sites_per_block=k)
    h = build_qnn_hamiltonian(params, *f)
    ref = oracles.dense_network(*f, r=r, lam=1.3, sites_per_block=k)
    np.testing.assert_allclose(h, ref, atol=1e-12)
    assert np.isrealobj(h)
    np.testing.assert_array_equal(h, h.T)


@settings(max_examples=15, deadline=None)
@given(f=fields)
def test_sector_spectrum_matches_dense(f):
    params = QnnParams()
    system = QnnSystem(params)
    w, v = system.spectrum(*f)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(build_qnn_hamiltonian(params, *f)), atol=1e-10)
    np.testing.assert_allclose(v.T @ v, np.eye(256), atol=1e-10)
    h = build_qnn_hamiltonian(params, *f)
    np.testing.assert_allclose(h @ v[:, :5], v[:, :5] * w[:5], atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(f=fields)
def test_global_flip_reverses_longitudinal_fields(f):
    a, b1, b2 = f
    params = QnnParams()
    x = global_flip(8)
    np.testing.assert_allclose(x @ build_qnn_hamiltonian(params, a, b1, b2) @ x,
                               build_qnn_hamiltonian(params, a, -b1, -b2), atol=1e-12)


def test_zero_field_levels_have_flip_parity():
    system = QnnSystem(QnnParams())
    w, v = system.spectrum(1.0, 0.0, 0.0)
    x = global_flip(8)
    parity = np.einsum("ij,ij->j", v[:, :6], x @ v[:, :6])
    np.testing.assert_allclose(np.abs(parity), 1.0, atol=1e-10)


def test_initial_levels_are_the_encoded_product_states():
    params = QnnParams()
    w, v = QnnSystem(params).spectrum(0.0, 1e-5, 1e-6)
    expected = ["uuuuuuuu", "dddddddd", "uuuudddd", "dddduuuu"]
    for j, label in enumerate(expected):
        assert abs(product_state(label) @ v[:, j]) > 0.999
    # hand evaluation of the diagonal: block values +-2, r-terms 16 r
    assert w[0] == pytest.approx(-(64 * 1.0 + 0 + 0 + 4 * 1e-5 + 4 * 1e-6))
    assert w[2] == pytest.approx(-(64 * 0.95 + 4 * 1e-5 - 4 * 1e-6))


def test_instantaneous_levels_gauge_and_gap():
    params = QnnParams(sites_per_block=1)
    h = build_qnn_hamiltonian(params, 0.4, 0.05, 0.01)
    w, v = instantaneous_levels(h, 3)
    assert np.all(np.diff(w) > 0)
    np.testing.assert_allclose(v.conj().T @ v, np.eye(3), atol=1e-10)
    w2, v2 = instantaneous_levels(h, 3, reference=-v)
    np.testing.assert_allclose(v2, -v, atol=1e-12)
    with pytest.raises(DegenerateLevelCrossing) as err:
        instantaneous_levels(build_qnn_hamiltonian(params, 0.0, 0.0, 0.0), 2, gap_threshold=1e-9)
    assert err.value.gap == pytest.approx(0.0, abs=1e-12)


def test_fix_phase_makes_overlaps_real_positive():
    rng = np.random.default_rng(2)
    ref = np.linalg.qr(rng.normal(size=(6, 2)))[0].astype(complex)
    rotated = ref * np.exp(1j * np.array([0.3, -2.0]))
    np.testing.assert_allclose(fix_phase(rotated, ref), ref, atol=1e-12)


def test_site_flip_and_product_state():
    up = product_state("uuuu")
    flipped = site_flip(4, 1) @ up
    np.testing.assert_array_equal(flipped, product_state("duuu"))
    np.testing.assert_array_equal(product_state([1, -1]), [0, 1, 0, 0])


def test_params_validation():
    with pytest.raises(InvalidParams):
        QnnParams(r3=0.0)
    with pytest.raises(InvalidParams):
        QnnParams(r1=0.1, r3=0.2)
    assert QnnParams(r3=0.05).noise_ratio == pytest.approx(0.05)
