import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opgap.ruc import (RucParams, _identity_forward_weights, clock_shift_basis, com_diffusion_check,
                       endpoint_transition_estimate, haar_gate_sample, ruc_params, sample_gate_configurations,
                       single_site_average_decay)


def test_qubit_and_qutrit_rates():
    pr = ruc_params(2)
    assert (pr.p, pr.w_plus, pr.w_minus, pr.Lambda) == pytest.approx((0.2, 0.8, 0.2, 0.2))
    assert pr.a == pytest.approx(math.log(4))
    assert pr.w == pytest.approx(0.4)
    q3 = ruc_params(3)
    assert (q3.p, q3.w_plus, q3.w_minus, q3.Lambda) == pytest.approx((0.1, 0.9, 0.1, 0.4))
    rel = ruc_params(2, geometry="relative")
    assert (rel.w_plus, rel.w_minus, rel.Lambda) == pytest.approx((1.6, 0.4, 0.4))
    com = ruc_params(2, r=2.0, geometry="com")
    assert com.w_plus == com.w_minus == 2.0 and com.Lambda == 0.0 and com.D_com == 0.5


@given(q=st.integers(2, 12), r=st.floats(0.1, 10.0), geometry=st.sampled_from(["edge", "relative"]))
def test_derived_identities(q, r, geometry):
    pr = RucParams(q, r, geometry)
    assert pr.Lambda == pytest.approx((math.sqrt(pr.w_plus) - math.sqrt(pr.w_minus)) ** 2, rel=1e-12)
    assert pr.w_plus / pr.w_minus == pytest.approx(q**2, rel=1e-12)
    assert pr.w_plus + pr.w_minus == pytest.approx((2 if geometry == "relative" else 1) * r, rel=1e-12)
    assert pr.gamma_dressing == pytest.approx(1 - 1 / q**2)


@pytest.mark.parametrize("kw", [dict(q=1), dict(q=2.5), dict(q=2, r=0.0), dict(q=2, geometry="loop")])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        RucParams(**kw)


def test_chain_spec_mapping():
    spec = ruc_params(2, geometry="relative").chain_spec(L=50, gamma=0.01)
    assert spec.geometry == "relative" and spec.use_dressed_rate
    assert spec.gamma_d == pytest.approx(0.0075)
    f, b = spec.bond_rates()
    assert f[5] == pytest.approx(1.6) and b[5] == pytest.approx(0.4)
    com = ruc_params(3, geometry="com").chain_spec(L=50)
    assert com.geometry == "com" and com.gamma_d == 0


def test_haar_gates_are_unitary_with_haar_moments():
    rng = np.random.default_rng(1)
    U = haar_gate_sample(2, rng, size=20000)
    eye = np.eye(4)
    assert np.max(np.abs(U @ np.conj(np.swapaxes(U, -1, -2)) - eye)) < 1e-12
    u2 = np.abs(U[:, 0, 0]) ** 2
    assert u2.mean() == pytest.approx(1 / 4, abs=4 * u2.std() / math.sqrt(u2.size))
    u4 = u2**2
    assert u4.mean() == pytest.approx(2 / 20, abs=4 * u4.std() / math.sqrt(u4.size))
    single = haar_gate_sample(3, rng)
    assert single.shape == (9, 9)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_clock_shift_basis_orthogonal(q):
    P = clock_shift_basis(q)
    gram = np.einsum("aij,bij->ab", P.conj(), P)
    np.testing.assert_allclose(gram, q * np.eye(q * q), atol=1e-12)
    np.testing.assert_allclose(P[0], np.eye(q))


@pytest.mark.parametrize("q", [2, 3])
def test_identity_forward_weight_matches_full_decomposition(q):
    n = 40
    basis = clock_shift_basis(q)
    got = _identity_forward_weights(q, n, np.random.default_rng(7), basis)
    # replay the same draws and decompose U O U^dag over all two-site Paulis
    rng = np.random.default_rng(7)
    back = rng.integers(1, q * q, size=n)
    fwd = rng.integers(0, q * q, size=n)
    U = haar_gate_sample(q, rng, size=n)
    two_site = np.einsum("aij,bkl->abikjl", basis, basis).reshape(q * q, q * q, q * q, q * q)
    for i in range(n):
        O = np.kron(basis[back[i]], basis[fwd[i]])
        Op = U[i] @ O @ U[i].conj().T
        c = np.einsum("abij,ij->ab", two_site.conj(), Op)
        w = np.abs(c) ** 2
        assert w.sum() == pytest.approx(q**4, rel=1e-10)
        assert got[i] == pytest.approx(w[:, 0].sum() / w.sum(), rel=1e-10, abs=1e-14)


def test_transition_estimate_qubit():
    rep = endpoint_transition_estimate(2, 20000, seed=3)
    assert abs(rep.z_score) < 4
    assert rep.p_exact == 0.2
    again = endpoint_transition_estimate(2, 20000, seed=3, threads=3)
    assert again.p_hat == rep.p_hat
    with pytest.raises(ValueError):
        endpoint_transition_estimate(2, 500, seed=3)


def test_com_diffusion():
    rep = com_diffusion_check(1.0, 20.0, 20000, seed=11)
    assert rep.D_exact == 0.25
    assert abs(rep.D_hat - 0.25) < 4 * rep.D_err
    assert abs(rep.mean_Y) < 4 * rep.mean_Y_err
    with pytest.raises(ValueError):
        com_diffusion_check(1.0, 5.0, 20000, seed=1)
    with pytest.raises(ValueError):
        com_diffusion_check(1.0, 20.0, 100, seed=1)


def test_gate_configurations_reproduce_endpoint_rates():
    pr = ruc_params(2)
    cnt = sample_gate_configurations(pr, 50.0, 400, seed=5)
    rates = cnt.rates()
    n = cnt.horizon * cnt.walkers
    assert np.all(np.abs(rates - 1.0) < 4 / math.sqrt(n))
    assert cnt.outward_right / n == pytest.approx(pr.w_plus, abs=4 * math.sqrt(pr.w_plus / n))
    assert cnt.inward_right / n == pytest.approx(pr.w_minus, abs=4 * math.sqrt(pr.w_minus / n))


def test_single_site_dressing():
    assert single_site_average_decay(2) == pytest.approx(0.75)
    assert single_site_average_decay(3, 2.0) == pytest.approx(2 * 8 / 9)
