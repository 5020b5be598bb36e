import math

import numpy as np
import pytest

from opgap.airy import airy_zero
from opgap.chain import ChainSpec, build_generator
from opgap.continuum import (ContinuumModel, continuum_eigenvalue, continuum_mode, mode_peak, tail_asymptote,
                             wall_offset)
from opgap.hermitian import hermitize
from opgap.spectral import spectrum_for_spec, stable_log_modes

QUBIT = dict(a=math.log(4), w=2.0, Lambda=1.0)


def test_model_rates_and_scales():
    m = ContinuumModel(gamma=1e-3, **QUBIT)
    assert m.w_plus == pytest.approx(4.0)
    assert m.w_minus == pytest.approx(1.0)
    assert m.v_B == pytest.approx(3.0)
    assert m.D == pytest.approx(2.5)
    assert m.energy_scale == pytest.approx((2e-6) ** (1 / 3))
    assert m.length_scale == pytest.approx((2e3) ** (1 / 3))
    spec_m = ContinuumModel.from_spec(ChainSpec(L=None, w_plus=4.0, w_minus=1.0, gamma=1e-3))
    assert spec_m.Lambda == pytest.approx(1.0) and spec_m.gamma == 1e-3


@pytest.mark.parametrize("kw", [dict(gamma=0.0), dict(gamma=1e-3, w=0.0), dict(gamma=1e-3, a=-0.1)])
def test_model_validation(kw):
    params = dict(QUBIT, **kw)
    with pytest.raises(ValueError):
        ContinuumModel(**params)


def test_eigenvalue_formula():
    m = ContinuumModel(gamma=1e-3, **QUBIT)
    for n in (1, 2, 5):
        assert continuum_eigenvalue(m, n) == pytest.approx(1.0 - airy_zero(n) * (2e-6) ** (1 / 3), rel=1e-14)
    assert continuum_eigenvalue(m, 1) == pytest.approx(1.02946, abs=5e-6)


def test_eigenvalues_increase_with_gamma_and_level():
    lams = [continuum_eigenvalue(ContinuumModel(gamma=g, **QUBIT), 1) for g in (1e-5, 1e-4, 1e-3)]
    assert np.all(np.diff(lams) > 0)
    m = ContinuumModel(gamma=1e-3, **QUBIT)
    assert np.all(np.diff([continuum_eigenvalue(m, n) for n in range(1, 6)]) > 0)


def test_mode_vanishes_at_wall_and_oscillates():
    m = ContinuumModel(gamma=1e-3, **QUBIT)
    psi, phi = continuum_mode(m, 1, [0.0])
    assert abs(psi[0]) < 1e-14
    x = np.linspace(0, 200, 4001)
    psi3, _ = continuum_mode(m, 3, x)
    assert np.count_nonzero(np.diff(np.sign(psi3[1:])) != 0) == 2
    lpsi, lphi = continuum_mode(m, 1, np.array([100.0, 2000.0]), log=True)
    assert np.all(np.isfinite(lphi))
    np.testing.assert_allclose(lphi - lpsi, 0.5 * m.a * np.array([100.0, 2000.0]))
    with pytest.raises(ValueError):
        continuum_mode(m, 1, [-1.0])
    with pytest.raises(ValueError):
        continuum_mode(m, 1, [1e6])


def test_wall_offset():
    assert wall_offset(math.log(4)) == pytest.approx(1.0)
    assert wall_offset(10.0) == pytest.approx(math.exp(-5) / (1 - math.exp(-5)))
    with pytest.raises(ValueError):
        wall_offset(0.0)


def test_discrete_mode_matches_shifted_airy():
    gamma = 1e-3
    spec = ChainSpec(L=1500, w_plus=4.0, w_minus=1.0, gamma=gamma, far_boundary="absorbing")
    res, fp = spectrum_for_spec(spec, k=1)
    m = ContinuumModel.from_frame(fp, gamma)
    x = np.arange(1, 301) + wall_offset(fp.a)
    psi_c, _ = continuum_mode(m, 1, x)
    psi_d = res.psi_modes[:300, 0]
    psi_d = psi_d * np.sign(psi_d[np.argmax(np.abs(psi_d))])
    err = np.max(np.abs(psi_d / np.abs(psi_d).max() - psi_c / np.abs(psi_c).max()))
    assert err < 3e-3
    assert res.gap == pytest.approx(continuum_eigenvalue(m, 1), rel=1e-3)


def test_mode_peak():
    m = ContinuumModel(gamma=1e-3, **QUBIT)
    assert mode_peak(m, 1) == pytest.approx(990.4, abs=0.05)
    with pytest.raises(ValueError):
        mode_peak(ContinuumModel(a=0.0, w=1.0, Lambda=0.0, gamma=1e-3), 1)


def test_tail_asymptote_forms_and_discrete_slope():
    spec = ChainSpec(L=6000, w_plus=4.0, w_minus=1.0, gamma=0.01)
    pred = tail_asymptote(spec, 3000.0)
    assert pred.discrete == pytest.approx(3000 * (math.log(3000) - math.log(math.e * 200)))
    assert pred.continuum == pytest.approx(2 / 3 * math.sqrt(0.005) * 3000**1.5)
    assert pred.continuum_mixed == pytest.approx(pred.continuum - 0.5 * math.log(4) * 3000)
    with pytest.raises(ValueError):
        tail_asymptote(spec, 1000.0)
    # lattice eigenvector: the log ratio follows the dominant diagonal, -log(w / (gamma k + 2 w))
    res, fp = spectrum_for_spec(spec, k=1)
    H = hermitize(build_generator(spec), fp)
    logs, _ = stable_log_modes(H, res.eigenvalues, res.psi_modes)
    k = 4000
    slope = logs[k, 0] - logs[k - 1, 0]
    assert -slope == pytest.approx(math.log((k * 0.01 + 4.0) / 2.0), rel=0.005)


def test_tail_forms_at_matching_scale_and_beyond():
    spec = ChainSpec(L=None, w_plus=4.0, w_minus=1.0, gamma=1e-2)
    near = tail_asymptote(spec, 10 * 2.0 / 1e-2 * 1.0001)
    # the mixed-frame continuum form tracks the lattice law at the matching scale
    assert abs(near.continuum_mixed / near.discrete - 1) < 0.2
    assert abs(near.continuum / near.discrete - 1) > 0.2
    # x^(3/2) outgrows x log x, so far out the continuum tail is the steeper one
    far = tail_asymptote(spec, 1e7)
    assert far.continuum > far.discrete
