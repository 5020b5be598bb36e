import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from opgap.chain import ChainSpec
from opgap.dynamics import autocorrelation
from opgap.estimators import BindingTransitionEstimator, MoriGapEstimator
from opgap.spectral import spectrum_for_spec


def test_gap_estimator_matches_functional_api():
    est = MoriGapEstimator(L=400, gamma=0.01, boundary_extent=1, bond_overrides={1: 0.1}, k=3).fit()
    res, _ = spectrum_for_spec(ChainSpec(L=400, w_plus=4.0, w_minus=1.0, gamma=0.01, boundary_extent=1,
                                         bond_overrides={1: 0.1}), 3)
    np.testing.assert_array_equal(est.eigenvalues_, res.eigenvalues)
    assert est.classifications_[0] == "bound"
    assert est.Lambda_ == pytest.approx(1.0)
    assert est.continuum_eigenvalues_.shape == (3,)
    t = np.array([0.0, 1.0, 10.0])
    np.testing.assert_allclose(est.predict(t), autocorrelation(est.spec_, t).values)


def test_gap_estimator_without_dissipation():
    est = MoriGapEstimator(L=3, w_plus=2.0, w_minus=1.0, gamma=0.0).fit()
    assert abs(est.gap_) < 1e-12
    assert est.classifications_ is None and est.continuum_eigenvalues_ is None


def test_estimator_protocol():
    est = MoriGapEstimator(gamma=0.02, k=2)
    assert est.get_params()["k"] == 2
    twin = clone(est).set_params(gamma=0.05)
    assert twin.gamma == 0.05 and est.gamma == 0.02
    with pytest.raises(NotFittedError):
        est.predict([0.0])
    with pytest.raises(NotFittedError):
        BindingTransitionEstimator().predict([0.1])


def test_binding_estimator():
    est = BindingTransitionEstimator(threads=2)
    g = np.linspace(0.05, 0.6, 12)
    est.fit(g, [1e-2, 1e-3])
    assert 0.25 < est.g_c_ < 0.45
    pred = est.predict([0.05, 0.6])
    np.testing.assert_allclose(pred, est.curve_.Gamma[0][[0, -1]])
