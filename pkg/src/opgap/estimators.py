"""scikit-learn style wrappers around the spectral and binding analyses.

The analyses are deterministic functions of a parameter set rather than
learners, so ``fit`` ignores any data arguments beyond what is documented;
the wrappers exist to give parameter handling (``get_params``,
``set_params``, ``clone``) and a uniform ``fit``/``predict`` surface.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .chain import ChainSpec
from .continuum import ContinuumModel, continuum_eigenvalue
from .dynamics import autocorrelation
from .spectral import binding_scan, classify_mode, spectrum_for_spec


class _ChainParamsMixin:
    def _spec(self, gamma: float | None = None) -> ChainSpec:
        overrides = dict(self.bond_overrides or {})
        return ChainSpec(L=self.L, w_plus=self.w_plus, w_minus=self.w_minus,
                         gamma=self.gamma if gamma is None else gamma,
                         use_dressed_rate=self.use_dressed_rate, q=self.q,
                         boundary_extent=max(self.boundary_extent, max(overrides, default=0)),
                         bond_overrides=overrides, geometry=self.geometry, far_boundary=self.far_boundary)


class MoriGapEstimator(_ChainParamsMixin, BaseEstimator):
    """Slowest decay rates of the endpoint chain.

    ``fit()`` solves for the ``k`` slowest modes and sets ``eigenvalues_``,
    ``gap_``, ``classifications_``, ``xi_`` and ``continuum_eigenvalues_``.
    ``predict(t)`` returns the wall autocorrelation ``C^2(t)``.

    Examples
    --------
    >>> est = MoriGapEstimator(L=3, w_plus=2.0, w_minus=1.0, gamma=0.0, k=1).fit()
    >>> abs(est.gap_) < 1e-12
    True
    """

    def __init__(self, L=None, w_plus=4.0, w_minus=1.0, gamma=1e-3, use_dressed_rate=False, q=2,
                 boundary_extent=0, bond_overrides=None, geometry="edge", far_boundary="reflecting", k=1):
        self.L = L
        self.w_plus = w_plus
        self.w_minus = w_minus
        self.gamma = gamma
        self.use_dressed_rate = use_dressed_rate
        self.q = q
        self.boundary_extent = boundary_extent
        self.bond_overrides = bond_overrides
        self.geometry = geometry
        self.far_boundary = far_boundary
        self.k = k

    def fit(self, X=None, y=None):
        spec = self._spec()
        res, fp = spectrum_for_spec(spec, self.k)
        self.spec_ = spec
        self.eigenvalues_ = res.eigenvalues
        self.gap_ = res.gap
        self.Lambda_ = fp.Lambda
        self.psi_modes_ = res.psi_modes
        self.phi_modes_ = res.phi_modes
        if spec.gamma_d > 0:
            self.classifications_ = classify_mode(res, fp, spec)
            self.xi_ = res.xi
            model = ContinuumModel.from_frame(fp, spec.gamma_d)
            self.continuum_eigenvalues_ = np.array([continuum_eigenvalue(model, n) for n in range(1, res.k + 1)])
        else:
            self.classifications_ = None
            self.xi_ = None
            self.continuum_eigenvalues_ = None
        return self

    def predict(self, X):
        """``C^2(t)`` at times ``X`` (ascending, 1-D or a single column)."""
        check_is_fitted(self, "gap_")
        t = np.asarray(X, dtype=float).ravel()
        return autocorrelation(self.spec_, t).values


class BindingTransitionEstimator(_ChainParamsMixin, BaseEstimator):
    """Locate the unbinding threshold from a ``(g, gamma)`` scan.

    ``fit(g_grid, gamma_grid)`` sets ``g_c_``, ``g_c_err_``,
    ``energy_exponent_``, ``xi_exponent_`` and ``curve_``. ``predict(g)``
    interpolates the gap at the smallest ``gamma``.
    """

    def __init__(self, L=None, w_plus=4.0, w_minus=1.0, gamma=0.0, use_dressed_rate=False, q=2,
                 boundary_extent=1, bond_overrides=None, geometry="edge", far_boundary="reflecting", bond=1,
                 rounding_factor=1.0, fit_span=None, ansatz="corrected", threads=1):
        self.L = L
        self.w_plus = w_plus
        self.w_minus = w_minus
        self.gamma = gamma
        self.use_dressed_rate = use_dressed_rate
        self.q = q
        self.boundary_extent = boundary_extent
        self.bond_overrides = bond_overrides
        self.geometry = geometry
        self.far_boundary = far_boundary
        self.bond = bond
        self.rounding_factor = rounding_factor
        self.fit_span = fit_span
        self.ansatz = ansatz
        self.threads = threads

    def fit(self, X, y):
        """``X``: grid of boundary factors ``g``; ``y``: grid of ``gamma``."""
        g_grid = np.asarray(X, dtype=float).ravel()
        gammas = np.asarray(y, dtype=float).ravel()
        tpl = self._spec(gamma=float(gammas.min()))
        curve = binding_scan(tpl, g_grid, gammas, bond=self.bond, threads=self.threads,
                             rounding_factor=self.rounding_factor, fit_span=self.fit_span, ansatz=self.ansatz)
        self.curve_ = curve
        self.g_c_ = curve.g_c_estimate
        self.g_c_err_ = curve.g_c_uncertainty
        self.energy_exponent_ = curve.energy_exponent
        self.xi_exponent_ = curve.xi_exponent
        return self

    def predict(self, X):
        check_is_fitted(self, "curve_")
        g = np.asarray(X, dtype=float).ravel()
        return np.interp(g, self.curve_.g_values, self.curve_.Gamma[0])
