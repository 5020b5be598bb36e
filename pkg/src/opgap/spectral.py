"""Low-lying spectrum of the hermitized generator, bound-state analysis and
unbinding-transition scans."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _sturm
from .chain import ChainSpec, TridiagonalOperator, build_generator
from .hermitian import FrameParams, frame_params, hermitize

AIRY_A1 = -2.338107410459767
# bound/extended threshold sits half an Airy level below the bulk gap
BOUND_THRESHOLD_C = -AIRY_A1 / 2
RESIDUAL_TOL = 1e-8


class SpectralError(RuntimeError):
    """The eigensolver failed to converge or to meet its residual bound."""


@dataclass
class SpectralResult:
    """Slowest ``k`` modes of ``M~``.

    ``eigenvalues`` are decay rates (``M~ psi = -lambda psi``), ascending.
    ``psi_modes`` holds unit-norm hermitian-frame columns; ``phi_modes``
    holds original-frame profiles scaled to ``max |phi| = 1`` (``None`` if
    no frame parameters were supplied).
    """

    eigenvalues: np.ndarray
    psi_modes: np.ndarray
    phi_modes: np.ndarray | None = None
    residuals: np.ndarray | None = None
    classifications: list[str] | None = None
    within_rounding_window: list[bool] | None = None
    xi: float | None = None

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[0])

    Gamma = gap

    @property
    def k(self) -> int:
        return int(self.eigenvalues.shape[0])

    def peak_sites(self) -> np.ndarray:
        """1-based site of ``max |phi_n|`` for each retained mode."""
        if self.phi_modes is None:
            raise ValueError("original-frame modes were not computed")
        return np.argmax(np.abs(self.phi_modes), axis=0) + 1


def _start_vector(n: int) -> np.ndarray:
    return np.random.default_rng(20240611).uniform(0.5, 1.5, size=n)


def low_spectrum(op: TridiagonalOperator, k: int, fp: FrameParams | None = None,
                 max_iter: int = 200) -> SpectralResult:
    """The ``k`` algebraically largest eigenvalues of a symmetric ``M~``.

    Eigenvalues come from Sturm-sequence bisection on ``A = -M~``,
    eigenvectors from inverse iteration; both are O(L) per step and need no
    dense storage.
    """
    n = len(op)
    if not op.is_symmetric:
        raise ValueError("low_spectrum needs a symmetric (hermitian-frame) operator")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    d = -np.asarray(op.diag, dtype=float)
    e = -np.asarray(op.sub, dtype=float)
    vals, widths, steps = _sturm.bisect_smallest(d, e, k, max_iter)
    if np.any(steps >= max_iter):
        bad = int(np.argmax(steps >= max_iter))
        raise SpectralError(
            f"bisection did not converge for mode {bad + 1}: bracket "
            f"[{vals[bad] - widths[bad] / 2:.17g}, {vals[bad] + widths[bad] / 2:.17g}]"
        )
    norm = op.norm_bound()
    vecs = None
    res = None
    for n_iter in (3, 6, 12):
        vecs = _sturm.inverse_iteration(d, e, vals, _start_vector(n), n_iter, 1e-10)
        res = np.linalg.norm(op.matvec(vecs) + vecs * vals, axis=0)
        if np.all(res <= RESIDUAL_TOL * norm):
            break
    else:
        bad = int(np.argmax(res))
        raise SpectralError(
            f"inverse iteration residual {res[bad]:.3g} exceeds {RESIDUAL_TOL:g}*||M|| for mode {bad + 1} "
            f"(eigenvalue bracket width {widths[bad]:.3g})"
        )
    phi = original_frame_modes(op, vals, vecs, fp) if fp is not None else None
    return SpectralResult(eigenvalues=vals, psi_modes=vecs, phi_modes=phi, residuals=res)


def stable_log_modes(op: TridiagonalOperator, vals: np.ndarray, vecs: np.ndarray,
                     floor: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """``log |psi|`` and sign per mode, with the outer tail rebuilt.

    Beyond the last site where ``|psi| >= floor * max|psi|`` the computed
    eigenvector is roundoff; there the profile is continued by the
    backward recursion, which resolves arbitrarily small magnitudes.
    """
    d = -np.asarray(op.diag, dtype=float)
    e = -np.asarray(op.sub, dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(vecs))
    signs = np.sign(vecs)
    for j in range(vecs.shape[1]):
        mag = np.abs(vecs[:, j])
        big = np.nonzero(mag >= floor * mag.max())[0]
        i0 = int(big[-1])
        if i0 >= len(op) - 1:
            continue
        logr, sg = _sturm.backward_log_ratios(d, e, float(vals[j]))
        logs[i0 + 1:, j] = logs[i0, j] + np.cumsum(logr[i0:])
        signs[i0 + 1:, j] = signs[i0, j] * np.cumprod(sg[i0:])
    return logs, signs


def original_frame_modes(op: TridiagonalOperator, vals: np.ndarray, vecs: np.ndarray,
                         fp: FrameParams) -> np.ndarray:
    """``phi = T psi`` scaled to ``max |phi| = 1``, overflow-free."""
    logs, signs = stable_log_modes(op, vals, vecs)
    logphi = logs + fp.log_T[:, None]
    logphi -= logphi.max(axis=0, keepdims=True)
    return signs * np.exp(logphi)


def spectrum_for_spec(spec: ChainSpec, k: int = 1) -> tuple[SpectralResult, FrameParams]:
    """Build, hermitize and solve in one go."""
    fp = frame_params(spec)
    op = hermitize(build_generator(spec), fp)
    return low_spectrum(op, min(k, len(op)), fp), fp


def log_mode_profile(op: TridiagonalOperator, decay_rate: float, anchor: int, log_anchor: float) -> np.ndarray:
    """``log |psi(x)|`` for ``x >= anchor`` from the stable backward recursion.

    Resolves super-exponentially small tails that underflow in the
    eigenvector itself. ``anchor`` is a 1-based site where
    ``log |psi| = log_anchor`` is known; earlier sites are returned as NaN.
    """
    d = -np.asarray(op.diag, dtype=float)
    e = -np.asarray(op.sub, dtype=float)
    logr, _ = _sturm.backward_log_ratios(d, e, float(decay_rate))
    out = np.full(len(op), np.nan)
    i0 = anchor - 1
    out[i0] = log_anchor
    out[i0 + 1:] = log_anchor + np.cumsum(logr[i0:])
    return out


def fit_xi(psi: np.ndarray, start: int, max_window: int | None = None) -> float | None:
    """Localization length from the exponential segment of ``psi``.

    Fits ``log|psi| = c - x/xi`` on sites ``start .. start + 2 xi``
    (1-based), refining the window from the previous estimate. Returns
    ``None`` when the profile does not decay there.
    """
    n = psi.shape[0]
    if n < start + 8:
        raise ValueError(f"need at least {start + 8} sites to fit xi, have {n}")
    with np.errstate(divide="ignore"):
        logpsi = np.log(np.abs(psi))
    width = 8
    xi = None
    for _ in range(6):
        stop = min(n, start + width)
        if max_window is not None:
            stop = min(stop, start + max_window)
        xs = np.arange(start, stop + 1)
        ys = logpsi[xs - 1]
        ok = np.isfinite(ys)
        if ok.sum() < 3:
            return xi
        slope = np.polyfit(xs[ok], ys[ok], 1)[0]
        if slope >= 0:
            return None
        new = -1.0 / slope
        if xi is not None and abs(new - xi) < 1e-3 * xi:
            return new
        xi = new
        width = max(8, int(round(2 * xi)))
    return xi


def airy_scale(fp: FrameParams, gamma_d: float) -> float:
    """``(w gamma^2)^(1/3)``, the Airy energy scale."""
    return (fp.w * gamma_d**2) ** (1.0 / 3.0)


def classify_mode(res: SpectralResult, fp: FrameParams, spec: ChainSpec) -> list[str]:
    """Label each retained mode ``bound`` or ``extended``.

    Bound means more than half the hermitian-frame weight sits within
    ``max(4 x0, 4 xi)`` of the wall and the decay rate lies below
    ``Lambda - (|a1|/2) (w gamma^2)^(1/3)``. Also fills ``res.xi`` and
    ``res.within_rounding_window`` (decay rate within one threshold offset
    of the threshold, where the label is a convention).
    """
    psi1 = res.psi_modes[:, 0]
    x0 = spec.boundary_extent
    xi = fit_xi(psi1, start=x0 + 2)
    scale = airy_scale(fp, spec.gamma_d)
    threshold = fp.Lambda - BOUND_THRESHOLD_C * scale
    reach = max(4 * x0, int(math.ceil(4 * xi)) if xi is not None else 0)
    labels, flags = [], []
    for j in range(res.k):
        weight = float(np.sum(res.psi_modes[:reach, j] ** 2)) if reach > 0 else 0.0
        lam = float(res.eigenvalues[j])
        labels.append("bound" if (weight > 0.5 and lam < threshold) else "extended")
        flags.append(bool(scale > 0 and abs(lam - threshold) <= BOUND_THRESHOLD_C * scale))
    res.classifications = labels
    res.within_rounding_window = flags
    res.xi = xi if labels[0] == "bound" else None
    return labels


@dataclass
class BindingCurve:
    """Gap and localization length across a boundary-suppression scan.

    ``Gamma`` and ``xi`` are indexed ``[gamma_index, g_index]``.
    ``g_cross`` holds, per ``gamma``, the ``g`` at which ``Gamma = Lambda``.
    """

    g_values: np.ndarray
    gamma_values: np.ndarray
    Gamma: np.ndarray
    xi: np.ndarray
    Lambda: float
    g_cross: np.ndarray
    g_c_estimate: float
    g_c_uncertainty: float
    energy_exponent: float = float("nan")
    energy_exponent_err: float = float("nan")
    xi_exponent: float = float("nan")
    xi_exponent_err: float = float("nan")
    fit_g: np.ndarray = field(default_factory=lambda: np.empty(0))

    def Gamma_of_g(self, gamma_index: int = -1) -> np.ndarray:
        return self.Gamma[gamma_index]

    def xi_of_g(self, gamma_index: int = -1) -> np.ndarray:
        return self.xi[gamma_index]


def _gap_and_xi(spec: ChainSpec, bond: int, g: float, want_xi: bool) -> tuple[float, float]:
    s = spec.replace(bond_overrides={bond: g})
    fp = frame_params(s)
    op = hermitize(build_generator(s), fp)
    if not want_xi:
        d = -op.diag
        e = -op.sub
        vals, _, steps = _sturm.bisect_smallest(d, e, 1, 200)
        return float(vals[0]), float("nan")
    res = low_spectrum(op, 1, None)
    xi = fit_xi(res.psi_modes[:, 0], start=s.boundary_extent + 2)
    return res.gap, (xi if xi is not None else float("nan"))


def _lstsq(A: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients and their standard errors."""
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    dof = y.size - A.shape[1]
    if dof > 0:
        resid = y - A @ coef
        cov = float(resid @ resid) / dof * np.linalg.inv(A.T @ A)
        err = np.sqrt(np.diag(cov))
    else:
        err = np.zeros(A.shape[1])
    return coef, err


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Least-squares ``y = c0 + c1 x``; returns ``(c0, c1, err0, err1)``."""
    coef, err = _lstsq(np.vstack([np.ones_like(x), x]).T, y)
    return float(coef[0]), float(coef[1]), float(err[0]), float(err[1])


def fit_exponent(dist: np.ndarray, y: np.ndarray, ansatz: str = "corrected") -> tuple[float, float]:
    """Exponent ``p`` of ``y ~ dist**p`` with its standard error.

    ``ansatz='power'`` fits ``log y = c0 + p log dist``. ``'corrected'``
    adds the leading analytic correction, ``log y = c0 + p log dist + c1 dist``;
    without it the binding energy near the threshold reads as an
    exponent well below 2 unless ``dist`` is tiny.
    """
    dist = np.asarray(dist, dtype=float)
    y = np.asarray(y, dtype=float)
    cols = [np.ones_like(dist), np.log(dist)]
    if ansatz == "corrected":
        cols.append(dist)
    elif ansatz != "power":
        raise ValueError(f"unknown ansatz {ansatz!r}")
    if dist.size < len(cols):
        raise ValueError(f"need at least {len(cols)} points for the {ansatz} fit")
    coef, err = _lstsq(np.vstack(cols).T, np.log(y))
    return float(coef[1]), float(err[1])


def binding_scan(template: ChainSpec, g_grid, gamma_grid, bond: int = 1, threads: int = 1,
                 rounding_factor: float = 1.0, fit_span: float | None = None,
                 ansatz: str = "corrected") -> BindingCurve:
    """Scan the boundary factor ``g`` on ``bond`` across several ``gamma``.

    For each ``gamma`` the crossing ``Gamma(g*) = Lambda`` is refined by
    root finding inside the bracketing grid interval. ``g_c`` is the
    ``gamma -> 0`` intercept of ``g*(gamma) = g_c + b gamma^(1/3)``.
    Exponents of ``Lambda - Gamma`` and ``xi`` against ``g_c - g`` are fitted
    at the smallest ``gamma`` on grid points with
    ``g_c - g > rounding_factor * gamma^(1/3)`` (and ``< fit_span`` if set),
    using :func:`fit_exponent` with the given ``ansatz``.
    """
    g_grid = np.asarray(sorted(float(g) for g in g_grid))
    gamma_grid = np.asarray(sorted(float(x) for x in gamma_grid))
    if g_grid.size == 0 or gamma_grid.size == 0:
        raise ValueError("g and gamma grids must be nonempty")
    if np.any(gamma_grid <= 0):
        raise ValueError("binding scan needs gamma > 0")
    if template.boundary_extent < bond:
        template = template.replace(boundary_extent=bond)
    specs = [template.replace(gamma=gm, L=template.L) for gm in gamma_grid]
    fp = frame_params(specs[0])
    lam_bulk = fp.Lambda

    jobs = [(i, j) for i in range(gamma_grid.size) for j in range(g_grid.size)]

    def run(ij):
        i, j = ij
        return _gap_and_xi(specs[i], bond, g_grid[j], True)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(run, jobs))
    else:
        out = [run(ij) for ij in jobs]
    Gam = np.empty((gamma_grid.size, g_grid.size))
    xis = np.empty_like(Gam)
    for (i, j), (gap, xi) in zip(jobs, out):
        Gam[i, j] = gap
        xis[i, j] = xi

    g_cross = np.full(gamma_grid.size, np.nan)
    for i, s in enumerate(specs):
        diff = Gam[i] - lam_bulk
        idx = np.nonzero((diff[:-1] < 0) & (diff[1:] >= 0))[0]
        if idx.size == 0:
            continue
        j = int(idx[0])
        f = lambda g, s=s: _gap_and_xi(s, bond, g, False)[0] - lam_bulk
        g_cross[i] = brentq(f, g_grid[j], g_grid[j + 1], xtol=1e-10, rtol=1e-12)

    ok = np.isfinite(g_cross)
    if ok.sum() == 0:
        raise ValueError("no Gamma = Lambda crossing inside the g grid")
    t = gamma_grid[ok] ** (1.0 / 3.0)
    if ok.sum() >= 2:
        g_c, _, g_c_err, _ = _linear_fit(t, g_cross[ok])
    else:
        g_c, g_c_err = float(g_cross[ok][0]), float("nan")

    curve = BindingCurve(g_values=g_grid, gamma_values=gamma_grid, Gamma=Gam, xi=xis, Lambda=lam_bulk,
                         g_cross=g_cross, g_c_estimate=g_c, g_c_uncertainty=g_c_err)

    window = rounding_factor * gamma_grid[0] ** (1.0 / 3.0)
    dist = g_c - g_grid
    mask = dist > window
    if fit_span is not None:
        mask &= dist < fit_span
    binding = lam_bulk - Gam[0]
    mask_e = mask & (binding > 0)
    if np.all(dist[dist > 0] <= window) and np.any(dist > 0):
        raise ValueError("every bound-side grid point lies inside the rounding window")
    need = 3 if ansatz == "corrected" else 2
    if mask_e.sum() >= need:
        curve.energy_exponent, curve.energy_exponent_err = fit_exponent(dist[mask_e], binding[mask_e], ansatz)
    mask_x = mask & np.isfinite(xis[0]) & (xis[0] > 0)
    if mask_x.sum() >= need:
        curve.xi_exponent, curve.xi_exponent_err = fit_exponent(dist[mask_x], xis[0][mask_x], ansatz)
    curve.fit_g = g_grid[mask_e]
    return curve
