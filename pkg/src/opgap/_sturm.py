"""Compiled kernels: Sturm counts, bisection, tridiagonal LU, inverse iteration.

All routines act on a symmetric tridiagonal ``A`` given by its diagonal
``d`` and off-diagonal ``e`` and look for its *smallest* eigenvalues.
"""
from __future__ import annotations

import numpy as np
from numba import njit

EPS = np.finfo(np.float64).eps


@njit(cache=True, nogil=True)
def sturm_count(d, e2, mu, pivmin):
    """Number of eigenvalues of ``A`` strictly below ``mu``."""
    n = d.shape[0]
    count = 0
    q = d[0] - mu
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0:
        count += 1
    for i in range(1, n):
        q = d[i] - mu - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0:
            count += 1
    return count


@njit(cache=True, nogil=True)
def gershgorin(d, e):
    n = d.shape[0]
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        r = 0.0
        if i > 0:
            r += abs(e[i - 1])
        if i < n - 1:
            r += abs(e[i])
        lo = min(lo, d[i] - r)
        hi = max(hi, d[i] + r)
    return lo, hi


@njit(cache=True, nogil=True)
def bisect_smallest(d, e, k, max_iter):
    """The ``k`` smallest eigenvalues by Sturm bisection.

    Returns the eigenvalues, the final bracket widths and the number of
    bisection steps used for each.
    """
    n = d.shape[0]
    e2 = e * e
    lo0, hi0 = gershgorin(d, e)
    span = max(abs(lo0), abs(hi0))
    pivmin = max(1e-300, EPS * EPS * max(1.0, e2.max() if n > 1 else 1.0))
    vals = np.empty(k)
    widths = np.empty(k)
    steps = np.empty(k, dtype=np.int64)
    lower = lo0 - EPS * span
    for j in range(k):
        lo = lower
        hi = hi0 + EPS * span
        it = 0
        while it < max_iter:
            mid = 0.5 * (lo + hi)
            tol = 2.0 * EPS * max(abs(lo), abs(hi)) + 1e-300
            if hi - lo <= tol or mid <= lo or mid >= hi:
                break
            if sturm_count(d, e2, mid, pivmin) > j:
                hi = mid
            else:
                lo = mid
            it += 1
        vals[j] = 0.5 * (lo + hi)
        widths[j] = hi - lo
        steps[j] = it
        lower = lo
    return vals, widths, steps


@njit(cache=True, nogil=True)
def _lu_factor(dl, d, du, tiny):
    """Partial-pivoting LU of a general tridiagonal matrix (in place).

    Pivots smaller than ``tiny`` in magnitude are replaced by ``+-tiny``.
    """
    n = d.shape[0]
    du2 = np.zeros(max(n - 2, 0))
    swap = np.zeros(max(n - 1, 0), dtype=np.bool_)
    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            if abs(d[i]) < tiny:
                d[i] = tiny if d[i] >= 0 else -tiny
            fact = dl[i] / d[i]
            dl[i] = fact
            d[i + 1] -= fact * du[i]
        else:
            fact = d[i] / dl[i]
            d[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = d[i + 1]
            d[i + 1] = temp - fact * d[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            swap[i] = True
    if abs(d[n - 1]) < tiny:
        d[n - 1] = tiny if d[n - 1] >= 0 else -tiny
    return du2, swap


@njit(cache=True, nogil=True)
def _lu_solve(dl, d, du, du2, swap, b):
    n = d.shape[0]
    for i in range(n - 1):
        if swap[i]:
            temp = b[i]
            b[i] = b[i + 1]
            b[i + 1] = temp - dl[i] * b[i]
        else:
            b[i + 1] -= dl[i] * b[i]
    b[n - 1] /= d[n - 1]
    if n > 1:
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i]


@njit(cache=True, nogil=True)
def solve_tridiagonal(sub, diag, sup, rhs):
    """Solve a general tridiagonal system with partial pivoting."""
    dl = sub.copy()
    d = diag.copy()
    du = sup.copy()
    du2, swap = _lu_factor(dl, d, du, 1e-300)
    b = rhs.copy()
    _lu_solve(dl, d, du, du2, swap, b)
    return b


@njit(cache=True, nogil=True)
def inverse_iteration(d, e, vals, start, n_iter, cluster_tol):
    """Eigenvectors for eigenvalues ``vals`` of ``A`` (columns, unit norm).

    Vectors whose eigenvalues lie within ``cluster_tol`` of an earlier one
    are re-orthogonalized against it on every sweep.
    """
    n = d.shape[0]
    k = vals.shape[0]
    vecs = np.zeros((n, k))
    span = max(np.abs(d).max(), 1.0)
    for j in range(k):
        shift = vals[j]
        dl = e.copy()
        dd = d - shift
        du = e.copy()
        du2, swap = _lu_factor(dl, dd, du, EPS * span)
        x = start.copy()
        for _ in range(n_iter):
            for m in range(j):
                if abs(vals[m] - vals[j]) < cluster_tol * span:
                    c = 0.0
                    for i in range(n):
                        c += vecs[i, m] * x[i]
                    for i in range(n):
                        x[i] -= c * vecs[i, m]
            _lu_solve(dl, dd, du, du2, swap, x)
            nrm = np.sqrt(np.sum(x * x))
            x /= nrm
        # deterministic sign: first nonzero entry positive
        for i in range(n):
            if x[i] != 0.0:
                if x[i] < 0:
                    x = -x
                break
        vecs[:, j] = x
    return vecs


@njit(cache=True, nogil=True)
def backward_log_ratios(d, e, lam):
    """``log|psi[i+1]/psi[i]|`` and signs from the far end inward.

    Solves ``(A - lam) psi = 0`` for the solution that is minimal at the
    far wall by the continued fraction
    ``rho_i = -e_{i-1} / (d_i - lam + e_i rho_{i+1})``, stable wherever the
    eigenvector decays outward. Entry ``i`` of the result refers to the
    ratio ``psi[i+1] / psi[i]``.
    """
    n = d.shape[0]
    logr = np.zeros(n - 1)
    sgn = np.ones(n - 1)
    rho = 0.0  # psi[n] / psi[n-1] beyond the wall
    for i in range(n - 1, 0, -1):
        denom = d[i] - lam + e[i] * rho if i < n - 1 else d[i] - lam
        if denom == 0.0:
            denom = 1e-300
        rho = -e[i - 1] / denom
        logr[i - 1] = np.log(abs(rho)) if rho != 0.0 else -np.inf
        sgn[i - 1] = 1.0 if rho >= 0 else -1.0
    return logr, sgn
