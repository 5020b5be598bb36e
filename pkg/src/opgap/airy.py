"""Airy function ``Ai`` on the real line and its zeros.

Evaluation strategy by region:

* ``|z| <= 2``: Maclaurin series.
* ``2 < z <= 8`` and ``-9 <= z < -2``: one short Taylor step of the Airy
  equation ``y'' = z y`` from a table of node values. Positive nodes are
  generated by stepping *down* from ``z = 8`` (where the asymptotic series
  is good to ~1e-13); negative nodes by stepping out from ``z = -2``.
  Both directions are the numerically stable ones for ``Ai``.
* ``z > 8``: decaying asymptotic expansion; ``z < -9``: oscillatory one.

The plain Maclaurin series loses about ``exp(4/3 z^{3/2})`` relative
accuracy for positive ``z``, so it cannot cover ``[2, 8]`` to 10 digits.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

__all__ = ["airy_ai", "airy_ai_prime", "log_airy_ai", "airy_zero", "AI0", "AIP0"]

AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)

Z_MAX = 200.0
Z_SERIES = 2.0
Z_POS = 8.0
Z_NEG = -9.0
NODE_STEP = 0.25
_SQRT_PI = math.sqrt(math.pi)


def _asym_coeffs(n: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.empty(n)
    v = np.empty(n)
    u[0] = v[0] = 1.0
    for k in range(1, n):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k)
        v[k] = -u[k] * (6 * k + 1) / (6 * k - 1)
    return u, v


_U, _V = _asym_coeffs(60)


def _truncated_sum(coef: np.ndarray, zeta: np.ndarray, alternate: bool) -> np.ndarray:
    """Asymptotic sum stopped at its smallest term (per element)."""
    zeta = np.asarray(zeta, dtype=float)
    total = np.zeros_like(zeta)
    term_prev = np.full_like(zeta, np.inf)
    active = np.ones(zeta.shape, dtype=bool)
    for k in range(coef.shape[0]):
        term = coef[k] / zeta**k
        if alternate and k % 2:
            term = -term
        mag = np.abs(term)
        active &= mag < term_prev
        total = np.where(active, total + term, total)
        term_prev = np.where(active, mag, term_prev)
        if not active.any():
            break
    return total


def _asym_pos(z: np.ndarray, log: bool = False):
    """``Ai`` and ``Ai'`` for large positive ``z`` (or ``log Ai`` if asked)."""
    zeta = 2.0 / 3.0 * z**1.5
    su = _truncated_sum(_U, zeta, True)
    if log:
        return -zeta - math.log(2 * _SQRT_PI) - 0.25 * np.log(z) + np.log(su)
    sv = _truncated_sum(_V, zeta, True)
    pre = np.exp(-zeta) / (2 * _SQRT_PI)
    return pre * su / z**0.25, -pre * sv * z**0.25


def _oscillating_parts(coef: np.ndarray, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    even = coef[0::2].copy()
    odd = coef[1::2].copy()
    even[1::2] *= -1
    odd[1::2] *= -1
    # sums in powers of zeta^-2, times zeta^-1 for the odd part
    z2 = zeta * zeta
    p = _truncated_sum(even, z2, False)
    q = _truncated_sum(odd, z2, False) / zeta
    return p, q


def _asym_neg(z: np.ndarray):
    """``Ai`` and ``Ai'`` for large negative ``z``."""
    x = -z
    zeta = 2.0 / 3.0 * x**1.5
    theta = zeta - math.pi / 4
    pu, qu = _oscillating_parts(_U, zeta)
    pv, qv = _oscillating_parts(_V, zeta)
    c, s = np.cos(theta), np.sin(theta)
    ai = (c * pu + s * qu) / (_SQRT_PI * x**0.25)
    aip = x**0.25 * (s * pv - c * qv) / _SQRT_PI
    return ai, aip


def _maclaurin(z: np.ndarray):
    z = np.asarray(z, dtype=float)
    z3 = z**3
    f = np.ones_like(z)
    g = z.copy()
    fp = np.zeros_like(z)
    gp = np.ones_like(z)
    tf = np.ones_like(z)  # z^{3k} / prod
    tg = z.copy()
    tfp = np.ones_like(z)  # derivative terms, z^{3k-1} scaling
    tgp = np.ones_like(z)
    for k in range(1, 40):
        tf = tf * z3 / ((3 * k - 1) * (3 * k))
        tg = tg * z3 / ((3 * k) * (3 * k + 1))
        f += tf
        g += tg
        # d/dz of z^{3k}/P_k  = z^{3k-1} / (P_k / 3k)
        if k == 1:
            tfp = z * z / 2.0
        else:
            tfp = tfp * z3 / ((3 * k - 3) * (3 * k - 1))
        tgp = tgp * z3 / ((3 * k - 2) * (3 * k))
        fp += tfp
        gp += tgp
    return AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp


def _taylor_step(z0, y0, yp0, h, n_terms: int = 40):
    """Advance ``y'' = z y`` from ``z0`` by ``h`` with a Taylor series."""
    y = y0 + yp0 * h
    yp = yp0.copy()
    hp = np.ones_like(h)  # h^{n-1} for derivative accumulation
    hn = h.copy()  # h^n
    cs = [y0, yp0]
    for n in range(2, n_terms):
        # c_n = (z0 c_{n-2} + c_{n-3}) / (n (n-1))
        cm2 = cs[n - 2]
        cm3 = cs[n - 3] if n >= 3 else 0.0
        cn = (z0 * cm2 + cm3) / (n * (n - 1))
        cs.append(cn)
        hp = hp * h
        hn = hn * h
        y = y + cn * hn
        yp = yp + n * cn * hp
    return y, yp


@lru_cache(maxsize=1)
def _node_table():
    zs = np.round(np.arange(Z_NEG, Z_POS + NODE_STEP / 2, NODE_STEP), 12)
    ai = np.empty_like(zs)
    aip = np.empty_like(zs)
    inner = np.abs(zs) <= Z_SERIES
    ai[inner], aip[inner] = _maclaurin(zs[inner])
    # positive side: down from the asymptotic anchor
    top = np.nonzero(zs > Z_SERIES)[0]
    a_top, ap_top = _asym_pos(np.array([zs[top[-1]]]))
    ai[top[-1]], aip[top[-1]] = a_top[0], ap_top[0]
    for i in top[-2::-1]:
        y, yp = _taylor_step(np.array([zs[i + 1]]), np.array([ai[i + 1]]), np.array([aip[i + 1]]),
                             np.array([-NODE_STEP]))
        ai[i], aip[i] = y[0], yp[0]
    # negative side: outward from the series region
    neg = np.nonzero(zs < -Z_SERIES)[0]
    for i in neg[::-1]:
        y, yp = _taylor_step(np.array([zs[i + 1]]), np.array([ai[i + 1]]), np.array([aip[i + 1]]),
                             np.array([-NODE_STEP]))
        ai[i], aip[i] = y[0], yp[0]
    return zs, ai, aip


def _eval(z):
    z = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(z)) or np.any(np.abs(z) > Z_MAX):
        raise ValueError(f"Airy argument outside [-{Z_MAX:g}, {Z_MAX:g}]")
    ai = np.empty_like(z)
    aip = np.empty_like(z)
    hi = z > Z_POS
    lo = z < Z_NEG
    mid = ~(hi | lo)
    if hi.any():
        with np.errstate(under="ignore"):
            ai[hi], aip[hi] = _asym_pos(z[hi])
    if lo.any():
        ai[lo], aip[lo] = _asym_neg(z[lo])
    if mid.any():
        zs, tab, tabp = _node_table()
        zm = z[mid]
        idx = np.clip(np.rint((zm - Z_NEG) / NODE_STEP).astype(int), 0, zs.size - 1)
        h = zm - zs[idx]
        ai[mid], aip[mid] = _taylor_step(zs[idx], tab[idx], tabp[idx], h)
    return ai, aip


def airy_ai(z):
    """``Ai(z)`` for real ``|z| <= 200`` (scalar or array).

    >>> round(airy_ai(0.0), 10)
    0.3550280539
    """
    ai, _ = _eval(z)
    return float(ai) if np.ndim(z) == 0 else ai


def airy_ai_prime(z):
    """``Ai'(z)`` for real ``|z| <= 200``."""
    _, aip = _eval(z)
    return float(aip) if np.ndim(z) == 0 else aip


def log_airy_ai(z):
    """``log |Ai(z)|``; for positive ``z`` valid far past the underflow of ``Ai``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = z > Z_POS
    if big.any():
        out[big] = _asym_pos(z[big], log=True)
    if (~big).any():
        with np.errstate(divide="ignore"):
            out[~big] = np.log(np.abs(_eval(z[~big])[0]))
    return float(out) if out.ndim == 0 else out


def _zero_seed(n: int) -> float:
    t = 3.0 * math.pi * (4 * n - 1) / 8.0
    return -(t ** (2.0 / 3.0)) * (1 + 5.0 / 48 * t**-2 - 5.0 / 36 * t**-4 + 77125.0 / 82944 * t**-6)


@lru_cache(maxsize=None)
def airy_zero(n: int) -> float:
    """``n``-th zero ``a_n < 0`` of ``Ai`` (``1 <= n <= 100``).

    Bisection on a bracket around the asymptotic estimate.
    """
    if int(n) != n or not 1 <= n <= 100:
        raise ValueError(f"zero index must be an integer in [1, 100], got {n}")
    seed = _zero_seed(int(n))
    half = 0.25 * math.pi / math.sqrt(abs(seed))
    lo, hi = seed - half, seed + half
    flo, fhi = airy_ai(lo), airy_ai(hi)
    if flo * fhi > 0:
        raise RuntimeError(f"asymptotic seed failed to bracket zero {n}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = airy_ai(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
