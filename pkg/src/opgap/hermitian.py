"""Diffusion-frame similarity transform ``M~ = T^-1 M T``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec, TridiagonalOperator


@dataclass(frozen=True, eq=False)
class FrameParams:
    """Coarse-grained bulk parameters plus the per-site similarity weights.

    ``a``, ``w`` and ``Lambda`` always refer to bulk rates of the spec's
    geometry; boundary bonds only enter ``log_T``. ``T`` overflows double
    precision for ``a * x / 2 > 709``, so weights are stored as logarithms
    and ``T_diag`` is a convenience view.
    """

    a: float
    w: float
    Lambda: float
    log_T: np.ndarray

    @property
    def T_diag(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_T)

    @property
    def w_plus(self) -> float:
        return self.w * math.exp(self.a / 2)

    @property
    def w_minus(self) -> float:
        return self.w * math.exp(-self.a / 2)


def frame_params(spec: ChainSpec) -> FrameParams:
    """Tilt ``a``, symmetric rate ``w``, bulk gap ``Lambda`` and ``T``.

    >>> fp = frame_params(ChainSpec(L=4, w_plus=4.0, w_minus=1.0))
    >>> round(fp.a, 12) == round(math.log(4), 12), fp.w, fp.Lambda
    (True, 2.0, 1.0)
    """
    wp, wm = spec.bulk_rates
    fwd, bwd = spec.bond_rates()
    if np.any(fwd <= 0) or np.any(bwd <= 0):
        raise ValueError("every bond needs positive forward and backward rates")
    a = math.log(wp / wm)
    w = math.sqrt(wp * wm)
    lam = (math.sqrt(wp) - math.sqrt(wm)) ** 2
    # T(x+1)/T(x) = sqrt(fwd/bwd) bond by bond, T(1) = 1
    log_T = np.concatenate(([0.0], np.cumsum(0.5 * (np.log(fwd) - np.log(bwd)))))
    return FrameParams(a=a, w=w, Lambda=lam, log_T=log_T)


def hermitize(op: TridiagonalOperator, fp: FrameParams | None = None) -> TridiagonalOperator:
    """Symmetrize a detailed-balance tridiagonal operator.

    Off-diagonals become ``sqrt(fwd * bwd)`` per bond; the diagonal is
    unchanged. ``fp`` is only used to check the length.
    """
    if op.frame != "original":
        raise ValueError("operator is already in the hermitian frame")
    if fp is not None and fp.log_T.shape[0] != len(op):
        raise ValueError("frame parameters and operator have different lengths")
    if np.any(op.sub * op.sup < 0):
        raise ValueError("bond rates of opposite sign cannot be symmetrized")
    off = np.sqrt(op.sub * op.sup)
    return TridiagonalOperator(sub=off, diag=op.diag, sup=off.copy(), frame="hermitian", time_kind=op.time_kind)


def to_original_frame(vec: np.ndarray, fp: FrameParams, normalize: bool = False) -> np.ndarray:
    """``phi(x) = T(x) psi(x)``.

    With ``normalize=True`` the product is formed in log space and scaled so
    that ``max |phi| = 1``, which stays finite where ``T`` alone would
    overflow. ``vec`` may be a vector or an ``(L, k)`` stack of columns.
    """
    v = np.asarray(vec, dtype=float)
    if v.shape[0] != fp.log_T.shape[0]:
        raise ValueError(f"vector has length {v.shape[0]}, expected {fp.log_T.shape[0]}")
    logT = fp.log_T.reshape((-1,) + (1,) * (v.ndim - 1))
    if not normalize:
        if fp.log_T[-1] < 700 and fp.log_T.min() > -700:
            return np.exp(logT) * v
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return np.where(v == 0, 0.0, np.sign(v) * np.exp(logT + np.log(np.abs(v))))
    with np.errstate(divide="ignore"):
        logmag = logT + np.log(np.abs(v))
    peak = np.max(logmag, axis=0, keepdims=True)
    return np.sign(v) * np.exp(logmag - peak)


def to_hermitian_frame(vec: np.ndarray, fp: FrameParams) -> np.ndarray:
    """Inverse of :func:`to_original_frame`: ``psi(x) = phi(x) / T(x)``."""
    v = np.asarray(vec, dtype=float)
    if v.shape[0] != fp.log_T.shape[0]:
        raise ValueError(f"vector has length {v.shape[0]}, expected {fp.log_T.shape[0]}")
    logT = fp.log_T.reshape((-1,) + (1,) * (v.ndim - 1))
    with np.errstate(under="ignore"):
        return np.exp(-logT) * v
