"""Continuum (Airy) theory of the hermitized endpoint walk.

In the bulk the diffusion-frame operator becomes
``w d^2/dx^2 - gamma x - Lambda`` with a Dirichlet wall at ``x = 0``, whose
eigenfunctions are shifted Airy functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .airy import Z_MAX, airy_ai, airy_zero, log_airy_ai
from .chain import ChainSpec
from .hermitian import FrameParams, frame_params


@dataclass(frozen=True)
class ContinuumModel:
    """Coarse-grained parameters ``(a, w, Lambda, gamma)``.

    ``gamma`` is the per-site rate that enters the generator (the dressed
    rate when dressing is on).
    """

    a: float
    w: float
    Lambda: float
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("continuum model needs gamma > 0")
        if not self.w > 0:
            raise ValueError("continuum model needs w > 0")
        if self.a < 0:
            raise ValueError("tilt a must be non-negative")

    @classmethod
    def from_frame(cls, fp: FrameParams, gamma: float) -> "ContinuumModel":
        return cls(a=fp.a, w=fp.w, Lambda=fp.Lambda, gamma=gamma)

    @classmethod
    def from_spec(cls, spec: ChainSpec) -> "ContinuumModel":
        return cls.from_frame(frame_params(spec.with_length(2)), spec.gamma_d)

    @property
    def w_plus(self) -> float:
        return self.w * math.exp(self.a / 2)

    @property
    def w_minus(self) -> float:
        return self.w * math.exp(-self.a / 2)

    @property
    def v_B(self) -> float:
        """Endpoint drift ``w+ - w-``."""
        return self.w_plus - self.w_minus

    @property
    def D(self) -> float:
        """Endpoint diffusion constant ``(w+ + w-)/2``."""
        return 0.5 * (self.w_plus + self.w_minus)

    @property
    def energy_scale(self) -> float:
        """``(w gamma^2)^(1/3)``."""
        return (self.w * self.gamma**2) ** (1.0 / 3.0)

    @property
    def length_scale(self) -> float:
        """``(w/gamma)^(1/3)``."""
        return (self.w / self.gamma) ** (1.0 / 3.0)


def continuum_eigenvalue(model: ContinuumModel, n: int) -> float:
    """``lambda_n = Lambda - a_n (w gamma^2)^(1/3)``.

    >>> m = ContinuumModel(a=math.log(4), w=2.0, Lambda=1.0, gamma=1e-3)
    >>> round(continuum_eigenvalue(m, 1), 5)
    1.02946
    """
    return model.Lambda - airy_zero(n) * model.energy_scale


def _airy_argument(model: ContinuumModel, n: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("continuum modes are defined for x >= 0")
    shift = (continuum_eigenvalue(model, n) - model.Lambda) / model.gamma
    return (x - shift) / model.length_scale


def continuum_mode(model: ContinuumModel, n: int, x, log: bool = False):
    """Airy eigenmode ``(psi_n(x), phi_n(x))``.

    ``psi_n(x) = Ai[(gamma/w)^(1/3) (x - (lambda_n - Lambda)/gamma)]`` and
    ``phi_n = exp(a x / 2) psi_n``. Unnormalized. With ``log=True`` returns
    ``(log|psi|, log|phi|)`` instead, which stays finite where ``phi``
    overflows.
    """
    z = _airy_argument(model, n, x)
    if np.any(np.abs(z) > Z_MAX):
        raise ValueError(f"Airy argument leaves [-{Z_MAX:g}, {Z_MAX:g}]; restrict the x grid")
    xa = np.asarray(x, dtype=float)
    if log:
        lpsi = log_airy_ai(z)
        return lpsi, lpsi + 0.5 * model.a * xa
    psi = airy_ai(z)
    with np.errstate(over="ignore", invalid="ignore"):
        phi = np.where(psi == 0, 0.0, np.exp(0.5 * model.a * xa) * psi)
    return psi, phi


def wall_offset(a: float) -> float:
    """Distance between site 1's left neighbour and the effective Dirichlet zero.

    The hard wall removes the inward hop out of site 1, which in the
    hermitian frame acts like a virtual site 0 with
    ``psi(0) = exp(-a/2) psi(1)``. Extrapolating linearly, ``psi`` vanishes
    at site ``1 - 1/(1 - exp(-a/2))``, so continuum position ``x`` and
    lattice site ``k`` are related by ``x = k + wall_offset(a)``. Equals 1
    for qubit rates (``a = ln 4``).
    """
    if a <= 0:
        raise ValueError("wall offset needs a > 0")
    return 1.0 / (1.0 - math.exp(-a / 2)) - 1.0


def mode_peak(model: ContinuumModel, n: int) -> float:
    """Leading-order maximum of ``phi_n``: ``a^2 w/(4 gamma) - a_n (w/gamma)^(1/3)``.

    >>> m = ContinuumModel(a=math.log(4), w=2.0, Lambda=1.0, gamma=1e-3)
    >>> round(mode_peak(m, 1), 1)
    990.4
    """
    if model.a <= 0:
        raise ValueError("mode peak needs a biased walk (a > 0)")
    return model.a**2 * model.w / (4 * model.gamma) - airy_zero(n) * model.length_scale


@dataclass(frozen=True)
class TailPrediction:
    """Predicted ``-log psi`` far beyond the mode.

    ``discrete``: lattice law ``k (log k - log(e w/gamma))``.
    ``continuum``: hermitian-frame Airy tail ``(2/3)(gamma/w)^(1/2) x^(3/2)``.
    ``continuum_mixed``: the same minus ``a x / 2``, i.e. the Airy tail
    written with the similarity weight folded in.
    """

    x: float
    discrete: float
    continuum: float
    continuum_mixed: float


def tail_asymptote(spec: ChainSpec, x) -> TailPrediction:
    """Far-tail predictions for ``-log psi_1`` at site ``x > 10 w/gamma``.

    In the far tail ``gamma x`` dominates the diagonal, so the discrete
    eigenvector falls factorially, ``psi(k) ~ (w/gamma)^k / k!``, while the
    continuum Airy tail falls as ``exp(-(2/3) (gamma/w)^(1/2) x^(3/2))``.
    """
    gamma = spec.gamma_d
    if gamma <= 0:
        raise ValueError("tail asymptotics need gamma > 0")
    fp = frame_params(spec.with_length(2))
    x = float(x)
    if not x > 10 * fp.w / gamma:
        raise ValueError(f"x = {x:g} lies inside the mode; need x > 10 w/gamma = {10 * fp.w / gamma:g}")
    disc = x * (math.log(x) - math.log(math.e * fp.w / gamma))
    cont = 2.0 / 3.0 * math.sqrt(gamma / fp.w) * x**1.5
    return TailPrediction(x=x, discrete=disc, continuum=cont, continuum_mixed=cont - 0.5 * fp.a * x)
