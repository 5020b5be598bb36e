"""Endpoint Markov chain: parameters and generator construction.

The right endpoint of a growing operator performs a biased walk on sites
``x = 1..L`` with hopping rates ``w_plus`` (outward) and ``w_minus``
(inward), and the weight on each length ``x`` decays at ``gamma_d * x``.
Sites are 1-indexed in the public API; arrays are 0-indexed internally, so
site ``x`` lives at index ``x - 1`` and bond ``(x, x+1)`` at index ``x - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

GEOMETRIES = ("edge", "relative", "com")
FRAMES = ("original", "hermitian")
TIME_KINDS = ("continuous-generator", "discrete-step")

# magnitude of the first Airy zero; only used for auto-sizing
_AIRY_A1 = 2.338107410459767
MIN_AUTO_LENGTH = 64


class ChainSpecError(ValueError):
    """Invalid chain parameters."""


@dataclass(frozen=True)
class ChainSpec:
    """Full parameterization of the endpoint chain.

    Parameters
    ----------
    L : int or None
        Number of sites. ``None`` picks a length from :func:`auto_length`
        (requires ``gamma > 0``).
    w_plus, w_minus : float
        Outward / inward hopping rates per unit time.
    gamma : float
        Bare dissipation rate per site.
    use_dressed_rate : bool
        If set, the per-site rate is ``(1 - 1/q**2) * gamma``.
    q : int
        On-site dimension, used only when dressing.
    boundary_extent : int
        Size ``x0`` of the small-operator region where bond factors apply.
    bond_overrides : mapping
        ``{x: g}`` multiplies both rates on bond ``(x, x+1)`` by ``g``;
        requires ``x <= boundary_extent``.
    far_boundary : {'reflecting', 'absorbing'}
        Wall at ``x = L``. ``reflecting`` (default) conserves weight;
        ``absorbing`` keeps the bulk outward rate as a loss, which removes
        the wall-bound mode (decay ~ ``gamma L``) and lets hermitian-frame
        low-mode work use ``L`` far below the original-frame mode scale.
    geometry : {'edge', 'relative', 'com'}
        ``edge``: one endpoint pinned at the wall. ``relative``: operator
        size with two independent endpoints (rates doubled). ``com``:
        unbiased centre-of-mass walk on the doubled lattice ``2Y``, hopping
        rate ``w_plus == w_minus`` per direction, no dissipation.
    """

    L: int | None
    w_plus: float
    w_minus: float
    gamma: float = 0.0
    use_dressed_rate: bool = False
    q: int = 2
    boundary_extent: int = 0
    bond_overrides: Mapping[int, float] = field(default_factory=dict)
    geometry: str = "edge"
    far_boundary: str = "reflecting"

    def __post_init__(self):
        items = tuple(sorted((int(k), float(v)) for k, v in dict(self.bond_overrides).items()))
        object.__setattr__(self, "bond_overrides", items)
        if self.geometry not in GEOMETRIES:
            raise ChainSpecError(f"unknown geometry {self.geometry!r}; expected one of {GEOMETRIES}")
        if self.far_boundary not in ("reflecting", "absorbing"):
            raise ChainSpecError(f"far_boundary must be 'reflecting' or 'absorbing', got {self.far_boundary!r}")
        if not (self.w_plus > 0 and self.w_minus > 0):
            raise ChainSpecError("hopping rates must be positive")
        if not self.gamma >= 0:
            raise ChainSpecError("gamma must be non-negative")
        if int(self.q) != self.q or self.q < 2:
            raise ChainSpecError("q must be an integer >= 2")
        if self.boundary_extent < 0 or int(self.boundary_extent) != self.boundary_extent:
            raise ChainSpecError("boundary_extent must be a non-negative integer")
        if self.geometry == "com":
            if self.w_plus != self.w_minus:
                raise ChainSpecError("com geometry is unbiased: w_plus must equal w_minus")
        elif not self.w_plus > self.w_minus:
            raise ChainSpecError("edge/relative geometry requires w_plus > w_minus")
        for x, g in items:
            if x < 1 or x > self.boundary_extent:
                raise ChainSpecError(
                    f"bond override ({x}, {x + 1}) lies outside the boundary region x <= {self.boundary_extent}"
                )
            if not g > 0:
                raise ChainSpecError(f"bond factor on ({x}, {x + 1}) must be positive, got {g}")
        if self.L is None:
            if self.gamma <= 0:
                raise ChainSpecError("L may only be omitted when gamma > 0")
        else:
            if int(self.L) != self.L or self.L < 2:
                raise ChainSpecError("L must be an integer >= 2")
            if items and items[-1][0] >= self.L:
                raise ChainSpecError("bond override beyond the last site")

    @property
    def overrides(self) -> dict[int, float]:
        return dict(self.bond_overrides)

    @property
    def gamma_d(self) -> float:
        """Per-site dissipation rate actually entering the generator."""
        if self.geometry == "com":
            return 0.0
        if self.use_dressed_rate:
            return (1.0 - 1.0 / self.q**2) * self.gamma
        return float(self.gamma)

    @property
    def bulk_rates(self) -> tuple[float, float]:
        """Bulk (forward, backward) rates of this geometry."""
        if self.geometry == "relative":
            return 2.0 * self.w_plus, 2.0 * self.w_minus
        return float(self.w_plus), float(self.w_minus)

    @property
    def n_sites(self) -> int:
        if self.L is not None:
            return int(self.L)
        wp, wm = self.bulk_rates
        return auto_length(wp, wm, self.gamma_d, self.boundary_extent)

    def with_length(self, L: int | None) -> "ChainSpec":
        return replace(self, L=L, bond_overrides=self.overrides)

    def replace(self, **changes) -> "ChainSpec":
        changes.setdefault("bond_overrides", self.overrides)
        return replace(self, **changes)

    def bond_rates(self) -> tuple[np.ndarray, np.ndarray]:
        """Forward and backward rate on every bond ``(x, x+1)``, ``x = 1..L-1``."""
        n = self.n_sites
        wp, wm = self.bulk_rates
        fwd = np.full(n - 1, wp)
        bwd = np.full(n - 1, wm)
        for x, g in self.bond_overrides:
            fwd[x - 1] *= g
            bwd[x - 1] *= g
        return fwd, bwd


def auto_length(w_plus: float, w_minus: float, gamma: float, boundary_extent: int = 0) -> int:
    """Lattice size large enough that truncation is invisible to low modes.

    ``max(20 w/gamma, x_peak + 10 (w/gamma)**(1/3))`` with ``w`` the
    symmetrized rate and ``x_peak`` the leading-mode peak of the
    original-frame profile.
    """
    if gamma <= 0:
        raise ChainSpecError("auto-sizing needs gamma > 0")
    w = math.sqrt(w_plus * w_minus)
    a = math.log(w_plus / w_minus)
    scale = (w / gamma) ** (1.0 / 3.0)
    x_peak = a * a * w / (4.0 * gamma) + _AIRY_A1 * scale
    n = max(20.0 * w / gamma, x_peak + 10.0 * scale, 4.0 * boundary_extent + 10.0 * scale)
    return max(int(math.ceil(n)), MIN_AUTO_LENGTH)


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Real tridiagonal matrix ``A[i+1, i] = sub[i]``, ``A[i, i+1] = sup[i]``."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    frame: str = "original"
    time_kind: str = "continuous-generator"

    def __post_init__(self):
        for name in ("sub", "diag", "sup"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.diag.shape[0]
        if self.sub.shape != (n - 1,) or self.sup.shape != (n - 1,):
            raise ValueError("sub/sup must have length len(diag) - 1")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.time_kind not in TIME_KINDS:
            raise ValueError(f"unknown time kind {self.time_kind!r}")
        if self.frame == "hermitian" and not np.array_equal(self.sub, self.sup):
            raise ValueError("hermitian-frame operator must have sub == sup")

    def __len__(self) -> int:
        return self.diag.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.sub, self.sup))

    def to_dense(self) -> np.ndarray:
        n = len(self)
        a = np.diag(self.diag)
        idx = np.arange(n - 1)
        a[idx + 1, idx] = self.sub
        a[idx, idx + 1] = self.sup
        return a

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """``A @ v`` for a vector or a stack of column vectors."""
        v = np.asarray(v, dtype=float)
        out = self.diag.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        sub = self.sub.reshape((-1,) + (1,) * (v.ndim - 1))
        sup = self.sup.reshape((-1,) + (1,) * (v.ndim - 1))
        out[1:] += sub * v[:-1]
        out[:-1] += sup * v[1:]
        return out

    def column_sums(self) -> np.ndarray:
        """Per-column sums, compensated so that rounding happens once."""
        fwd = np.zeros(len(self))
        bwd = np.zeros(len(self))
        fwd[:-1] = self.sub
        bwd[1:] = self.sup
        return _sum3(self.diag, fwd, bwd)

    def norm_bound(self) -> float:
        """Gershgorin bound on the spectral radius (cheap ``||A||`` proxy)."""
        r = np.abs(self.diag).copy()
        r[:-1] += np.abs(self.sup)
        r[1:] += np.abs(self.sub)
        return float(r.max())


def _outflow(fwd: np.ndarray, bwd: np.ndarray) -> np.ndarray:
    out = np.zeros(fwd.shape[0] + 1)
    out[:-1] += fwd
    out[1:] += bwd
    return out


def build_generator(spec: ChainSpec) -> TridiagonalOperator:
    """Continuous-time generator ``dn/dt = M n`` in the original frame.

    Hard walls at both ends: no inward hop out of ``x = 1``, no outward hop
    out of ``x = L``. The diagonal carries the total hop outflow plus the
    dissipation ``gamma_d * x``.

    Examples
    --------
    >>> op = build_generator(ChainSpec(L=3, w_plus=2.0, w_minus=1.0))
    >>> op.diag.tolist(), op.sub.tolist(), op.sup.tolist()
    ([-2.0, -3.0, -1.0], [2.0, 2.0], [1.0, 1.0])
    """
    fwd, bwd = spec.bond_rates()
    x = np.arange(1, spec.n_sites + 1, dtype=float)
    diag = -_outflow(fwd, bwd) - spec.gamma_d * x
    if spec.far_boundary == "absorbing":
        diag[-1] -= spec.bulk_rates[0]
    return TridiagonalOperator(sub=fwd, diag=diag, sup=bwd)


def build_discrete_step(spec: ChainSpec) -> TridiagonalOperator:
    """One-step update ``n_{t+1} = P n_t`` with rates read per unit step."""
    gen = build_generator(spec)
    diag = 1.0 + gen.diag
    if np.any(diag < 0):
        bad = int(np.argmax(diag < 0)) + 1
        raise ChainSpecError(
            f"rates too large for a discrete step: stay probability at x={bad} is {diag[bad - 1]:.6g} < 0"
        )
    if spec.gamma_d == 0:
        diag = _exact_stochastic_diag(diag, np.asarray(gen.sub), np.asarray(gen.sup))
    return TridiagonalOperator(sub=gen.sub, diag=diag, sup=gen.sup, time_kind="discrete-step")


def _two_sum(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _sum3(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``a + b + c`` with error-free transformations (TwoSum)."""
    s1, e1 = _two_sum(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    s2, e2 = _two_sum(s1, np.asarray(c, dtype=float))
    return s2 + (e1 + e2)


def _exact_stochastic_diag(diag: np.ndarray, sub: np.ndarray, sup: np.ndarray) -> np.ndarray:
    # stay probabilities within a few ulps of 1 - out whose compensated
    # column sum is exactly 1
    n = diag.size
    fwd = np.zeros(n)
    bwd = np.zeros(n)
    fwd[:-1] = sub
    bwd[1:] = sup
    out = diag.copy()
    todo = _sum3(out, fwd, bwd) != 1.0
    for k in range(1, 9):
        for direction in (np.inf, -np.inf):
            if not todo.any():
                return out
            idx = np.nonzero(todo)[0]
            d = diag[idx]
            for _ in range(k):
                d = np.nextafter(d, direction)
            hit = _sum3(d, fwd[idx], bwd[idx]) == 1.0
            out[idx[hit]] = d[hit]
            todo[idx[hit]] = False
    return out
