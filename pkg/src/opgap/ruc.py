"""Endpoint rates from random-unitary-circuit microscopics and Monte-Carlo checks.

A Haar two-site gate acting on a string endpoint leaves the forward site
as the identity with probability ``p = 1/(q^2 + 1)``. With gates arriving
at rate ``r`` on every bond, each endpoint sees two gate placements:

* the *expanding* gate on the bond ahead of it, which moves it outward with
  probability ``1 - p`` (otherwise it stays), and
* the *contracting* gate on the bond behind it, which moves it inward with
  probability ``p`` (the endpoint site itself becomes the identity).

Endpoints sit on lattice sites and gates on bonds. For a two-endpoint
string this gives four gate configurations, each arriving at rate ``r``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec

GEOMETRIES = ("edge", "relative", "com")
# order used for configuration counts
CONFIGURATIONS = ("left_expand", "left_contract", "right_expand", "right_contract")
MIN_ORACLE_SAMPLES = 10_000
BLOCK = 1000


@dataclass(frozen=True)
class RucParams:
    """Endpoint-walk parameters of a continuous-time Haar brickwork circuit.

    Parameters
    ----------
    q : int
        On-site dimension.
    r : float
        Gate arrival rate per bond.
    geometry : {'edge', 'relative', 'com'}
        ``edge``: one endpoint pinned at a wall. ``relative``: the size of
        a bulk string (both endpoints move, rates doubled). ``com``: the
        centre of mass on the doubled lattice ``2Y``, unbiased hops at
        rate ``r`` each way.
    """

    q: int
    r: float = 1.0
    geometry: str = "edge"

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"q must be an integer >= 2, got {self.q}")
        if not self.r > 0:
            raise ValueError(f"gate rate r must be positive, got {self.r}")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}")

    @property
    def p(self) -> float:
        """Probability that the forward site is left as the identity."""
        return 1.0 / (self.q**2 + 1)

    @property
    def _factor(self) -> float:
        return 2.0 if self.geometry == "relative" else 1.0

    @property
    def w_plus(self) -> float:
        if self.geometry == "com":
            return float(self.r)
        return self._factor * self.r * self.q**2 / (self.q**2 + 1)

    @property
    def w_minus(self) -> float:
        if self.geometry == "com":
            return float(self.r)
        return self._factor * self.r / (self.q**2 + 1)

    @property
    def a(self) -> float:
        return 0.0 if self.geometry == "com" else 2.0 * math.log(self.q)

    @property
    def w(self) -> float:
        return math.sqrt(self.w_plus * self.w_minus)

    @property
    def Lambda(self) -> float:
        if self.geometry == "com":
            return 0.0
        return self._factor * self.r * (self.q - 1) ** 2 / (self.q**2 + 1)

    @property
    def gamma_dressing(self) -> float:
        """``gamma_d / gamma = 1 - 1/q^2``."""
        return 1.0 - 1.0 / self.q**2

    @property
    def D_com(self) -> float:
        """Centre-of-mass diffusion constant in lattice units."""
        return self.r / 4.0

    def chain_spec(self, L: int | None = None, gamma: float = 0.0, **kwargs) -> ChainSpec:
        """Matching :class:`ChainSpec`; dissipation is dressed with this ``q``.

        For ``com`` the spec has ``geometry='com'`` on the doubled lattice.
        """
        if self.geometry == "com":
            return ChainSpec(L=L, w_plus=self.r, w_minus=self.r, geometry="com", q=self.q, **kwargs)
        # relative rates are doubled by the spec itself
        base = RucParams(self.q, self.r, "edge")
        return ChainSpec(L=L, w_plus=base.w_plus, w_minus=base.w_minus, gamma=gamma, use_dressed_rate=True,
                         q=self.q, geometry=self.geometry, **kwargs)


def ruc_params(q: int, r: float = 1.0, geometry: str = "edge") -> RucParams:
    """Derived endpoint rates for a Haar circuit.

    >>> pr = ruc_params(2, 1.0)
    >>> pr.p, round(pr.w_plus, 12), round(pr.w_minus, 12), round(pr.Lambda, 12)
    (0.2, 0.8, 0.2, 0.2)
    """
    return RucParams(q=q, r=r, geometry=geometry)


def haar_gate_sample(q: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random unitary on two ``q``-dimensional sites.

    QR of a complex Ginibre matrix with the phases of ``diag(R)`` divided
    out. With ``size`` a stack of shape ``(size, q^2, q^2)`` is returned.
    """
    d = q * q
    shape = (d, d) if size is None else (size, d, d)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    qm, rm = np.linalg.qr(z)
    diag = np.diagonal(rm, axis1=-2, axis2=-1)
    return qm * (diag / np.abs(diag))[..., None, :]


def clock_shift_basis(q: int) -> np.ndarray:
    """Generalized Paulis ``X^j Z^k``, index ``j*q + k``; entry 0 is the identity."""
    omega = np.exp(2j * np.pi / q)
    X = np.roll(np.eye(q), 1, axis=0)
    Z = np.diag(omega ** np.arange(q))
    out = np.empty((q * q, q, q), dtype=complex)
    for j in range(q):
        for k in range(q):
            out[j * q + k] = np.linalg.matrix_power(X, j) @ np.linalg.matrix_power(Z, k)
    return out


@dataclass(frozen=True)
class GateOracleReport:
    samples: int
    p_hat: float
    std_err: float
    q: int
    seed: int

    @property
    def p_exact(self) -> float:
        return 1.0 / (self.q**2 + 1)

    @property
    def z_score(self) -> float:
        return (self.p_hat - self.p_exact) / self.std_err


def _identity_forward_weights(q: int, n: int, rng: np.random.Generator, basis: np.ndarray) -> np.ndarray:
    """Identity-forward weight of ``U O U^dag`` for ``n`` random inputs."""
    # back site non-identity: index 1..q^2-1; forward site any
    back = rng.integers(1, q * q, size=n)
    fwd = rng.integers(0, q * q, size=n)
    U = haar_gate_sample(q, rng, size=n)
    O = np.einsum("nab,ncd->nacbd", basis[back], basis[fwd]).reshape(n, q * q, q * q)
    Op = U @ O @ np.conj(np.swapaxes(U, -1, -2))
    # partial trace over the forward (second) factor
    B = np.einsum("nijkj->nik", Op.reshape(n, q, q, q, q))
    # Tr(O'^dag O') = q^2, so the identity-forward weight is Tr(B^dag B)/q^3
    return np.sum(np.abs(B) ** 2, axis=(1, 2)) / q**3


def endpoint_transition_estimate(q: int, samples: int, seed: int, threads: int = 1) -> GateOracleReport:
    """Monte-Carlo estimate of the identity-forward probability ``p``.

    Each sample draws a random generalized-Pauli string on the two gate
    sites with a non-identity back site, conjugates it by a Haar gate and
    records the squared-coefficient weight on strings that are the identity
    on the forward site. Samples are drawn in blocks of 1000 whose streams
    are seeded by ``(seed, block index)``, so the result does not depend on
    ``threads``.
    """
    if samples < MIN_ORACLE_SAMPLES:
        raise ValueError(f"need at least {MIN_ORACLE_SAMPLES} samples, got {samples}")
    basis = clock_shift_basis(q)
    n_blocks = -(-samples // BLOCK)

    def block(b: int) -> np.ndarray:
        n = min(BLOCK, samples - b * BLOCK)
        return _identity_forward_weights(q, n, np.random.default_rng([seed, b]), basis)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, range(n_blocks)))
    else:
        parts = [block(b) for b in range(n_blocks)]
    vals = np.concatenate(parts)
    p_hat = float(vals.mean())
    return GateOracleReport(samples=samples, p_hat=p_hat, std_err=math.sqrt(p_hat * (1 - p_hat) / samples),
                            q=q, seed=seed)


@dataclass(frozen=True)
class ComDiffusionReport:
    """Centre-of-mass spreading of two free endpoints."""

    r: float
    horizon: float
    walkers: int
    D_hat: float
    D_err: float
    mean_Y: float
    mean_Y_err: float
    seed: int

    @property
    def D_exact(self) -> float:
        return self.r / 4.0


def _gate_outcomes(pr: RucParams, horizon: float, n: int, rng: np.random.Generator):
    """Per-walker configuration counts and endpoint displacements.

    Gate arrivals per configuration are Poisson(``r t``); their outcomes
    are binomial thinnings, which samples the jump process exactly.
    """
    counts = rng.poisson(pr.r * horizon, size=(n, 4))
    moves = np.empty_like(counts)
    moves[:, 0] = rng.binomial(counts[:, 0], 1 - pr.p)  # left endpoint steps out (-1)
    moves[:, 1] = rng.binomial(counts[:, 1], pr.p)  # left endpoint steps in (+1)
    moves[:, 2] = rng.binomial(counts[:, 2], 1 - pr.p)  # right endpoint steps out (+1)
    moves[:, 3] = rng.binomial(counts[:, 3], pr.p)  # right endpoint steps in (-1)
    d_left = moves[:, 1] - moves[:, 0]
    d_right = moves[:, 2] - moves[:, 3]
    return counts, d_left, d_right


def com_diffusion_check(r: float, horizon: float, walkers: int, seed: int, q: int = 2) -> ComDiffusionReport:
    """Estimate ``D_COM`` from ``Var(Y)/(2 t)`` for free endpoint pairs.

    ``Y = (x_L + x_R)/2`` moves by ``+-1/2`` at rate ``r`` each way, so the
    exact value is ``r/4`` for every ``q``. The error bar comes from the
    sample fourth moment.
    """
    if walkers < MIN_ORACLE_SAMPLES:
        raise ValueError(f"need at least {MIN_ORACLE_SAMPLES} walkers, got {walkers}")
    if r * horizon < 10:
        raise ValueError(f"horizon too short: r*t = {r * horizon:g} < 10")
    pr = RucParams(q=q, r=r, geometry="edge")
    parts = []
    for b in range(-(-walkers // BLOCK)):
        n = min(BLOCK, walkers - b * BLOCK)
        _, dl, dr = _gate_outcomes(pr, horizon, n, np.random.default_rng([seed, b]))
        parts.append(0.5 * (dl + dr))
    Y = np.concatenate(parts).astype(float)
    m = Y.mean()
    c = Y - m
    var = float(np.mean(c * c)) * walkers / (walkers - 1)
    m4 = float(np.mean(c**4))
    var_err = math.sqrt(max(m4 - var * var, 0.0) / walkers)
    return ComDiffusionReport(r=r, horizon=horizon, walkers=walkers, D_hat=var / (2 * horizon),
                              D_err=var_err / (2 * horizon), mean_Y=float(m),
                              mean_Y_err=math.sqrt(var / walkers), seed=seed)


@dataclass(frozen=True)
class GateConfigurationCounts:
    """Gate arrivals per configuration, in :data:`CONFIGURATIONS` order."""

    counts: np.ndarray
    horizon: float
    walkers: int
    r: float
    outward_right: int
    inward_right: int

    def rates(self) -> np.ndarray:
        return self.counts / (self.horizon * self.walkers)


def sample_gate_configurations(pr: RucParams, horizon: float, walkers: int, seed: int) -> GateConfigurationCounts:
    """Event-driven simulation of a free endpoint pair under the circuit.

    Events arrive at total rate ``4 r``; each picks one of the four
    configurations uniformly, then applies the gate outcome. Returns the
    arrival counts and the realized right-endpoint moves, whose rates
    should be ``w_plus`` and ``w_minus`` of the edge walk.
    """
    counts = np.zeros(4, dtype=np.int64)
    out_r = in_r = 0
    for i in range(walkers):
        rng = np.random.default_rng([seed, i])
        n_events = rng.poisson(4 * pr.r * horizon)
        cfg = rng.integers(0, 4, size=n_events)
        hit = rng.random(n_events)
        counts += np.bincount(cfg, minlength=4)
        out_r += int(np.sum((cfg == 2) & (hit < 1 - pr.p)))
        in_r += int(np.sum((cfg == 3) & (hit < pr.p)))
    return GateConfigurationCounts(counts=counts, horizon=horizon, walkers=walkers, r=pr.r,
                                   outward_right=out_r, inward_right=in_r)


def single_site_average_decay(q: int, gamma: float = 1.0) -> float:
    """Mean decay rate of a random single-site operator under depolarization.

    The adjoint channel ``L(O) = gamma (Tr(O) I/q - O)`` leaves the
    identity alone and damps every traceless Pauli at ``gamma``; averaged
    over all ``q^2`` basis operators this gives ``(1 - 1/q^2) gamma``.
    """
    basis = clock_shift_basis(q)
    eye = np.eye(q)
    rates = []
    for P in basis:
        LP = gamma * (np.trace(P) * eye / q - P)
        rates.append(-np.real(np.trace(P.conj().T @ LP)) / np.real(np.trace(P.conj().T @ P)))
    return float(np.mean(rates))
