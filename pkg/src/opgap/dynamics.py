"""Time evolution of endpoint weights, the return-probability autocorrelation,
and Monte-Carlo endpoint trajectories with survival weights."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import eigh_tridiagonal

from .chain import ChainSpec, TridiagonalOperator, build_generator
from .hermitian import frame_params, hermitize
from .spectral import low_spectrum, stable_log_modes

SPECTRAL_MAX_SITES = 3000
# eigenvector roundoff ~eps is amplified by exp(max log T - min log T) when
# conjugating back, so the dense backend is only used for a modest spread
SPECTRAL_MAX_LOG_SPAN = 20.0


@dataclass(frozen=True, eq=False)
class DistributionTrajectory:
    """Weights ``n(x, t)``; row ``j`` of ``distributions`` is time ``times[j]``."""

    times: np.ndarray
    distributions: np.ndarray
    method: str

    def total_weight(self) -> np.ndarray:
        return self.distributions.sum(axis=1)

    def mean_position(self) -> np.ndarray:
        """Weight-averaged site (1-based) at each time."""
        x = np.arange(1, self.distributions.shape[1] + 1)
        return self.distributions @ x / self.total_weight()


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("time grid is empty")
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be non-negative and strictly ascending")
    return t


def _log_T(op: TridiagonalOperator) -> np.ndarray:
    if np.any(op.sub <= 0) or np.any(op.sup <= 0):
        raise ValueError("spectral backend needs positive hopping rates")
    return np.concatenate(([0.0], np.cumsum(0.5 * (np.log(op.sub) - np.log(op.sup)))))


def _evolve_spectral(op: TridiagonalOperator, n0: np.ndarray, times: np.ndarray) -> np.ndarray:
    logT = _log_T(op)
    if np.ptp(logT) > SPECTRAL_MAX_LOG_SPAN:
        raise ValueError(
            f"similarity weights span exp({np.ptp(logT):.1f}); the spectral backend would lose all accuracy, "
            "use method='stepping'"
        )
    off = np.sqrt(op.sub * op.sup)
    lam, V = eigh_tridiagonal(op.diag, off)
    # n(t) = T V exp(lam t) V^T T^-1 n0
    c = V.T @ (np.exp(-logT) * n0)
    out = (V * np.exp(logT)[:, None]) @ (np.exp(np.outer(lam, times)) * c[:, None])
    return out.T


@njit(cache=True, nogil=True)
def _rk4(sub, diag, sup, n0, times, dt_max):
    n = n0.shape[0]
    out = np.empty((times.shape[0], n))
    y = n0.copy()
    t = 0.0
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)

    def apply(v, res):
        for i in range(n):
            res[i] = diag[i] * v[i]
        for i in range(n - 1):
            res[i + 1] += sub[i] * v[i]
            res[i] += sup[i] * v[i + 1]

    for j in range(times.shape[0]):
        span = times[j] - t
        steps = int(np.ceil(span / dt_max)) if span > 0 else 0
        h = span / steps if steps > 0 else 0.0
        for _ in range(steps):
            apply(y, k1)
            for i in range(n):
                tmp[i] = y[i] + 0.5 * h * k1[i]
            apply(tmp, k2)
            for i in range(n):
                tmp[i] = y[i] + 0.5 * h * k2[i]
            apply(tmp, k3)
            for i in range(n):
                tmp[i] = y[i] + h * k3[i]
            apply(tmp, k4)
            for i in range(n):
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t = times[j]
        out[j] = y
    return out


def evolve_distribution(op: TridiagonalOperator, n0, times, method: str = "auto",
                        step_factor: float = 0.1) -> DistributionTrajectory:
    """``n(t) = exp(M t) n0`` on an ascending time grid.

    ``method='spectral'`` diagonalizes the hermitized generator densely and
    conjugates back; ``'stepping'`` integrates with classical RK4 at step
    ``<= step_factor / max|diag|``. ``'auto'`` uses the spectral backend for
    small chains whose similarity weights span less than ``exp(20)`` and
    stepping otherwise.
    """
    if op.frame != "original" or op.time_kind != "continuous-generator":
        raise ValueError("evolve_distribution needs an original-frame continuous-time generator")
    n0 = np.asarray(n0, dtype=float)
    if n0.shape != (len(op),):
        raise ValueError(f"initial weights must have length {len(op)}")
    if np.any(n0 < 0):
        raise ValueError("initial weights must be non-negative")
    t = _check_times(times)
    if method == "auto":
        logT = _log_T(op) if np.all(op.sub > 0) and np.all(op.sup > 0) else None
        small = logT is not None and len(op) <= SPECTRAL_MAX_SITES
        method = "spectral" if small and np.ptp(logT) <= SPECTRAL_MAX_LOG_SPAN else "stepping"
    if method == "spectral":
        out = _evolve_spectral(op, n0, t)
    elif method == "stepping":
        dt = step_factor / max(float(np.abs(op.diag).max()), 1e-300)
        out = _rk4(np.asarray(op.sub), np.asarray(op.diag), np.asarray(op.sup), n0, t, dt)
    else:
        raise ValueError(f"unknown method {method!r}")
    if t[0] == 0.0:
        out[0] = n0
    return DistributionTrajectory(times=t, distributions=out, method=method)


@dataclass(frozen=True, eq=False)
class Autocorrelation:
    """``C^2(t) = <1| exp(M t) |1>``, optionally divided by ``q^2 - 1``."""

    times: np.ndarray
    values: np.ndarray
    modes_used: int
    truncation_bound: float


def autocorrelation(spec: ChainSpec, times, q: int | None = None, rtol: float = 1e-10,
                    max_modes: int = 2048) -> Autocorrelation:
    """Return weight at the wall from the low spectrum of ``M~``.

    Since ``T|1> = |1>``, ``C^2(t) = sum_n psi_n(1)^2 exp(-lambda_n t)``.
    Modes are added (doubling) until the neglected weight
    ``1 - sum psi_n(1)^2`` times ``exp(-lambda_{k+1} t)`` is below
    ``rtol * C^2(t)`` at the earliest positive time.
    """
    if spec.geometry != "edge":
        raise ValueError("autocorrelation is defined for the edge geometry")
    t = _check_times(times)
    fp = frame_params(spec)
    op = hermitize(build_generator(spec), fp)
    n = len(op)
    k = min(16, n)
    tpos = t[t > 0]
    while True:
        res = low_spectrum(op, k)
        w = res.psi_modes[0, :] ** 2
        vals = res.eigenvalues
        rest = max(0.0, 1.0 - float(w.sum()))
        c = np.exp(-np.outer(t, vals)) @ w
        if k == n or tpos.size == 0:
            break
        bound = rest * math.exp(-vals[-1] * tpos[0])
        if bound <= rtol * c[t > 0][0] or k >= max_modes:
            break
        k = min(2 * k, n)
    if t[0] == 0.0:
        c[0] = 1.0
    if q is not None:
        c = c / (q * q - 1)
    bound = rest * math.exp(-vals[-1] * tpos[0]) if tpos.size and k < n else 0.0
    return Autocorrelation(times=t, values=c, modes_used=k, truncation_bound=bound)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    err: float
    intercept: float
    n_points: int


def fit_decay_rate(times, series, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares slope of ``log series`` against ``t``, sign flipped.

    The error is the standard error of the slope from the residual
    variance.

    >>> t = np.linspace(0, 20, 201)
    >>> round(fit_decay_rate(t, np.exp(-0.3 * t)).rate, 6)
    0.3
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(series, dtype=float)
    if t.shape != y.shape:
        raise ValueError("times and series differ in shape")
    mask = np.ones(t.shape, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    if mask.sum() < 10:
        raise ValueError(f"fit window holds {int(mask.sum())} samples; need at least 10")
    if np.any(y[mask] <= 0):
        raise ValueError("series must be positive inside the fit window")
    tt, ly = t[mask], np.log(y[mask])
    A = np.vstack([np.ones_like(tt), tt]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    s2 = float(resid @ resid) / (tt.size - 2)
    err = math.sqrt(s2 / float(np.sum((tt - tt.mean()) ** 2)))
    return DecayFit(rate=-float(coef[1]), err=err, intercept=float(coef[0]), n_points=int(tt.size))


# ---------------------------------------------------------------- trajectories


@njit(cache=True, nogil=True)
def _walk_kernel(fwd, bwd, gamma, times, start, seeds, pos_out, s_out, jumps_out):
    """Gillespie walks; ``fwd[x]``/``bwd[x]`` are the rates out of site ``x``."""
    nt = times.shape[0]
    for i in range(seeds.shape[0]):
        np.random.seed(seeds[i])
        x = start
        t = 0.0
        s = 0.0
        j = 0
        nj = 0
        while j < nt:
            rate = fwd[x] + bwd[x]
            if rate > 0:
                t_next = t + np.random.exponential(1.0 / rate)
            else:
                t_next = np.inf
            while j < nt and times[j] <= t_next:
                pos_out[i, j] = x
                s_out[i, j] = s - gamma * x * (times[j] - t)
                j += 1
            if j >= nt:
                break
            s -= gamma * x * (t_next - t)
            t = t_next
            if np.random.random() * rate < fwd[x]:
                x += 1
            else:
                x -= 1
            nj += 1
        jumps_out[i] = nj


def _walker_seeds(seed: int, first: int, count: int) -> np.ndarray:
    return np.array([np.random.SeedSequence([seed, first + i]).generate_state(1)[0] for i in range(count)],
                    dtype=np.uint32)


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """Endpoint paths and log survival weights on a common time grid.

    ``positions[i, j]`` is walker ``i`` at ``times[j]``;
    ``log_weights[i, j] = -gamma_d * int_0^t x dt``.
    """

    times: np.ndarray
    positions: np.ndarray
    log_weights: np.ndarray
    seed: int
    first_walker: int
    gamma_d: float
    jumps: np.ndarray

    @property
    def walkers(self) -> int:
        return int(self.positions.shape[0])

    def survival(self) -> np.ndarray:
        """Per-walker survival weights ``exp(s)``."""
        return np.exp(self.log_weights)

    def mean_survival(self) -> tuple[np.ndarray, np.ndarray]:
        """Ensemble mean of ``exp(s(t))`` and its standard error."""
        w = self.survival()
        err = w.std(axis=0, ddof=1) / math.sqrt(self.walkers) if self.walkers > 1 else np.zeros(w.shape[1])
        return w.mean(axis=0), err

    def mean_position(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def merge(self, other: "TrajectoryEnsemble") -> "TrajectoryEnsemble":
        """Concatenate with an ensemble that continues the walker numbering."""
        if other.seed != self.seed or not np.array_equal(other.times, self.times):
            raise ValueError("ensembles differ in seed or time grid")
        if other.first_walker != self.first_walker + self.walkers:
            raise ValueError("walker ranges are not contiguous")
        return TrajectoryEnsemble(times=self.times, positions=np.vstack([self.positions, other.positions]),
                                  log_weights=np.vstack([self.log_weights, other.log_weights]), seed=self.seed,
                                  first_walker=self.first_walker, gamma_d=self.gamma_d,
                                  jumps=np.concatenate([self.jumps, other.jumps]))


def sample_trajectories(spec: ChainSpec, walkers: int, horizon: float, seed: int, times=None,
                        start: int = 1, threads: int = 1, first_walker: int = 0) -> TrajectoryEnsemble:
    """Continuous-time jump simulation of the endpoint walk.

    Waiting times are exponential in the total exit rate of the current
    site; the hard wall at ``x = 1`` and the far wall at ``x = L`` forbid
    hops out of the lattice. ``s`` accumulates ``-gamma_d x dt`` exactly
    over each holding interval. Positions are lattice sites ``x = 1..L``
    (the site convention, not the dual lattice): ``x`` is the operator
    length, so a walker at the wall is a single-site string. Walker ``i``
    draws from its own stream
    seeded by ``(seed, first_walker + i)``, so results do not depend on
    ``threads``.
    """
    if spec.far_boundary != "reflecting":
        raise ValueError("trajectory sampling supports a reflecting far wall only")
    fwd, bwd = _site_rates(spec)
    return _run_walkers(spec, fwd, bwd, walkers, horizon, seed, times, start, threads, first_walker)


def _run_walkers(spec: ChainSpec, fwd, bwd, walkers, horizon, seed, times, start, threads, first_walker):
    if walkers < 1:
        raise ValueError("need at least one walker")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    n = spec.n_sites
    if not 1 <= start <= n:
        raise ValueError(f"start site must lie in [1, {n}]")
    t = _check_times(np.linspace(0.0, horizon, 201) if times is None else times)
    if t[-1] > horizon * (1 + 1e-12):
        raise ValueError("time grid extends past the horizon")
    seeds = _walker_seeds(seed, first_walker, walkers)
    pos = np.empty((walkers, t.size), dtype=np.int64)
    s = np.empty((walkers, t.size))
    jumps = np.empty(walkers, dtype=np.int64)
    gd = spec.gamma_d
    chunks = np.array_split(np.arange(walkers), max(1, min(threads, walkers)))

    def run(idx):
        if idx.size:
            sl = slice(idx[0], idx[-1] + 1)
            _walk_kernel(fwd, bwd, gd, t, start, seeds[sl], pos[sl], s[sl], jumps[sl])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, chunks))
    else:
        for c in chunks:
            run(c)
    return TrajectoryEnsemble(times=t, positions=pos, log_weights=s, seed=seed, first_walker=first_walker,
                              gamma_d=gd, jumps=jumps)


def _site_rates(spec: ChainSpec) -> tuple[np.ndarray, np.ndarray]:
    n = spec.n_sites
    f, b = spec.bond_rates()
    fwd = np.zeros(n + 1)
    bwd = np.zeros(n + 1)
    fwd[1:n] = f  # out of site x to x+1
    bwd[2:n + 1] = b  # out of site x to x-1
    return fwd, bwd


def sample_tilted_trajectories(spec: ChainSpec, walkers: int, horizon: float, seed: int, times=None,
                               start: int = 1, threads: int = 1, first_walker: int = 0) -> TrajectoryEnsemble:
    """Walks conditioned on long survival (Doob transform by the slowest mode).

    With ``l`` the left eigenvector of ``M`` for the slowest decay rate
    ``Gamma`` (``l = psi_1 / T``), hop rates become
    ``rate(x -> y) * l(y) / l(x)``. Along such walks
    ``exp(s(t) + Gamma t) l(x_t) / l(x_0)`` has unit mean, so their
    statistics are those of the survival-weighted histories of the plain
    walk, without the weight degeneracy of reweighting. ``log_weights``
    still hold the plain ``s(t) = -gamma_d int x dt``.
    """
    if spec.far_boundary != "reflecting":
        raise ValueError("trajectory sampling supports a reflecting far wall only")
    fp = frame_params(spec)
    op = hermitize(build_generator(spec), fp)
    res = low_spectrum(op, 1)
    logs, signs = stable_log_modes(op, res.eigenvalues, res.psi_modes)
    if np.any(signs[:, 0] <= 0):
        raise ValueError("slowest mode is not strictly positive; cannot tilt")
    log_l = logs[:, 0] - fp.log_T
    fwd, bwd = _site_rates(spec)
    n = spec.n_sites
    fwd[1:n] *= np.exp(log_l[1:] - log_l[:-1])
    bwd[2:n + 1] *= np.exp(log_l[:-1] - log_l[1:])
    return _run_walkers(spec, fwd, bwd, walkers, horizon, seed, times, start, threads, first_walker)


def half_life(ensemble: TrajectoryEnsemble) -> float:
    """First time the mean survival weight drops to 1/2 (log-linear interpolation)."""
    m, _ = ensemble.mean_survival()
    below = np.nonzero(m <= 0.5)[0]
    if below.size == 0:
        raise ValueError("mean survival stays above 1/2 within the horizon")
    j = int(below[0])
    if j == 0:
        return float(ensemble.times[0])
    t0, t1 = ensemble.times[j - 1], ensemble.times[j]
    l0, l1 = math.log(m[j - 1]), math.log(m[j])
    return float(t0 + (math.log(0.5) - l0) * (t1 - t0) / (l1 - l0))


def _interp_mean_position(ensemble: TrajectoryEnsemble, t: float) -> float:
    return float(np.interp(t, ensemble.times, ensemble.mean_position()))


@dataclass(frozen=True, eq=False)
class HalfLifeScaling:
    gammas: np.ndarray
    t_half: np.ndarray
    mean_size: np.ndarray
    beta: float
    beta_err: float
    size_exponent: float
    size_exponent_err: float


def _loglog_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    A = np.vstack([np.ones_like(x), np.log(x)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    dof = x.size - 2
    if dof <= 0:
        return float(coef[1]), 0.0
    resid = np.log(y) - A @ coef
    s2 = float(resid @ resid) / dof
    return float(coef[1]), math.sqrt(s2 / float(np.sum((np.log(x) - np.log(x).mean()) ** 2)))


def half_life_scaling(template: ChainSpec, gammas, walkers: int, seed: int, threads: int = 1,
                      n_times: int = 400) -> HalfLifeScaling:
    """Half-life and mean size at the half-life across a ``gamma`` grid.

    The horizon for each ``gamma`` is four times the drift estimate
    ``sqrt(2 ln 2 / (gamma_d v_B))``; fits are log-log least squares.
    """
    gammas = np.asarray(sorted(float(g) for g in gammas))
    if gammas.size < 2 or np.any(gammas <= 0):
        raise ValueError("need at least two positive gamma values")
    wp, wm = template.bulk_rates
    v_b = wp - wm
    if v_b <= 0:
        raise ValueError("half-life scaling needs a biased walk")
    th, size = [], []
    for g in gammas:
        spec = template.replace(gamma=g)
        gd = spec.gamma_d
        horizon = 4.0 * math.sqrt(2 * math.log(2) / (gd * v_b))
        L = spec.L if spec.L is not None else max(64, int(math.ceil(wp * horizon * 2 + 20)))
        spec = spec.replace(L=L)
        ens = sample_trajectories(spec, walkers, horizon, seed, times=np.linspace(0, horizon, n_times),
                                  threads=threads)
        t_half = half_life(ens)
        th.append(t_half)
        size.append(_interp_mean_position(ens, t_half))
    th = np.array(th)
    size = np.array(size)
    beta, beta_err = _loglog_fit(gammas, th)
    sz, sz_err = _loglog_fit(gammas, size)
    return HalfLifeScaling(gammas=gammas, t_half=th, mean_size=size, beta=beta, beta_err=beta_err,
                           size_exponent=sz, size_exponent_err=sz_err)


@dataclass(frozen=True, eq=False)
class LogSurvivalStats:
    """Distribution of ``s(t)`` across walkers.

    ``mean``/``var`` are plain ensemble moments; ``weighted_mean`` and
    ``weighted_var`` weight each walker by its survival ``exp(s)``, i.e.
    describe the histories that carry the surviving operator weight.
    """

    t: float
    counts: np.ndarray
    edges: np.ndarray
    mean: float
    var: float
    weighted_mean: float
    weighted_var: float
    effective_walkers: float


def survival_log_distribution(ensemble: TrajectoryEnsemble, t: float, bins: int = 50) -> LogSurvivalStats:
    """Histogram and moments of the log survival weight at time ``t``."""
    if ensemble.walkers == 0:
        raise ValueError("empty ensemble")
    if t < ensemble.times[0] or t > ensemble.times[-1]:
        raise ValueError("t lies outside the ensemble's time grid")
    j = int(np.argmin(np.abs(ensemble.times - t)))
    s = ensemble.log_weights[:, j]
    lo, hi = float(s.min()), float(s.max())
    if hi == lo:
        hi = lo + 1.0
    counts, edges = np.histogram(s, bins=bins, range=(lo, hi))
    w = np.exp(s - s.max())
    wsum = float(w.sum())
    wm = float(w @ s) / wsum
    wv = float(w @ (s - wm) ** 2) / wsum
    return LogSurvivalStats(t=float(ensemble.times[j]), counts=counts, edges=edges, mean=float(s.mean()),
                            var=float(s.var(ddof=1)) if s.size > 1 else 0.0, weighted_mean=wm, weighted_var=wv,
                            effective_walkers=wsum**2 / float(w @ w))


def log_variance_growth(ensemble: TrajectoryEnsemble, window: tuple[float, float],
                        weighted: bool = False) -> tuple[float, float]:
    """Slope and correlation coefficient of ``Var[s(t)]`` against ``t``."""
    mask = (ensemble.times >= window[0]) & (ensemble.times <= window[1])
    ts = ensemble.times[mask]
    if ts.size < 3:
        raise ValueError("window holds fewer than three grid times")
    vs = []
    for t in ts:
        st = survival_log_distribution(ensemble, t, bins=10)
        vs.append(st.weighted_var if weighted else st.var)
    vs = np.array(vs)
    slope = float(np.polyfit(ts, vs, 1)[0])
    corr = float(np.corrcoef(ts, vs)[0, 1])
    return slope, corr
