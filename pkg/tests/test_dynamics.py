import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from opgap.chain import ChainSpec, build_discrete_step, build_generator
from opgap.dynamics import (TrajectoryEnsemble, autocorrelation, evolve_distribution, fit_decay_rate, half_life,
                            half_life_scaling, log_variance_growth, sample_tilted_trajectories,
                            sample_trajectories, survival_log_distribution)
from opgap.hermitian import frame_params, hermitize
from opgap.spectral import spectrum_for_spec

SMALL = ChainSpec(L=40, w_plus=0.6, w_minus=0.4, gamma=0.02, boundary_extent=1, bond_overrides={1: 0.5})


@pytest.mark.parametrize("method", ["spectral", "stepping", "auto"])
def test_evolution_matches_matrix_exponential(method):
    M = build_generator(SMALL)
    n0 = np.zeros(40)
    n0[0] = 1.0
    t = np.array([0.0, 0.5, 3.0, 20.0])
    traj = evolve_distribution(M, n0, t, method=method)
    # RK4 at the default step carries a ~1e-8 global error
    atol = 1e-7 if traj.method == "stepping" else 1e-10
    for j, tj in enumerate(t):
        ref = scipy.linalg.expm(M.to_dense() * tj) @ n0
        np.testing.assert_allclose(traj.distributions[j], ref, atol=atol)
    fine = evolve_distribution(M, n0, t, method="stepping", step_factor=0.01)
    np.testing.assert_allclose(fine.distributions[-1], scipy.linalg.expm(M.to_dense() * 20.0) @ n0, atol=1e-11)


@given(L=st.integers(2, 30), wp=st.floats(0.2, 3.0), ratio=st.floats(0.1, 0.9), t=st.floats(0.1, 50.0))
@settings(max_examples=30)
def test_conservation_without_dissipation(L, wp, ratio, t):
    M = build_generator(ChainSpec(L=L, w_plus=wp, w_minus=wp * ratio))
    n0 = np.full(L, 1.0 / L)
    traj = evolve_distribution(M, n0, [0.0, t], method="stepping")
    assert abs(traj.total_weight()[-1] - 1.0) < 1e-10
    assert np.all(traj.distributions >= -1e-12)


def test_weight_decays_monotonically_with_dissipation():
    traj = evolve_distribution(build_generator(SMALL), np.eye(40)[0], np.linspace(0, 50, 26))
    assert np.all(np.diff(traj.total_weight()) < 0)
    assert traj.mean_position().shape == (26,)


def test_spectral_backend_refuses_large_frame_span():
    M = build_generator(ChainSpec(L=100, w_plus=4.0, w_minus=1.0, gamma=0.01))
    with pytest.raises(ValueError):
        evolve_distribution(M, np.eye(100)[0], [0.0, 1.0], method="spectral")
    assert evolve_distribution(M, np.eye(100)[0], [0.0, 1.0]).method == "stepping"


def test_evolution_validation():
    M = build_generator(SMALL)
    with pytest.raises(ValueError):
        evolve_distribution(hermitize(M), np.eye(40)[0], [0.0])
    with pytest.raises(ValueError):
        evolve_distribution(build_discrete_step(ChainSpec(L=5, w_plus=0.4, w_minus=0.1)), np.eye(5)[0], [0.0])
    with pytest.raises(ValueError):
        evolve_distribution(M, np.ones(39), [0.0])
    with pytest.raises(ValueError):
        evolve_distribution(M, -np.eye(40)[0], [0.0])
    with pytest.raises(ValueError):
        evolve_distribution(M, np.eye(40)[0], [1.0, 0.5])
    with pytest.raises(ValueError):
        evolve_distribution(M, np.eye(40)[0], [0.0], method="magic")


@pytest.mark.parametrize("spec", [
    SMALL,
    ChainSpec(L=300, w_plus=4.0, w_minus=1.0, gamma=0.01, boundary_extent=1, bond_overrides={1: 0.1}),
    ChainSpec(L=300, w_plus=4.0, w_minus=1.0, gamma=0.01),
], ids=["small", "bound", "unbound"])
def test_autocorrelation_matches_matrix_exponential(spec):
    t = np.array([0.0, 0.1, 1.0, 10.0, 60.0])
    ac = autocorrelation(spec, t)
    M = build_generator(spec).to_dense()
    ref = np.array([scipy.linalg.expm(M * tj)[0, 0] for tj in t])
    np.testing.assert_allclose(ac.values, ref, rtol=1e-8, atol=1e-300)
    assert ac.values[0] == 1.0
    np.testing.assert_allclose(autocorrelation(spec, t, q=2).values, ref / 3, rtol=1e-8)


def test_autocorrelation_late_time_rate_is_gap():
    spec = ChainSpec(L=None, w_plus=4.0, w_minus=1.0, gamma=0.01, boundary_extent=1, bond_overrides={1: 0.1})
    res, _ = spectrum_for_spec(spec, 1)
    t = np.linspace(5 / res.gap, 10 / res.gap, 50)
    fit = fit_decay_rate(t, autocorrelation(spec, t).values)
    assert fit.rate == pytest.approx(res.gap, rel=1e-6)


def test_autocorrelation_needs_edge_geometry():
    with pytest.raises(ValueError):
        autocorrelation(ChainSpec(L=10, w_plus=1.0, w_minus=1.0, geometry="com"), [0.0, 1.0])


def test_fit_decay_rate_validation():
    t = np.linspace(0, 10, 50)
    fit = fit_decay_rate(t, 2.0 * np.exp(-0.7 * t), window=(2.0, 8.0))
    assert fit.rate == pytest.approx(0.7) and fit.intercept == pytest.approx(math.log(2.0))
    with pytest.raises(ValueError):
        fit_decay_rate(t, np.exp(-t), window=(0.0, 0.5))
    with pytest.raises(ValueError):
        fit_decay_rate(t, np.exp(-t) - 0.5)
    with pytest.raises(ValueError):
        fit_decay_rate(t, np.exp(-t[:-1]))


FK_SPEC = ChainSpec(L=200, w_plus=0.8, w_minus=0.2, gamma=0.01)


def test_feynman_kac_average_matches_autocorrelation():
    t = np.linspace(0.0, 40.0, 9)
    ens = sample_trajectories(FK_SPEC, 10000, 40.0, seed=4, times=t)
    mean, err = ens.mean_survival()
    # walkers start at the wall, so the mean weight is the total surviving weight
    M = build_generator(FK_SPEC)
    ref = evolve_distribution(M, np.eye(200)[0], t).total_weight()
    z = (mean[1:] - ref[1:]) / err[1:]
    assert np.all(np.abs(z) < 4)


def test_trajectories_deterministic_across_threads_and_chunks():
    a = sample_trajectories(FK_SPEC, 300, 20.0, seed=9)
    b = sample_trajectories(FK_SPEC, 300, 20.0, seed=9, threads=4)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.log_weights, b.log_weights)
    head = sample_trajectories(FK_SPEC, 100, 20.0, seed=9)
    tail = sample_trajectories(FK_SPEC, 200, 20.0, seed=9, first_walker=100)
    merged = head.merge(tail)
    np.testing.assert_array_equal(merged.positions, a.positions)
    with pytest.raises(ValueError):
        head.merge(head)
    c = sample_trajectories(FK_SPEC, 300, 20.0, seed=10)
    assert not np.array_equal(a.positions, c.positions)


def test_trajectory_paths_respect_walls_and_weights():
    spec = ChainSpec(L=12, w_plus=2.0, w_minus=1.0, gamma=0.1)
    ens = sample_trajectories(spec, 200, 30.0, seed=2, times=np.linspace(0, 30, 3001))
    assert ens.positions.min() >= 1 and ens.positions.max() <= 12
    assert np.all(ens.positions[:, 0] == 1)
    assert np.all(np.abs(np.diff(ens.positions, axis=1)) <= 3)
    # s(t) = -gamma int x dt; on a fine grid the trapezoid rule is close
    approx = -0.1 * np.cumsum(np.r_[0.0, ens.positions[:, :-1].sum(axis=0) * 0.01]) / 200
    np.testing.assert_allclose(ens.log_weights.mean(axis=0), approx, atol=0.05)
    assert np.all(ens.jumps > 0)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        sample_trajectories(FK_SPEC.replace(far_boundary="absorbing"), 10, 1.0, seed=1)
    with pytest.raises(ValueError):
        sample_trajectories(FK_SPEC, 0, 1.0, seed=1)
    with pytest.raises(ValueError):
        sample_trajectories(FK_SPEC, 10, 0.0, seed=1)
    with pytest.raises(ValueError):
        sample_trajectories(FK_SPEC, 10, 1.0, seed=1, start=500)
    with pytest.raises(ValueError):
        sample_trajectories(FK_SPEC, 10, 1.0, seed=1, times=[0.0, 2.0])


def test_tilted_walk_relaxes_to_mode_density():
    spec = ChainSpec(L=100, w_plus=4.0, w_minus=1.0, gamma=0.05, boundary_extent=1, bond_overrides={1: 0.1})
    res, _ = spectrum_for_spec(spec, 1)
    ens = sample_tilted_trajectories(spec, 4000, 60.0, seed=6, times=[0.0, 60.0])
    x = ens.positions[:, -1]
    psi2 = res.psi_modes[:, 0] ** 2
    expected = float(np.arange(1, 101) @ psi2)
    assert x.mean() == pytest.approx(expected, abs=4 * x.std() / math.sqrt(x.size))


def _synthetic(log_w, times):
    n = log_w.shape[0]
    return TrajectoryEnsemble(times=np.asarray(times, dtype=float), positions=np.ones(log_w.shape, dtype=np.int64),
                              log_weights=log_w, seed=0, first_walker=0, gamma_d=1.0, jumps=np.zeros(n))


def test_half_life_interpolates_log_survival():
    t = np.linspace(0, 4, 41)
    ens = _synthetic(np.tile(-0.5 * t, (3, 1)), t)
    assert half_life(ens) == pytest.approx(2 * math.log(2), rel=1e-10)
    with pytest.raises(ValueError):
        half_life(_synthetic(np.zeros((3, 5)), np.arange(5.0)))


def test_log_distribution_moments():
    rng = np.random.default_rng(0)
    s = rng.normal(-3.0, 1.0, size=(20000, 1))
    stats = survival_log_distribution(_synthetic(s, [1.0]), 1.0, bins=20)
    assert stats.counts.sum() == 20000
    assert stats.mean == pytest.approx(-3.0, abs=0.05)
    assert stats.var == pytest.approx(1.0, abs=0.05)
    # weighting a Gaussian by exp(s) shifts its mean by the variance
    assert stats.weighted_mean == pytest.approx(-2.0, abs=0.1)
    assert stats.effective_walkers < 20000
    with pytest.raises(ValueError):
        survival_log_distribution(_synthetic(s, [1.0]), 2.0)


def test_log_variance_growth_linear():
    rng = np.random.default_rng(1)
    t = np.linspace(0, 10, 11)
    s = np.cumsum(rng.normal(0, 1, size=(5000, 11)), axis=1) * (t[1] - t[0]) ** 0.5
    slope, corr = log_variance_growth(_synthetic(s, t), (2.0, 10.0))
    assert slope == pytest.approx(1.0, abs=0.1)
    assert corr > 0.99
    with pytest.raises(ValueError):
        log_variance_growth(_synthetic(s, t), (2.0, 2.5))


def test_half_life_scaling_exponent_rough():
    tpl = ChainSpec(L=None, w_plus=0.8, w_minus=0.2, gamma=1e-3, use_dressed_rate=True)
    hs = half_life_scaling(tpl, [1e-3, 1e-4], walkers=2000, seed=1, threads=2)
    assert hs.beta == pytest.approx(-0.5, abs=0.08)
    assert np.all(hs.mean_size > 1)
    with pytest.raises(ValueError):
        half_life_scaling(tpl, [1e-3], walkers=10, seed=1)
