import numpy as np
import pytest
from scipy import stats

from conftest import flat_target
from graphmcmc.baselines import (LgmGibbs, LgmGibbsState, RandomWalkMetropolis, RwmConfig, draw_tau, draw_z,
                                 inverse_gamma_draw, lgm_gibbs_step, mvn_draw, polya_gamma_mean, rwm_step,
                                 sample_polya_gamma)
from graphmcmc.targets import CustomTarget, LgmModel, simulate_lgm_data

STD_NORMAL = CustomTarget(1, lambda th: -0.5 * float(th @ th))


def test_rwm_config_validation():
    with pytest.raises(ValueError):
        RwmConfig("gaussian", 0.0)
    with pytest.raises(ValueError):
        RwmConfig("laplace", 1.0)


@pytest.mark.parametrize("proposal", ["uniform_box", "gaussian"])
def test_rwm_flat_target_always_accepts(proposal):
    rng = np.random.default_rng(0)
    theta = np.zeros(3)
    for _ in range(200):
        theta, _, acc = rwm_step(flat_target(3), theta, RwmConfig(proposal, 0.7), rng)
        assert acc


def test_rwm_equal_density_accepts():
    ring = CustomTarget(2, lambda th: 0.0 if np.linalg.norm(th) < 10 else -np.inf)
    _, _, acc = rwm_step(ring, np.zeros(2), RwmConfig("gaussian", 0.1), np.random.default_rng(1))
    assert acc


def test_rwm_uniform_box_stays_in_box():
    rng = np.random.default_rng(2)
    theta = np.array([0.5, -0.5])
    nxt, _, _ = rwm_step(flat_target(2), theta, RwmConfig("uniform_box", 0.25), rng)
    assert np.all(np.abs(nxt - theta) <= 0.25)


def _rwm_chain(n, s, seed):
    rng = np.random.default_rng(seed)
    kern = RandomWalkMetropolis(STD_NORMAL, RwmConfig("gaussian", s))
    theta, lp = np.zeros(1), 0.0
    out, acc = np.empty(n), 0
    for k in range(n):
        theta, lp, a = kern.step(theta, rng, lp)
        out[k] = theta[0]
        acc += a
    return out, acc / n


@pytest.mark.slow
def test_rwm_standard_normal_acceptance_and_invariance():
    draws, rate = _rwm_chain(500_000, 2.4, 0)
    assert 0.3 < rate < 0.5
    thinned = draws[::5]
    assert thinned.size == 100_000
    ks = stats.kstest(thinned, "norm").statistic
    assert ks < 1.63 / np.sqrt(thinned.size)  # 1% critical value


@pytest.mark.parametrize("b,c", [(1.0, 0.5), (2.0, 1.0), (3.0, 0.0), (0.5, 4.0)])
def test_polya_gamma_mean(b, c):
    draws = sample_polya_gamma(np.full(100_000, b), c, np.random.default_rng(1))
    assert np.all(draws > 0)
    oracle = b / 4 if c == 0 else b * np.tanh(c / 2) / (2 * c)
    assert draws.mean() == pytest.approx(oracle, rel=0.01)


def test_polya_gamma_mean_helper_and_scalar_draw():
    assert polya_gamma_mean(1.0, 0.5) == pytest.approx(np.tanh(0.25) / 1.0)
    assert polya_gamma_mean(2.0, 0.0) == pytest.approx(0.5)
    assert isinstance(sample_polya_gamma(1.0, 0.3, np.random.default_rng(0)), float)
    with pytest.raises(ValueError):
        sample_polya_gamma(0.0, 1.0, np.random.default_rng(0))


def test_polya_gamma_variance():
    # Var PG(b, 0) = b / 24; the truncation removes a little of the tail
    draws = sample_polya_gamma(np.full(100_000, 2.0), 0.0, np.random.default_rng(3))
    assert draws.var() == pytest.approx(2.0 / 24, rel=0.03)


def test_inverse_gamma_mean():
    rng = np.random.default_rng(0)
    draws = np.array([inverse_gamma_draw(2.0, 1.0, rng) for _ in range(100_000)])
    assert draws.mean() == pytest.approx(1.0, rel=0.02) or abs(np.median(draws) - stats.invgamma(2).median()) < 0.01
    shape3 = np.array([inverse_gamma_draw(3.0, 1.0, rng) for _ in range(100_000)])
    assert shape3.mean() == pytest.approx(0.5, rel=0.02)
    with pytest.raises(ValueError):
        inverse_gamma_draw(0.0, 1.0, rng)


def test_mvn_draw():
    rng = np.random.default_rng(1)
    mean = np.array([1.0, -2.0])
    x = mvn_draw(mean, 1e-12 * np.eye(2), rng)
    np.testing.assert_allclose(x, mean, atol=1e-5)
    cov = np.array([[2.0, 0.6], [0.6, 0.5]])
    draws = np.array([mvn_draw(mean, cov, rng) for _ in range(100_000)])
    assert np.linalg.norm(np.cov(draws.T) - cov) / np.linalg.norm(cov) < 0.05
    with pytest.raises(np.linalg.LinAlgError):
        mvn_draw(mean, np.array([[1.0, 2.0], [2.0, 1.0]]), rng)


def test_draw_z_scalar_conditional():
    model = LgmModel([0.5], [3])
    omega, tau, h, r = np.array([0.7]), 2.0, 0.25, 1.5
    sigma2 = tau * (1.0 + model.chol_tilde(h)[1])
    var = 1.0 / (1.0 / sigma2 + omega[0])
    mean = var * (r - 3) / 2
    rng = np.random.default_rng(0)
    draws = np.array([draw_z(model, omega, tau, h, r, rng)[0] for _ in range(100_000)])
    se = np.sqrt(var / draws.size)
    assert abs(draws.mean() - mean) < 4 * se
    assert draws.var() == pytest.approx(var, rel=0.02)


def test_draw_z_covariance_n3():
    t, y = np.array([0.0, 0.4, 1.0]), np.array([1, 0, 4])
    model = LgmModel(t, y)
    omega, tau, h, r = np.array([0.3, 1.1, 0.6]), 1.5, 0.2, 2.0
    L, eps = model.chol_tilde(h)
    Sigma = tau * (L @ L.T)
    cov = np.linalg.inv(np.linalg.inv(Sigma) + np.diag(omega))
    mean = cov @ ((r - y) / 2)
    rng = np.random.default_rng(1)
    draws = np.array([draw_z(model, omega, tau, h, r, rng) for _ in range(100_000)])
    assert np.linalg.norm(np.cov(draws.T) - cov) / np.linalg.norm(cov) < 0.05
    np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.02)


def test_draw_tau_at_zero_field():
    model = LgmModel(np.linspace(0, 1, 4), np.zeros(4, dtype=int))
    rng = np.random.default_rng(2)
    draws = np.array([draw_tau(model, np.zeros(4), 0.25, rng) for _ in range(50_000)])
    shape = 4 / 2 + 2
    assert draws.mean() == pytest.approx(1.0 / (shape - 1), rel=0.02)


def test_gibbs_keeps_positivity_and_adapts_only_when_asked():
    t, y = simulate_lgm_data(20, 1.0, 0.25, 2.0, seed=1)
    model = LgmModel(t, y)
    state = LgmGibbsState(np.zeros(20), np.full(20, 0.25), 1.0, 0.0, 0.0)
    rng = np.random.default_rng(0)
    for _ in range(200):
        state, _ = lgm_gibbs_step(model, state, 0.5, rng)
        assert np.all(state.omega > 0) and state.tau > 0 and state.h > 0 and state.r > 0
        assert np.isfinite(model.log_kernel(state.theta()))
    gibbs = LgmGibbs(model, step_size=0.5)
    gibbs.step(state.theta(), rng)
    assert gibbs.step_size == 0.5
    gibbs.adapt(False, 0)
    assert gibbs.step_size < 0.5
    gibbs.adapt(True, 1)
    roundtrip = LgmGibbsState.from_theta(model, state.theta())
    assert roundtrip.h == pytest.approx(state.h) and roundtrip.r == pytest.approx(state.r)
