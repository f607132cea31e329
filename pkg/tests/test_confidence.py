import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from albandit.confidence import (
    ConfidenceBall,
    RadiusParams,
    RidgeState,
    SingularDesignError,
    bias_bonus,
    exploration_refit,
    initial_norm_estimate,
    k_delta,
    m_delta,
    norm_upper_bound,
    ridge_solve,
    ridge_update,
    ridge_update_batch,
    support_threshold,
    t_min,
    theoretical_t0,
    upsilon_delta,
)
from albandit.envs import sample_uniform_sphere


def params(**kw):
    base = dict(b=1.0, delta=0.1, sigma=1.0, rho_min=1.0, d=5, K=10, horizon=100)
    base.update(kw)
    return RadiusParams(**base)


# ---------------------------------------------------------------- ridge

def test_single_update_arithmetic():
    s = ridge_update(RidgeState(2, lam=1.0), np.array([1.0, 0.0]), 3.0)
    np.testing.assert_array_equal(s.gram, [[2.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(s.moment, [3.0, 0.0])
    assert s.count == 1


def test_zero_feature_only_bumps_count():
    s = RidgeState(3, lam=0.5)
    g, m = s.gram.copy(), s.moment.copy()
    ridge_update(s, np.zeros(3), 5.0)
    np.testing.assert_array_equal(s.gram, g)
    np.testing.assert_array_equal(s.moment, m)
    assert s.count == 1


def test_twenty_updates_match_batch_gram(rng):
    X = rng.normal(size=(20, 5))
    y = rng.normal(size=20)
    s = RidgeState(5, lam=1.0)
    for x, v in zip(X, y):
        ridge_update(s, x, v)
    assert np.max(np.abs(s.gram - (np.eye(5) + X.T @ X))) <= 1e-10
    assert np.max(np.abs(s.moment - X.T @ y)) <= 1e-10
    assert s.count == 20


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        ridge_update(RidgeState(3), np.ones(2), 1.0)


def test_empty_state_solves_to_zero():
    np.testing.assert_array_equal(ridge_solve(RidgeState(4, lam=1.0)), np.zeros(4))


def test_noiseless_interpolation_unregularized(rng):
    theta = np.array([0.3, -1.2, 2.0])
    s = RidgeState(3, lam=0.0)
    for _ in range(10):
        x = rng.normal(size=3)
        ridge_update(s, x, x @ theta)
    np.testing.assert_allclose(ridge_solve(s), theta, atol=1e-8)


def test_solve_matches_cholesky_oracle(rng):
    X = rng.normal(size=(20, 5))
    y = rng.normal(size=20)
    s = ridge_update_batch(RidgeState(5, lam=1.0), X, y)
    L = np.linalg.cholesky(np.eye(5) + X.T @ X)
    b = X.T @ y
    z = np.zeros(5)
    for i in range(5):
        z[i] = (b[i] - L[i, :i] @ z[:i]) / L[i, i]
    oracle = np.zeros(5)
    for i in reversed(range(5)):
        oracle[i] = (z[i] - L[i + 1:, i] @ oracle[i + 1:]) / L[i, i]
    np.testing.assert_allclose(ridge_solve(s), oracle, atol=1e-8)


def test_singular_design_names_rank():
    s = RidgeState(3, lam=0.0)
    ridge_update(s, np.array([1.0, 0.0, 0.0]), 1.0)
    ridge_update(s, np.array([0.0, 1.0, 0.0]), 1.0)
    with pytest.raises(SingularDesignError, match="rank 2") as exc:
        ridge_solve(s)
    assert exc.value.rank == 2 and exc.value.dim == 3


def test_sherman_morrison_inverse_tracks_gram(rng):
    s = RidgeState(4, lam=2.0)
    for _ in range(30):
        ridge_update(s, rng.normal(size=4), rng.normal())
    np.testing.assert_allclose(s.inverse @ s.gram, np.eye(4), atol=1e-10)


@given(st.integers(1, 3), st.integers(1, 12), st.floats(0.1, 3.0), st.integers(0, 2**32 - 1))
def test_ridge_solution_minimizes_objective(d, n, lam, seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, d))
    y = r.normal(size=n)
    s = ridge_update_batch(RidgeState(d, lam=lam), X, y)
    theta = ridge_solve(s)

    def objective(t):
        return np.sum((y - X @ t) ** 2) + lam * np.sum(t**2)

    base = objective(theta)
    for _ in range(50):
        assert objective(theta + r.normal(scale=0.05, size=d)) >= base - 1e-9


@given(st.integers(1, 6), st.lists(st.floats(-5, 5), min_size=1, max_size=15),
       st.one_of(st.just(0.0), st.floats(1e-3, 2)))
def test_ridge_invariants(d, ys, lam):
    s = RidgeState(d, lam=lam)
    r = np.random.default_rng(len(ys))
    for y in ys:
        ridge_update(s, r.normal(size=d), y)
    assert s.count == len(ys)
    np.testing.assert_allclose(s.gram, s.gram.T)
    assert np.linalg.eigvalsh(s.gram - lam * np.eye(d)).min() >= -1e-9
    if lam > 0:
        assert np.linalg.eigvalsh(s.gram).min() > 0


def test_exploration_refit_fallback_with_few_samples(rng):
    s = RidgeState(5, lam=0.0)
    for _ in range(3):
        ridge_update(s, rng.normal(size=5), 1.0)
    theta = exploration_refit(s)
    assert np.all(np.isfinite(theta))
    oracle = np.linalg.solve(s.gram + 1e-8 * np.eye(5), s.moment)
    np.testing.assert_allclose(theta, oracle)


# ---------------------------------------------------------------- radius formulas

def test_t_min_example():
    p = params(rho_min=1.0, d=50, horizon=100, delta=0.1)
    assert t_min(p) == pytest.approx(214.91, abs=0.01)
    assert t_min(p) == pytest.approx((16 + 8 / 3) * math.log(100000), rel=1e-12)


def test_t_min_unit_log():
    p = params(rho_min=1.0, d=1, horizon=1, delta=2 / math.e)
    assert t_min(p) == pytest.approx(16 + 8 / 3, rel=1e-12)


def test_t_min_doubling_horizon_adds_log_two():
    p1 = params(rho_min=0.3, horizon=77)
    p2 = params(rho_min=0.3, horizon=154)
    assert t_min(p2) - t_min(p1) == pytest.approx((16 / 0.09 + 8 / 0.9) * math.log(2), rel=1e-12)


def test_m_delta_examples():
    assert m_delta(0.0, 10, params(sigma=0.0)) == 0.0
    assert m_delta(7.0, 10, params(sigma=0.0)) == 7.0
    val = m_delta(10.0, 100, params(sigma=1.0, d=50, delta=0.1))
    assert val == pytest.approx(17.716, abs=1e-3)


def test_upsilon_examples():
    p = params(sigma=0.0, K=2, horizon=100, delta=0.1)
    L = math.log(4000)
    assert upsilon_delta(0.0, 100, p) == pytest.approx(255.1, abs=0.05)
    step = upsilon_delta(1.0, 100, p) - upsilon_delta(0.0, 100, p)
    assert step == pytest.approx((10 / 3) * (L + math.sqrt(100 * L + L * L)), rel=1e-12)
    assert upsilon_delta(0.0, 1, p) == pytest.approx((20 / 3) * (L + math.sqrt(L + L * L)), rel=1e-12)
    with pytest.raises(ValueError):
        upsilon_delta(0.0, 0, p)


def test_k_delta_branches():
    p = params(sigma=1.0, d=50, K=2, horizon=100, delta=0.1, rho_min=1.0)
    t_small = 50
    assert t_small < t_min(p)
    assert k_delta(10.0, t_small, p) == m_delta(10.0, t_small, p) + upsilon_delta(10.0, t_small, p)
    t = 1000
    z = 1 + t / 2
    expected = m_delta(10.0, t, p) / math.sqrt(z) + upsilon_delta(10.0, t, p) / z
    assert k_delta(10.0, t, p) == pytest.approx(expected, rel=1e-12)


def test_k_delta_boundary_uses_scaled_branch(monkeypatch):
    import albandit.confidence as conf

    p = params(rho_min=0.5)
    monkeypatch.setattr(conf, "t_min", lambda _p: 24.0)
    z = 1 + 0.5 * 24 / 2
    expected = m_delta(1.0, 24, p) / math.sqrt(z) + upsilon_delta(1.0, 24, p) / z
    assert conf.k_delta(1.0, 24, p) == pytest.approx(expected, rel=1e-15)
    assert conf.k_delta(1.0, 23, p) == m_delta(1.0, 23, p) + upsilon_delta(1.0, 23, p)


@pytest.mark.parametrize("b", [0.0, 1.0, 10.0])
@pytest.mark.parametrize("sigma", [0.1, 1.0])
@pytest.mark.parametrize("horizon", [100, 10_000])
def test_k_delta_shrinks_when_time_quadruples(b, sigma, horizon):
    p = params(sigma=sigma, horizon=horizon, d=10, K=10)
    t = int(math.ceil(t_min(p))) + 1
    for mult in (1, 3, 10):
        assert k_delta(b, 4 * t * mult, p) < k_delta(b, t * mult, p)


def test_bias_bonus_examples():
    assert bias_bonus(0.25, 3, params(sigma=0.0, b=0.0)) == 0.25
    val = bias_bonus(0.5, 100, params(sigma=1.0, K=10, delta=0.1, b=1.0, d=5))
    assert val == pytest.approx(1.367, abs=1e-3)
    p = params()
    assert bias_bonus(0.0, 40, p) < bias_bonus(0.0, 10, p)


def test_bias_bonus_rejects_unpulled_arm():
    with pytest.raises(ValueError):
        bias_bonus(0.0, 0, params())
    with pytest.raises(ValueError):
        bias_bonus(np.zeros(3), np.array([1, 0, 2]), params())


def test_radius_params_validation():
    with pytest.raises(ValueError):
        params(delta=1.0)
    with pytest.raises(ValueError):
        params(rho_min=0.0)
    with pytest.raises(ValueError):
        params(K=0)


def test_confidence_ball_membership():
    ball = ConfidenceBall(np.array([1.0, 0.0]), 1.0)
    assert ball.contains([2.0, 0.0])
    assert not ball.contains([2.0, 0.1])
    with pytest.raises(ValueError):
        ConfidenceBall(np.zeros(2), -1.0)


# ---------------------------------------------------------------- initial norm estimate

def test_initial_estimate_noiseless_floor(rng):
    theta = np.array([0.3, 0.4])
    C = rng.normal(size=(8, 2))
    r = 0.7 + C @ theta
    b1, th = initial_norm_estimate(r, C, sigma=0.0, delta_s=0.1)
    np.testing.assert_allclose(th, theta, atol=1e-12)
    assert b1 == 1.0


def test_norm_upper_bound_example():
    assert norm_upper_bound(2.0, 1.0, 4, 16, 0.1) == pytest.approx(
        2 + math.sqrt(2) * math.sqrt(0.25 * math.log(10)), rel=1e-12)
    assert norm_upper_bound(2.0, 1.0, 4, 16, 0.1) == pytest.approx(3.073, abs=1e-3)


def test_initial_estimate_floor_binds_for_zero_theta():
    for rep in range(200):
        r = np.random.default_rng(rep)
        C = r.normal(size=(400, 5))
        rewards = 0.3 + 0.1 * r.normal(size=400)
        b1, _ = initial_norm_estimate(rewards, C, sigma=0.1, delta_s=0.1)
        assert b1 == 1.0


def test_initial_estimate_rank_deficient_asks_for_more_tau():
    C = np.zeros((4, 3))
    C[:, 0] = [1.0, 2.0, 3.0, 5.0]
    with pytest.raises(SingularDesignError, match="increase tau"):
        initial_norm_estimate(np.ones(4), C, 1.0, 0.1)


def test_initial_estimate_safety_rate():
    theta = np.array([2.0, -1.0, 0.5, 0.0])
    delta_s = 0.1
    ok = 0
    for rep in range(200):
        r = np.random.default_rng(1000 + rep)
        C = r.normal(size=(16, 4))
        rewards = -0.4 + C @ theta + r.normal(size=16)
        b1, _ = initial_norm_estimate(rewards, C, sigma=1.0, delta_s=delta_s)
        assert b1 >= 1.0
        ok += b1 >= np.linalg.norm(theta)
    assert ok / 200 >= 1 - delta_s


# ---------------------------------------------------------------- support / T0

def test_support_threshold_examples():
    s = support_threshold(np.array([0.5, 0.01, -0.3]), 0.25)
    assert s.indices == (0, 2) and s.threshold == 0.125
    assert support_threshold(np.ones(7), 2.0).indices == tuple(range(7))
    assert support_threshold(np.zeros(4), 1e-9).indices == ()


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=20), st.floats(1e-3, 4))
def test_support_threshold_property(values, eps):
    s = support_threshold(np.array(values), eps)
    assert list(s.indices) == sorted(s.indices)
    assert all(abs(values[i]) >= eps / 2 for i in s.indices)
    assert all(abs(values[i]) < eps / 2 for i in range(len(values)) if i not in s.indices)


def test_theoretical_t0_zero_noise_example():
    # Exact arithmetic: (4/3 * 3.5 * 2.5 / 0.25 * ln 40)^2 = 29634.8..., so the ceiling is 29635.
    term2 = (4 / 3) * 3.5 * 2.5 / 0.25 * math.log(40)
    assert term2 == pytest.approx(172.15, abs=0.01)
    assert theoretical_t0(2, 0.1, 0.0, 0.5, 0.5) == math.ceil(term2**2) == 29635


def test_theoretical_t0_monotone_in_delta_and_zero_noise_branch():
    assert theoretical_t0(5, 0.05, 0.3, 0.2, 0.2) > theoretical_t0(5, 0.1, 0.3, 0.2, 0.2)
    lam = 0.25
    L = math.log(2 * 4 / 0.1)
    t2 = (4 / 3) * 7 * lam * (4 + lam) / lam**2 * L
    assert theoretical_t0(4, 0.1, 0.0, lam, lam) == math.ceil(t2**2)
    with pytest.raises(ValueError):
        theoretical_t0(4, 0.1, 0.0, 0.0, 0.1)


def test_l_infinity_recovery_small_scale():
    # Sphere design at d=3 with N = ceil(sqrt(T0)) samples: failures at rate <= delta.
    d, delta, sigma, eps = 3, 0.1, 0.2, 0.5
    N = math.isqrt(theoretical_t0(d, delta, sigma, 1 / d, 1 / d)) + 1
    theta = np.array([0.5, -0.25, 0.0])
    fails = 0
    for rep in range(100):
        r = np.random.default_rng(rep)
        A = sample_uniform_sphere(d, r, size=N)
        y = A @ theta + sigma * r.normal(size=N)
        est = np.linalg.lstsq(A, y, rcond=None)[0]
        fails += np.max(np.abs(est - theta)) >= eps
    assert fails / 100 <= delta
