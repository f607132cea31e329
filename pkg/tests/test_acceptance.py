"""End-to-end acceptance gates, one test per criterion.

Each test prints a single PASS/FAIL line (visible in ``pytest -v`` output)
before asserting.  The heavy criteria share module-scoped fixtures so their
runs happen once.
"""
import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from albandit.cli import main
from albandit.confidence import (
    RadiusParams,
    RidgeState,
    bias_bonus,
    k_delta,
    m_delta,
    ridge_solve,
    ridge_update,
    t_min,
    theoretical_t0,
    upsilon_delta,
)
from albandit.envs import INSTANCE_STREAM, MixtureWorld, keyed_generator, make_mixture_instance, sample_uniform_sphere, sparse_vector
from albandit.harness import ExperimentConfig, build_world, run_experiment
from albandit.policies import (
    feature_scale,
    ladder_trajectory,
    new_oful_plus,
    oful_plus_observe,
    oful_plus_select,
    support_trajectory,
)

getcontext().prec = 50
D = Decimal


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance {number:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def share(values, predicate):
    return sum(bool(predicate(v)) for v in values) / len(values)


# ---------------------------------------------------------------- 1. formula oracles

def _ln(x):
    return D(x).ln()


def oracle_t_min(p):
    rho = D(p.rho_min)
    return (D(16) / rho**2 + D(8) / (3 * rho)) * _ln(D(2) * p.d * p.horizon / D(p.delta))


def oracle_m(b, t, p):
    inner = D(p.d) / 2 * _ln(1 + D(t) / p.d) + _ln(1 / D(p.delta))
    return D(b) + (2 * D(p.sigma) ** 2 * inner).sqrt()


def oracle_upsilon(b, t, p):
    L = _ln(D(2) * p.K * p.horizon / D(p.delta))
    return D(10) / 3 * (D(b) + 2 + D(p.sigma) * (1 + 2 * L).sqrt()) * (L + (t * L + L * L).sqrt())


def oracle_k(b, t, p):
    M, U = oracle_m(b, t, p), oracle_upsilon(b, t, p)
    if D(t) < oracle_t_min(p):
        return M + U
    z = 1 + D(p.rho_min) * t / 2
    return M / z.sqrt() + U / z


def oracle_bonus(mean, n, p):
    n = D(n)
    noise = D(p.sigma) * ((1 + n) / n**2 * (1 + 2 * _ln(D(p.K) * (1 + n).sqrt() / D(p.delta)))).sqrt()
    return D(mean) + noise + D(p.b) * (2 * D(p.d) / n * _ln(1 / D(p.delta))).sqrt()


def oracle_scale(tau, T, K, delta):
    return D(tau) * (2 * _ln(4 * D(T) * K / D(delta))).sqrt()


def oracle_t0(d, delta, sigma, lam, scale):
    lam = D(lam)
    log_term = _ln(2 * D(d) / D(delta))
    noise = 32 * D(sigma) ** 2 / lam**2 * log_term
    design = D(4) / 3 * (7 * lam) * (d + lam) / lam**2 * log_term
    v = (D(scale) * max(noise, design)) ** 2
    return int(v.to_integral_value(rounding="ROUND_CEILING"))


def test_criterion_01_formula_oracles(capsys):
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(40):
        horizon = int(rng.integers(10, 10**6))
        p = RadiusParams(b=float(rng.uniform(0, 20)), delta=float(rng.uniform(1e-4, 0.5)),
                         sigma=float(rng.uniform(0, 2)), rho_min=float(rng.uniform(0.05, 1)),
                         d=int(rng.integers(1, 60)), K=int(rng.integers(1, 200)), horizon=horizon)
        t = int(rng.integers(1, horizon + 1))
        n = int(rng.integers(1, 5000))
        mean = float(rng.normal())
        tau, T, K, delta = float(rng.uniform(0.1, 5)), int(rng.integers(1, 10**6)), int(rng.integers(1, 500)), \
            float(rng.uniform(1e-4, 0.9))
        d0 = int(rng.integers(1, 60))
        pairs = [
            (t_min(p), oracle_t_min(p)),
            (m_delta(p.b, t, p), oracle_m(p.b, t, p)),
            (upsilon_delta(p.b, t, p), oracle_upsilon(p.b, t, p)),
            (k_delta(p.b, t, p), oracle_k(p.b, t, p)),
            (bias_bonus(mean, n, p), oracle_bonus(mean, n, p)),
            (feature_scale(tau, T, K, delta), oracle_scale(tau, T, K, delta)),
            (theoretical_t0(d0, delta, p.sigma, 1 / d0, 1 / d0), oracle_t0(d0, delta, p.sigma, D(1) / d0, 1)),
            (theoretical_t0(d0, delta, p.sigma, 1 / d0, 1 / d0, feature_scale(tau, T, K, delta)),
             oracle_t0(d0, delta, p.sigma, D(1) / d0, oracle_scale(tau, T, K, delta))),
        ]
        for got, want in pairs:
            want = float(want)
            worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    ok = worst <= 1e-10
    report(capsys, 1, ok, f"40 random tuples x 8 formulas, worst relative error {worst:.2e} (gate 1e-10)")
    assert ok


# ---------------------------------------------------------------- 2. ridge equivalence

def test_criterion_02_ridge_equivalence(capsys):
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        n, d = int(rng.integers(1, 51)), int(rng.integers(1, 11))
        lam = float(rng.uniform(0.1, 2.0))
        X, y = rng.normal(size=(n, d)), rng.normal(size=n)
        s = RidgeState(d, lam=lam)
        for x, v in zip(X, y):
            ridge_update(s, x, float(v))
        oracle = np.linalg.solve(lam * np.eye(d) + X.T @ X, X.T @ y)
        worst = max(worst, float(np.max(np.abs(ridge_solve(s) - oracle))))
    ok = worst <= 1e-8
    report(capsys, 2, ok, f"100 instances, max |incremental - batch| = {worst:.2e} (gate 1e-8)")
    assert ok


# ---------------------------------------------------------------- 3. confidence coverage

def test_criterion_03_confidence_coverage(capsys):
    T, delta, trials = 2000, 0.05, 200
    misses = 0
    for trial in range(trials):
        inst = make_mixture_instance(5, 5, 1.0, 0.5, keyed_generator(trial, INSTANCE_STREAM))
        world = MixtureWorld(inst, trial)
        seeds = np.array([world.reward(a, a) for a in range(5)])
        params = RadiusParams(b=1.0, delta=delta, sigma=0.5, rho_min=inst.rho_min, d=5, K=5, horizon=T - 5)
        state = new_oful_plus(seeds, params)
        for t in range(5, T):
            ctx = world.contexts(t)
            arm = oful_plus_select(state, ctx)
            oful_plus_observe(state, ctx, arm, world.reward(t, arm))
        err = np.linalg.norm(state.ball.center - inst.theta_star)
        misses += err > state.ball.radius
    rate = misses / trials
    ok = rate <= 0.20
    report(capsys, 3, ok, f"{misses}/{trials} trials outside the ball (rate {rate:.3f}, gate <= 0.20)")
    assert ok


# ---------------------------------------------------------------- 4-5. norm adaptation

@pytest.fixture(scope="module")
def norm_runs():
    cfg = ExperimentConfig(kind="norm", horizon=20_000, trials=25, base_seed=0, d=20, K=20, theta_norm=0.1,
                           sigma=math.sqrt(0.5), tau=20, T1=100, delta1=0.1, b1_override=10.0)
    return run_experiment(cfg, threads=1)


def test_criterion_04_norm_regret_ordering(capsys, norm_runs):
    final = {name: np.mean([tr.final for tr in trs]) for name, trs in norm_runs.by_algorithm().items()}
    oracle, alb, fixed = final["norm_oracle"], final["alb_norm"], final["oful_plus"]
    ratio = fixed / alb
    ok = oracle <= alb <= fixed and ratio >= 1.5
    report(capsys, 4, ok, f"mean final regret oracle={oracle:.0f} alb_norm={alb:.0f} oful_plus(b=10)={fixed:.0f}, "
                          f"ratio {ratio:.2f} (gate: ordering and ratio >= 1.5)")
    assert ok


def test_criterion_05_norm_estimate_convergence(capsys, norm_runs):
    traces = norm_runs.by_algorithm()["alb_norm"]
    bs = [tr.snapshot_values("b") for tr in traces]
    epochs = min(len(b) for b in bs)
    mean_b = np.mean([b[:epochs] for b in bs], axis=0)
    theta_norm, b1 = 0.1, 10.0
    nonincreasing = bool(np.all(np.diff(mean_b[1:]) <= 0))
    close = mean_b[-1] - theta_norm <= 0.2 * b1
    safe = share(bs, lambda b: min(b) >= theta_norm)
    ok = nonincreasing and close and safe >= 0.9
    report(capsys, 5, ok, f"mean b per epoch {np.array2string(mean_b, precision=3)}; nonincreasing from epoch 2: "
                          f"{nonincreasing}; final gap {mean_b[-1] - theta_norm:.3g} (gate {0.2 * b1}); "
                          f"safe share {safe:.2f} (gate 0.90)")
    assert ok


# ---------------------------------------------------------------- 6-7. dimension adaptation

SPARSE = dict(kind="dim_continuum", d=50, d_star=5, gamma=0.2, sigma=0.5, T0=100, delta=0.1, trials=25)
PHASES = 8  # phases 0..7; phases 5..7 are checked


@pytest.fixture(scope="module")
def sparse_runs():
    return run_experiment(ExperimentConfig(horizon=100_000, **SPARSE), threads=1)


def test_criterion_06_support_recovery(capsys, sparse_runs):
    cfg = sparse_runs.config
    exact, consistent = [], True
    for tr, seed in zip(sparse_runs.by_algorithm()["alb_dim"], sparse_runs.seeds):
        world = build_world(cfg, seed)
        traj = support_trajectory(world, cfg.T0, cfg.delta, PHASES, seed=seed)
        run_sets = tr.snapshot_values("support")
        consistent &= [s.indices for s in traj[:len(run_sets)]] == run_sets
        truth = world.instance.support
        exact.append(all(s.indices == truth for s in traj[5:]))
    rate = float(np.mean(exact))
    ok = consistent and rate >= 0.9
    report(capsys, 6, ok, f"true support held in every phase 5..{PHASES - 1} for {sum(exact)}/25 trials "
                          f"(rate {rate:.2f}, gate 0.90); replay matches run snapshots: {consistent}")
    assert ok


def test_criterion_07_dimension_regret_gap(capsys, sparse_runs):
    final = {name: np.mean([tr.final for tr in trs]) for name, trs in sparse_runs.by_algorithm().items()}
    oracle, alb, full = final["dim_oracle"], final["alb_dim"], final["oful"]
    ok = oracle <= alb <= full and alb <= 0.8 * full
    report(capsys, 7, ok, f"mean final regret dim_oracle={oracle:.0f} alb_dim={alb:.0f} oful={full:.0f}, "
                          f"alb/full {alb / full:.2f} (gate: ordering and <= 0.80)")
    assert ok


# ---------------------------------------------------------------- 8. finite ladder

def test_criterion_08_ladder_recovery(capsys):
    cfg = ExperimentConfig(kind="dim_finite", horizon=100_000, trials=25, ladder=(5, 10, 20), m_star=1,
                           gamma=0.25, K=10, sigma=0.25, feature_tau=1.0, T0=10_000, delta=0.1,
                           algorithms=("alb_dim_finite", "linucb_full"))
    held = []
    for seed in cfg.seeds():
        levels = ladder_trajectory(build_world(cfg, seed), cfg.T0, cfg.delta, 7, seed=seed)
        held.append(all(m == cfg.m_star for m in levels[5:]))
    rate = float(np.mean(held))
    res = run_experiment(cfg, threads=1).by_algorithm()
    alb = np.array([tr.final for tr in res["alb_dim_finite"]])
    full = np.array([tr.final for tr in res["linucb_full"]])
    wins = int(np.sum(alb < full))
    ok = rate >= 0.9 and alb.mean() < full.mean()
    report(capsys, 8, ok, f"M_i = m* for phases 5..6 in {sum(held)}/25 trials (gate 0.90); mean final regret "
                          f"alb_dim_finite={alb.mean():.0f} vs full ladder={full.mean():.0f}, "
                          f"paired wins {wins}/25 (gate: lower mean)")
    assert ok


# ---------------------------------------------------------------- 9. l-infinity recovery

def test_criterion_09_linf_recovery(capsys):
    d, eps, delta, sigma, reps = 5, 0.25, 0.1, 0.5, 200
    N = math.isqrt(theoretical_t0(d, delta, sigma, 1 / d, 1 / d) - 1) + 1
    fails = 0
    for rep in range(reps):
        r = np.random.default_rng(9000 + rep)
        theta = sparse_vector(d, 2, eps, r)
        A = sample_uniform_sphere(d, r, size=N)
        y = A @ theta + sigma * r.standard_normal(N)
        est = np.linalg.lstsq(A, y, rcond=None)[0]
        fails += np.max(np.abs(est - theta)) >= eps / 2
    rate = fails / reps
    ok = rate <= 0.1
    report(capsys, 9, ok, f"N={N} sphere samples, {fails}/{reps} repetitions with l_inf error >= eps/2 "
                          f"(rate {rate:.3f}, gate 0.10)")
    assert ok


# ---------------------------------------------------------------- 10. golden files

def test_criterion_10_determinism(capsys, tmp_path):
    from importlib.resources import files

    cfg = tmp_path / "norm_small.cfg"
    cfg.write_text(files("albandit").joinpath("configs", "norm_small.cfg").read_text())
    for name in ("a", "b"):
        assert main(["run", str(cfg), "--out", str(tmp_path / name)]) == 0
    names = ("regret.csv", "snapshots.csv", "regret.svg", "snapshots.svg")
    same = {n: (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names}
    ok = all(same.values())
    report(capsys, 10, ok, "byte-identical across two runs: " + ", ".join(f"{n}={v}" for n, v in same.items()))
    assert ok


