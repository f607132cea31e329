"""ALB-Dim for finitely many arms with nested feature maps."""
from __future__ import annotations

import math

import numpy as np

from ..confidence import RidgeState, exploration_refit, ridge_update_batch, support_threshold
from ..envs import keyed_generator, ladder_level
from ..trace import RegretTrace
from .dim import oful_beta
from .schedule import dim_schedule

POLICY_STREAM = 13
_EXPLORE = 2

EXPLORE_CHUNK = 8192
PLAY_CHUNK = 1024


def feature_scale(tau: float, T: int, K: int, delta: float) -> float:
    """High-probability bound on every feature norm over ``T`` rounds and ``K`` arms."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return tau * math.sqrt(2.0 * math.log(4.0 * T * K / delta))


class LinUCBLearner:
    """Ellipsoid-index learner over a finite arm set (OFUL index, LinUCB usage)."""

    def __init__(self, dim: int, sigma: float, delta: float, norm_bound: float = 1.0, lam: float = 1.0):
        self.dim = dim
        self.sigma = sigma
        self.delta = delta
        self.norm_bound = norm_bound
        self.lam = lam
        self.ridge = RidgeState(dim, lam)
        self.logdet_ratio = 0.0

    @property
    def beta(self) -> float:
        return oful_beta(self.sigma, self.delta, self.logdet_ratio, self.norm_bound, self.lam)

    def index(self, features) -> np.ndarray:
        F = np.asarray(features, dtype=float)
        if self.dim == 0:
            return np.zeros(F.shape[0])
        FA = F @ self.ridge.inverse
        quad = (FA * F).sum(axis=1)
        return FA @ self.ridge.moment + self.beta * np.sqrt(np.maximum(quad, 0.0))

    def select(self, features) -> int:
        return int(np.argmax(self.index(features)))

    def observe(self, x, y: float) -> None:
        if self.dim == 0:
            return
        r = self.ridge
        u = r.inverse @ x
        denom = 1.0 + x @ u
        self.logdet_ratio += math.log(denom)
        # ridge_update inlined so the Sherman-Morrison vector is computed once
        r.gram += np.multiply.outer(x, x)
        r.moment += y * x
        r.count += 1
        r.inverse -= np.multiply.outer(u, u / denom)


def active_ladder_level(indices, ladder) -> int:
    """Smallest ladder level covering every active coordinate (level 1 if none)."""
    return ladder_level(max(indices), ladder) if len(indices) else 1


def _play_truncated(world, learner: LinUCBLearner, width: int, scale: float, t: int, rounds: int,
                    regrets: np.ndarray) -> int:
    inv_scale = 1.0 / scale
    end = t + rounds
    while t < end:
        n = min(PLAY_CHUNK, end - t)
        feats, means, rewards = world.span(t, n)
        feats = feats[:, :, :width] * inv_scale
        best = means.max(axis=1)
        for j in range(n):
            F = feats[j]
            arm = learner.select(F)
            learner.observe(F[arm], rewards[j, arm] * inv_scale)
            regrets[t + j] = best[j] - means[j, arm]
        t += n
    return t


def _explore(world, store: RidgeState, seed: int, phase: int, t: int, n: int, full: int,
             regrets: np.ndarray | None = None) -> int:
    rng = keyed_generator(seed, POLICY_STREAM, _EXPLORE, phase)
    arms = rng.integers(world.K, size=full)[:n]
    for start in range(0, n, EXPLORE_CHUNK):
        chunk = arms[start:start + EXPLORE_CHUNK]
        X, y, reg = world.batch(t, chunk)
        ridge_update_batch(store, X, y)
        if regrets is not None:
            regrets[t:t + chunk.size] = reg
        t += chunk.size
    return t


def alb_dim_finite_run(world, horizon: int, T0: int, delta: float, seed: int = 0,
                       threshold_base: float = 2.0, trial: int = 0,
                       name: str = "alb_dim_finite") -> RegretTrace:
    """ALB-Dim with a LinUCB-style base learner on truncated, rescaled features.

    Features and rewards handed to the base learner are divided by the
    feature scaling so that feature norms stay below 1 with high
    probability; the exploration refit works in the original scale.
    """
    inst = world.instance
    ladder = inst.d_ladder
    scale = feature_scale(inst.tau, horizon, world.K, delta)
    store = RidgeState(world.d, lam=0.0)
    theta_hat = np.ones(world.d)
    regrets = np.zeros(horizon)
    snapshots = []
    t = 0
    for phase in dim_schedule(T0, delta, threshold_base):
        if t >= horizon:
            break
        D = support_threshold(theta_hat, phase.threshold)
        level = active_ladder_level(D.indices, ladder)
        snapshots.append((phase.index, "ladder", level))
        width = ladder[level - 1]
        learner = LinUCBLearner(width, world.sigma / scale, phase.delta)
        t = _play_truncated(world, learner, width, scale, t, min(phase.length, horizon - t), regrets)
        n_exp = min(phase.explore_length, horizon - t)
        t = _explore(world, store, seed, phase.index, t, n_exp, phase.explore_length, regrets)
        if n_exp < phase.explore_length:
            break
        theta_hat = exploration_refit(store)
    return RegretTrace.from_instant(name, regrets, snapshots, trial, seed)


def ladder_trajectory(world, T0: int, delta: float, phases: int, seed: int = 0,
                      threshold_base: float = 2.0) -> list[int]:
    """Ladder levels of phases ``0 .. phases-1`` from the exploration samples alone."""
    ladder = world.instance.d_ladder
    store = RidgeState(world.d, lam=0.0)
    theta_hat = np.ones(world.d)
    out = []
    t = 0
    for phase in dim_schedule(T0, delta, threshold_base):
        D = support_threshold(theta_hat, phase.threshold)
        out.append(active_ladder_level(D.indices, ladder))
        if len(out) == phases:
            break
        t += phase.length
        t = _explore(world, store, seed, phase.index, t, phase.explore_length, phase.explore_length)
        theta_hat = exploration_refit(store)
    return out


def linucb_run(world, horizon: int, delta: float, level: int | None = None, trial: int = 0,
               seed: int = 0, name: str = "linucb_full") -> RegretTrace:
    """Fixed-dimension base learner at ladder ``level`` (top level when omitted)."""
    ladder = world.instance.d_ladder
    level = len(ladder) if level is None else level
    width = ladder[level - 1]
    scale = feature_scale(world.instance.tau, horizon, world.K, delta)
    learner = LinUCBLearner(width, world.sigma / scale, delta)
    regrets = np.zeros(horizon)
    _play_truncated(world, learner, width, scale, 0, horizon, regrets)
    return RegretTrace.from_instant(name, regrets, [(0, "ladder", level)], trial, seed)
