"""OFUL+ and the norm-adaptive ALB-Norm algorithm for mixture bandits.

Worlds consumed here expose ``K``, ``d``, ``sigma``, ``rho_min`` and
per-round ``contexts(t)``, ``reward(t, arm)`` and ``regret(t, arm)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..confidence import (
    ConfidenceBall,
    RadiusParams,
    RidgeState,
    bias_bonus,
    initial_norm_estimate,
    k_delta,
    ridge_solve,
    ridge_update,
)
from ..envs import keyed_generator
from ..trace import RegretTrace
from .schedule import norm_schedule

POLICY_STREAM = 11
_ARM_PICK = 1


@dataclass
class OfulPlusState:
    counts: np.ndarray
    means: np.ndarray
    ridge: RidgeState
    ball: ConfidenceBall
    params: RadiusParams
    round: int = 0


def new_oful_plus(seed_rewards, params: RadiusParams) -> OfulPlusState:
    """Fresh OFUL+ whose per-arm means start from one seed pull each."""
    seed_rewards = np.asarray(seed_rewards, dtype=float)
    if seed_rewards.shape != (params.K,):
        raise ValueError(f"need one seed reward per arm ({params.K}), got {seed_rewards.shape}")
    ball = ConfidenceBall(np.zeros(params.d), k_delta(params.b, 1, params))
    return OfulPlusState(
        counts=np.ones(params.K),
        means=seed_rewards.copy(),
        ridge=RidgeState(params.d, lam=1.0),
        ball=ball,
        params=params,
    )


def oful_plus_index(state: OfulPlusState, contexts) -> np.ndarray:
    """Per-arm optimistic value; the max over the l2 ball is closed form."""
    ctx = np.asarray(contexts, dtype=float)
    mu_tilde = bias_bonus(state.means, state.counts, state.params)
    return mu_tilde + ctx @ state.ball.center + state.ball.radius * np.linalg.norm(ctx, axis=1)


def oful_plus_select(state: OfulPlusState, contexts) -> int:
    if np.any(state.counts < 1):
        raise ValueError("OFUL+ needs every arm pulled at least once before selecting")
    return int(np.argmax(oful_plus_index(state, contexts)))


def oful_plus_observe(state: OfulPlusState, contexts, arm: int, reward: float) -> OfulPlusState:
    """Bias-correct the reward with the pre-update bonus, then refit the ball."""
    x = np.asarray(contexts, dtype=float)[arm]
    p = state.params
    mu_tilde = bias_bonus(state.means[arm], state.counts[arm], p)
    ridge_update(state.ridge, x, reward - mu_tilde)
    n = state.counts[arm]
    state.means[arm] = (state.means[arm] * n + reward) / (n + 1)
    state.counts[arm] = n + 1
    state.round += 1
    state.ball = ConfidenceBall(ridge_solve(state.ridge), k_delta(p.b, state.round, p))
    return state


def norm_refine(ball: ConfidenceBall) -> float:
    """Largest norm in the ball: ``||center|| + radius``."""
    return float(np.linalg.norm(ball.center) + ball.radius)


def _play_oful_plus(world, state: OfulPlusState, t: int, rounds: int, regrets: np.ndarray) -> int:
    for _ in range(rounds):
        ctx = world.contexts(t)
        arm = oful_plus_select(state, ctx)
        oful_plus_observe(state, ctx, arm, world.reward(t, arm))
        regrets[t] = world.regret(t, arm)
        t += 1
    return t


def _seed_pulls(world, t: int, regrets: np.ndarray) -> tuple[np.ndarray, int]:
    rewards = np.empty(world.K)
    for arm in range(world.K):
        rewards[arm] = world.reward(t, arm)
        regrets[t] = world.regret(t, arm)
        t += 1
    return rewards, t


def alb_norm_run(world, horizon: int, tau: int, T1: int, delta1: float, delta_s: float | None = None,
                 seed: int = 0, b1_override: float | None = None, trial: int = 0,
                 name: str = "alb_norm") -> RegretTrace:
    """Run ALB-Norm for ``horizon`` rounds.

    The 2*tau norm-estimation pulls and the K seed pulls count toward the
    horizon.  OFUL+ restarts every epoch from the seed rewards, and the norm
    bound is refined only after an epoch completes.  ``b1_override``
    replaces the paired-difference estimate (the exploration pulls are
    still made).
    """
    K, d = world.K, world.d
    if tau < d:
        raise ValueError(f"tau must be >= d ({d}), got {tau}")
    if horizon < 2 * tau + K:
        raise ValueError(f"horizon {horizon} shorter than warm-up 2*tau + K = {2 * tau + K}")
    delta_s = delta1 if delta_s is None else delta_s
    rng = keyed_generator(seed, POLICY_STREAM, _ARM_PICK)
    regrets = np.zeros(horizon)

    arm0 = int(rng.integers(K))
    rewards = np.empty(2 * tau)
    contexts = np.empty((2 * tau, d))
    t = 0
    for s in range(2 * tau):
        contexts[s] = world.contexts(t)[arm0]
        rewards[s] = world.reward(t, arm0)
        regrets[t] = world.regret(t, arm0)
        t += 1
    if b1_override is not None:
        b = float(b1_override)
    else:
        b, _ = initial_norm_estimate(rewards, contexts, world.sigma, delta_s)

    seed_rewards, t = _seed_pulls(world, t, regrets)

    snapshots = []
    for epoch in norm_schedule(T1, delta1):
        if t >= horizon:
            break
        epoch = replace(epoch, bound=b)
        snapshots.append((epoch.index, "b", b))
        params = RadiusParams(b=b, delta=epoch.delta, sigma=world.sigma, rho_min=world.rho_min,
                              d=d, K=K, horizon=epoch.length)
        state = new_oful_plus(seed_rewards, params)
        rounds = min(epoch.length, horizon - t)
        t = _play_oful_plus(world, state, t, rounds, regrets)
        if rounds == epoch.length:
            b = norm_refine(state.ball)
    return RegretTrace.from_instant(name, regrets, snapshots, trial, seed)


def oful_plus_run(world, horizon: int, b: float, delta: float, trial: int = 0, seed: int = 0,
                  name: str = "oful_plus") -> RegretTrace:
    """Non-adaptive OFUL+ with a fixed norm bound after one seed pull per arm."""
    K = world.K
    if horizon <= K:
        raise ValueError(f"horizon {horizon} must exceed K = {K}")
    regrets = np.zeros(horizon)
    seed_rewards, t = _seed_pulls(world, 0, regrets)
    params = RadiusParams(b=float(b), delta=delta, sigma=world.sigma, rho_min=world.rho_min,
                          d=world.d, K=K, horizon=horizon - K)
    state = new_oful_plus(seed_rewards, params)
    _play_oful_plus(world, state, t, horizon - K, regrets)
    return RegretTrace.from_instant(name, regrets, [(1, "b", float(b))], trial, seed)
