from __future__ import annotations

import math

import numpy as np

from ..trace import RegretTrace
from .dim import oful_restricted_run
from .finite import linucb_run
from .norm import oful_plus_run

NORM_ORACLE = "norm_oracle"
DIM_ORACLE = "dim_oracle"


def ucb1_select(means, counts, t: int, sigma: float) -> int:
    """UCB1 with noise scale ``sigma``; ties go to the lowest index."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 1):
        raise ValueError("UCB1 needs every arm pulled at least once")
    bonus = sigma * np.sqrt(2.0 * math.log(t) / counts)
    return int(np.argmax(np.asarray(means, dtype=float) + bonus))


def ucb1_run(world, horizon: int, trial: int = 0, seed: int = 0, name: str = "ucb1") -> RegretTrace:
    """Context-blind UCB1 on a mixture world."""
    K = world.K
    regrets = np.zeros(horizon)
    counts = np.zeros(K)
    means = np.zeros(K)
    for t in range(horizon):
        arm = t if t < K else ucb1_select(means, counts, t, world.sigma)
        r = world.reward(t, arm)
        counts[arm] += 1
        means[arm] += (r - means[arm]) / counts[arm]
        regrets[t] = world.regret(t, arm)
    return RegretTrace.from_instant(name, regrets, [], trial, seed)


def oracle_run(world, mode: str, horizon: int, delta: float, trial: int = 0, seed: int = 0,
               candidates: int = 512, name: str = "oracle") -> RegretTrace:
    """Baseline told the true complexity.

    ``norm_oracle`` runs OFUL+ with ``b = max(||theta*||, 1)``;
    ``dim_oracle`` runs OFUL on the true support (continuum worlds) or the
    base learner at the true ladder level (finite worlds).
    """
    inst = world.instance
    if mode == NORM_ORACLE:
        b = max(float(np.linalg.norm(inst.theta_star)), 1.0)
        return oful_plus_run(world, horizon, b, delta, trial, seed, name)
    if mode == DIM_ORACLE:
        if hasattr(inst, "d_ladder"):
            return linucb_run(world, horizon, delta, inst.m_star, trial, seed, name)
        return oful_restricted_run(world, horizon, delta, inst.support, seed, candidates, trial, name)
    raise ValueError(f"unknown oracle mode {mode!r}")
