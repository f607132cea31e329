"""Continuum-armed OFUL and the dimension-adaptive ALB-Dim algorithm."""
from __future__ import annotations

import math

import numpy as np

from ..confidence import (
    RidgeState,
    SupportEstimate,
    exploration_refit,
    ridge_solve,
    ridge_update_batch,
    support_threshold,
)
from ..envs import keyed_generator, sample_uniform_sphere
from ..trace import RegretTrace
from .schedule import dim_schedule

POLICY_STREAM = 12
_POOL = 1
_EXPLORE = 2

EXPLORE_CHUNK = 65536


def oful_beta(sigma: float, delta: float, logdet_ratio: float, norm_bound: float = 1.0,
              lam: float = 1.0) -> float:
    """Self-normalized ellipsoid radius ``sigma sqrt(2 log(1/delta) + log det(V)/det(lam I)) + sqrt(lam) S``."""
    return sigma * math.sqrt(2.0 * math.log(1.0 / delta) + logdet_ratio) + math.sqrt(lam) * norm_bound


def oful_continuum_select(ridge: RidgeState, beta: float, candidates: int, rng: np.random.Generator,
                          active=None, dim: int | None = None) -> np.ndarray:
    """Maximize ``<x, theta> + beta ||x||_{V^-1}`` over a candidate set on the sphere.

    Candidates are ``theta/||theta||`` (when nonzero) plus ``candidates``
    fresh uniform draws.  With ``active`` and ``dim`` the ridge lives on the
    active coordinates and the result is embedded in ``dim`` coordinates
    with zeros elsewhere.
    """
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    k = ridge.dim
    x = np.zeros(k)
    if k:
        theta = ridge_solve(ridge)
        inv = ridge.inverse if ridge.inverse is not None else np.linalg.inv(ridge.gram)
        cands = []
        norm = np.linalg.norm(theta)
        if norm > 0:
            cands.append((theta / norm)[None, :])
        if candidates:
            cands.append(sample_uniform_sphere(k, rng, size=candidates))
        C = np.vstack(cands) if cands else np.zeros((0, k))
        if C.shape[0]:
            quad = np.einsum("ij,jk,ik->i", C, inv, C)
            x = C[int(np.argmax(C @ theta + beta * np.sqrt(np.maximum(quad, 0.0))))]
    if active is None:
        return x
    out = np.zeros(dim if dim is not None else k)
    out[np.asarray(active, dtype=np.intp)] = x
    return out


class ContinuumOFUL:
    """OFUL on the unit ball of ``dim`` coordinates.

    The candidate pool is drawn once per instance and its quadratic forms
    are tracked through the same rank-one updates as the inverse design,
    so a round costs O(candidates * dim) rather than O(candidates * dim^2).
    """

    def __init__(self, dim: int, sigma: float, delta: float, rng: np.random.Generator,
                 candidates: int = 512, norm_bound: float = 1.0, lam: float = 1.0):
        self.dim = dim
        self.sigma = sigma
        self.delta = delta
        self.norm_bound = norm_bound
        self.lam = lam
        self.ridge = RidgeState(dim, lam)
        self.logdet_ratio = 0.0
        if dim and candidates:
            self.pool = sample_uniform_sphere(dim, rng, size=candidates)
        else:
            self.pool = np.zeros((0, dim))
        self.pool_quad = np.full(self.pool.shape[0], 1.0 / lam)

    @property
    def beta(self) -> float:
        return oful_beta(self.sigma, self.delta, self.logdet_ratio, self.norm_bound, self.lam)

    def select(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros(0)
        inv = self.ridge.inverse
        theta = inv @ self.ridge.moment
        beta = self.beta
        best, best_val = None, -np.inf
        norm = math.sqrt(theta @ theta)
        if norm > 0:
            g = theta / norm
            best, best_val = g, norm + beta * math.sqrt(max(g @ (inv @ g), 0.0))
        if self.pool.shape[0]:
            vals = self.pool @ theta + beta * np.sqrt(np.maximum(self.pool_quad, 0.0))
            j = int(np.argmax(vals))
            if vals[j] > best_val:
                best = self.pool[j]
        return best

    def observe(self, x, y: float) -> None:
        if self.dim == 0:
            return
        r = self.ridge
        u = r.inverse @ x
        denom = 1.0 + x @ u
        self.pool_quad -= (self.pool @ u) ** 2 / denom
        self.logdet_ratio += math.log(denom)
        # Same update as ridge_update, reusing u.
        r.gram += np.multiply.outer(x, x)
        r.moment += y * x
        r.count += 1
        r.inverse -= np.multiply.outer(u, u / denom)


def _play_restricted(world, learner: ContinuumOFUL, active: np.ndarray, t: int, rounds: int,
                     regrets: np.ndarray) -> int:
    theta_active = world.instance.theta_star[active]
    best = world.instance.best_mean
    for _ in range(rounds):
        xa = learner.select()
        mean = float(xa @ theta_active) if theta_active.size else 0.0
        learner.observe(xa, mean + world.noise(t))
        regrets[t] = best - mean
        t += 1
    return t


def _explore(world, store: RidgeState, seed: int, phase: int, t: int, n: int,
             regrets: np.ndarray | None = None) -> int:
    """Play ``n`` uniform-sphere arms from the phase's exploration stream."""
    rng = keyed_generator(seed, POLICY_STREAM, _EXPLORE, phase)
    done = 0
    while done < n:
        m = min(EXPLORE_CHUNK, n - done)
        X = sample_uniform_sphere(world.d, rng, size=m)
        y = world.rewards(t, X)
        ridge_update_batch(store, X, y)
        if regrets is not None:
            regrets[t:t + m] = world.regrets(X)
        t += m
        done += m
    return t


def alb_dim_run(world, horizon: int, T0: int, delta: float, seed: int = 0,
                threshold_base: float = 2.0, candidates: int = 512, trial: int = 0,
                name: str = "alb_dim") -> RegretTrace:
    """ALB-Dim on a unit-ball world for ``horizon`` rounds.

    Each phase runs a fresh OFUL on the active set, then explores uniformly
    on the sphere, then refits on every exploration sample so far and
    thresholds the refit at half the phase threshold.
    """
    d = world.d
    store = RidgeState(d, lam=0.0)
    theta_hat = np.ones(d)
    regrets = np.zeros(horizon)
    snapshots = []
    t = 0
    for phase in dim_schedule(T0, delta, threshold_base):
        if t >= horizon:
            break
        D = support_threshold(theta_hat, phase.threshold)
        snapshots.append((phase.index, "support", D.indices))
        learner = ContinuumOFUL(len(D), world.sigma, phase.delta,
                                keyed_generator(seed, POLICY_STREAM, _POOL, phase.index),
                                candidates=candidates)
        t = _play_restricted(world, learner, D.as_array(), t, min(phase.length, horizon - t), regrets)
        n_exp = min(phase.explore_length, horizon - t)
        t = _explore(world, store, seed, phase.index, t, n_exp, regrets)
        if n_exp < phase.explore_length:
            break
        theta_hat = exploration_refit(store)
    return RegretTrace.from_instant(name, regrets, snapshots, trial, seed)


def support_trajectory(world, T0: int, delta: float, phases: int, seed: int = 0,
                       threshold_base: float = 2.0) -> list[SupportEstimate]:
    """Active sets of phases ``0 .. phases-1`` as ALB-Dim would form them.

    The active sets depend only on the exploration samples, which are keyed
    by phase and round, so the regret blocks can be skipped.  The result
    equals the support snapshots of ``alb_dim_run`` with the same seed.
    """
    d = world.d
    store = RidgeState(d, lam=0.0)
    theta_hat = np.ones(d)
    out = []
    t = 0
    for phase in dim_schedule(T0, delta, threshold_base):
        out.append(support_threshold(theta_hat, phase.threshold))
        if len(out) == phases:
            break
        t += phase.length
        t = _explore(world, store, seed, phase.index, t, phase.explore_length)
        theta_hat = exploration_refit(store)
    return out


def oful_restricted_run(world, horizon: int, delta: float, support=None, seed: int = 0,
                        candidates: int = 512, trial: int = 0, name: str = "oful") -> RegretTrace:
    """Single OFUL over ``support`` (all coordinates when omitted)."""
    active = np.arange(world.d) if support is None else np.asarray(sorted(support), dtype=np.intp)
    learner = ContinuumOFUL(active.size, world.sigma, delta,
                            keyed_generator(seed, POLICY_STREAM, _POOL, 0), candidates=candidates)
    regrets = np.zeros(horizon)
    _play_restricted(world, learner, active, 0, horizon, regrets)
    snapshots = [(0, "support", tuple(int(i) for i in active))]
    return RegretTrace.from_instant(name, regrets, snapshots, trial, seed)
