"""Estimation and confidence-width mathematics.

Incremental ridge regression, the explicit OFUL+ radius formulas, the
paired-difference initial norm estimate, support thresholding and the
theoretical initial phase length for the dimension-adaptive algorithms.
All logarithms are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class SingularDesignError(np.linalg.LinAlgError):
    """Raised when a least-squares design does not have full column rank."""

    def __init__(self, message: str, rank: int, dim: int):
        super().__init__(message)
        self.rank = rank
        self.dim = dim


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass
class RidgeState:
    """Running sufficient statistics for regularized least squares.

    ``gram`` holds ``lam * I + sum x x^T`` and ``moment`` holds ``sum y x``.
    When ``lam > 0`` the inverse of ``gram`` is tracked with rank-one
    Sherman-Morrison updates so that per-round solves are O(d^2).
    """

    dim: int
    lam: float = 1.0
    gram: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    moment: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    count: int = 0
    inverse: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 0:
            raise ValueError(f"dim must be nonnegative, got {self.dim}")
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.gram is None:
            self.gram = self.lam * np.eye(self.dim)
        if self.moment is None:
            self.moment = np.zeros(self.dim)
        if self.inverse is None and self.lam > 0 and self.count == 0:
            self.inverse = np.eye(self.dim) / self.lam

    def copy(self) -> "RidgeState":
        return RidgeState(
            dim=self.dim,
            lam=self.lam,
            gram=self.gram.copy(),
            moment=self.moment.copy(),
            count=self.count,
            inverse=None if self.inverse is None else self.inverse.copy(),
        )


@dataclass(frozen=True)
class ConfidenceBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")

    def contains(self, theta) -> bool:
        return float(np.linalg.norm(np.asarray(theta) - self.center)) <= self.radius


@dataclass(frozen=True)
class RadiusParams:
    """Constants threaded through the OFUL+ bonus and radius formulas.

    ``b`` is the working norm bound, ``horizon`` the epoch length the
    confidence level is union-bounded over, ``K`` the arm count.
    """

    b: float
    delta: float
    sigma: float
    rho_min: float
    d: int
    K: int
    horizon: int

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.rho_min > 0:
            raise ValueError(f"rho_min must be positive, got {self.rho_min}")
        if self.b < 0 or self.sigma < 0:
            raise ValueError("b and sigma must be nonnegative")
        if self.d < 1 or self.K < 1 or self.horizon < 1:
            raise ValueError("d, K and horizon must be positive")


@dataclass(frozen=True)
class SupportEstimate:
    indices: tuple[int, ...]
    threshold: float

    def __len__(self):
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)


# ---------------------------------------------------------------------------
# Ridge regression
# ---------------------------------------------------------------------------

def ridge_update(state: RidgeState, x, y: float) -> RidgeState:
    """Absorb one sample ``(x, y)`` into ``state`` in place and return it."""
    x = np.asarray(x, dtype=float)
    if x.shape != (state.dim,):
        raise ValueError(f"feature has shape {x.shape}, expected ({state.dim},)")
    state.gram += np.outer(x, x)
    state.moment += y * x
    state.count += 1
    if state.inverse is not None:
        u = state.inverse @ x
        state.inverse -= np.outer(u, u) / (1.0 + x @ u)
    return state


def ridge_update_batch(state: RidgeState, X, y) -> RidgeState:
    """Absorb rows of ``X`` with targets ``y``; drops the tracked inverse."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != state.dim or X.shape[0] != y.shape[0]:
        raise ValueError(f"batch shapes {X.shape}, {y.shape} do not match dim {state.dim}")
    state.gram += X.T @ X
    state.moment += X.T @ y
    state.count += X.shape[0]
    state.inverse = None
    return state


def ridge_solve(state: RidgeState) -> np.ndarray:
    """Return the estimate solving ``gram @ theta = moment``."""
    if state.dim == 0:
        return np.zeros(0)
    if state.lam == 0:
        rank = int(np.linalg.matrix_rank(state.gram))
        if rank < state.dim:
            raise SingularDesignError(
                f"design is rank deficient (rank {rank} < dim {state.dim}); "
                "add samples or use a positive regularizer",
                rank=rank,
                dim=state.dim,
            )
    if state.inverse is not None:
        return state.inverse @ state.moment
    return np.linalg.solve(state.gram, state.moment)


def exploration_refit(state: RidgeState, fallback: float = 1e-8) -> np.ndarray:
    """Least squares on an unregularized store with a tiny-ridge fallback.

    The fallback engages while the store holds fewer samples than
    dimensions, or if the design turns out numerically singular.
    """
    if state.dim == 0:
        return np.zeros(0)
    if state.count >= state.dim:
        try:
            theta = np.linalg.solve(state.gram, state.moment)
            if np.all(np.isfinite(theta)):
                return theta
        except np.linalg.LinAlgError:
            pass
    return np.linalg.solve(state.gram + fallback * np.eye(state.dim), state.moment)


# ---------------------------------------------------------------------------
# Radius formulas
# ---------------------------------------------------------------------------

def t_min(params: RadiusParams) -> float:
    rho = params.rho_min
    return (16.0 / rho**2 + 8.0 / (3.0 * rho)) * math.log(
        2.0 * params.d * params.horizon / params.delta
    )


def m_delta(b: float, t: int, params: RadiusParams) -> float:
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    d = params.d
    inner = d / 2.0 * math.log1p(t / d) + math.log(1.0 / params.delta)
    return b + math.sqrt(2.0 * params.sigma**2 * inner)


def upsilon_delta(b: float, t: int, params: RadiusParams) -> float:
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    L = math.log(2.0 * params.K * params.horizon / params.delta)
    scale = b + 2.0 + params.sigma * math.sqrt(1.0 + 2.0 * L)
    return (10.0 / 3.0) * scale * (L + math.sqrt(t * L + L * L))


def k_delta(b: float, t: int, params: RadiusParams) -> float:
    """Confidence-ball radius after ``t`` rounds.

    Below ``t_min`` the unscaled sum is returned; at or above it the
    variance-shrunk branch is used.
    """
    M = m_delta(b, t, params)
    U = upsilon_delta(b, t, params)
    if t < t_min(params):
        return M + U
    z = 1.0 + params.rho_min * t / 2.0
    return M / math.sqrt(z) + U / z


def bias_bonus(mean, pulls, params: RadiusParams):
    """Optimistic per-arm bias estimate; vectorizes over ``mean``/``pulls``."""
    n = np.asarray(pulls, dtype=float)
    if np.any(n < 1):
        raise ValueError("every arm must be pulled at least once before its bonus is defined")
    noise_term = params.sigma * np.sqrt(
        (1.0 + n) / n**2 * (1.0 + 2.0 * np.log(params.K * np.sqrt(1.0 + n) / params.delta))
    )
    norm_term = params.b * np.sqrt(2.0 * params.d / n * math.log(1.0 / params.delta))
    out = np.asarray(mean, dtype=float) + noise_term + norm_term
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Initial norm estimate
# ---------------------------------------------------------------------------

def norm_upper_bound(estimate_norm: float, sigma: float, d: int, tau: int, delta_s: float) -> float:
    """``max(||theta_ls|| + sqrt(2) sigma sqrt(d/tau log(1/delta_s)), 1)``."""
    width = math.sqrt(2.0) * sigma * math.sqrt(d / tau * math.log(1.0 / delta_s))
    return max(estimate_norm + width, 1.0)


def initial_norm_estimate(
    rewards: Sequence[float], contexts, sigma: float, delta_s: float
) -> tuple[float, np.ndarray]:
    """Norm bound from 2*tau single-arm samples via paired differencing.

    Differencing consecutive pulls cancels the arm bias; the resulting
    unregularized least-squares estimate is inflated by its deviation
    width and floored at 1.
    """
    r = np.asarray(rewards, dtype=float)
    C = np.asarray(contexts, dtype=float)
    if r.ndim != 1 or r.size == 0 or r.size % 2:
        raise ValueError(f"need an even, positive number of rewards, got {r.size}")
    if C.shape[0] != r.size:
        raise ValueError(f"{C.shape[0]} contexts for {r.size} rewards")
    if not 0 < delta_s < 1:
        raise ValueError(f"delta_s must lie in (0, 1), got {delta_s}")
    tau = r.size // 2
    d = C.shape[1]
    y = r[0::2] - r[1::2]
    X = C[0::2] - C[1::2]
    theta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < d:
        raise SingularDesignError(
            f"differenced design has rank {rank} < d={d}; increase tau (currently {tau})",
            rank=int(rank),
            dim=d,
        )
    b1 = norm_upper_bound(float(np.linalg.norm(theta)), sigma, d, tau, delta_s)
    return b1, theta


# ---------------------------------------------------------------------------
# Support threshold and initial phase length
# ---------------------------------------------------------------------------

def support_threshold(theta_hat, epsilon: float) -> SupportEstimate:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    theta_hat = np.asarray(theta_hat, dtype=float)
    cut = epsilon / 2.0
    idx = np.flatnonzero(np.abs(theta_hat) >= cut)
    return SupportEstimate(indices=tuple(int(i) for i in idx), threshold=cut)


def theoretical_t0(
    d: int, delta: float, sigma: float, lambda_min: float, lambda_max: float, scale: float = 1.0
) -> int:
    """Smallest integer ``T0`` whose square root clears both sample-size terms.

    ``scale`` multiplies the right-hand side (the feature scaling in the
    finite-armed variant; 1 for the unit ball).  For uniform-sphere
    exploration ``lambda_min = lambda_max = 1/d``.
    """
    if not lambda_min > 0:
        raise ValueError(f"lambda_min must be positive, got {lambda_min}")
    if lambda_max < lambda_min:
        raise ValueError("lambda_max must be >= lambda_min")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    log_term = math.log(2.0 * d / delta)
    noise = 32.0 * sigma**2 / lambda_min**2 * log_term
    design = (
        (4.0 / 3.0)
        * (6.0 * lambda_max + lambda_min)
        * (d + lambda_max)
        / lambda_min**2
        * log_term
    )
    return int(math.ceil((scale * max(noise, design)) ** 2))
