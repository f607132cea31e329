"""Simulated ground-truth bandit worlds.

Instances (``MixtureInstance``, ``ContinuumInstance``, ``NestedFiniteInstance``)
are immutable descriptions of the truth.  Worlds wrap an instance with
counter-keyed random streams: the context and noise drawn at round ``t``
depend only on ``(seed, stream, t)``, so competing algorithms run on the
same seed see identical randomness wherever their actions coincide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

STANDARD_NORMAL = "standard_normal"
UNIFORM_SPHERE = "uniform_sphere"
CONTEXT_LAWS = (STANDARD_NORMAL, UNIFORM_SPHERE)

# stream tags for keyed generators
CONTEXT_STREAM = 1
NOISE_STREAM = 2
INSTANCE_STREAM = 3
FEATURE_STREAM = 4


def keyed_generator(*key: int) -> np.random.Generator:
    """Philox generator determined entirely by the integer ``key``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


class BlockStream:
    """Standard normal draws of fixed per-round shape, addressable by round.

    Rounds are grouped into blocks; block ``c`` is generated from the key
    ``(*key, c)`` so any round can be read without replaying earlier ones.
    """

    def __init__(self, key: Sequence[int], shape: tuple[int, ...], block: int = 1024):
        self.key = tuple(int(k) for k in key)
        self.shape = tuple(shape)
        self.block = int(block)
        self._index = -1
        self._data: np.ndarray | None = None

    def _load(self, c: int) -> np.ndarray:
        if c != self._index:
            rng = keyed_generator(*self.key, c)
            self._data = rng.standard_normal((self.block,) + self.shape)
            self._index = c
        return self._data  # type: ignore[return-value]

    def __getitem__(self, t: int) -> np.ndarray:
        c, r = divmod(int(t), self.block)
        return self._load(c)[r]

    def span(self, t0: int, n: int) -> np.ndarray:
        """Rows for rounds ``t0 .. t0+n-1`` stacked into one array."""
        out = np.empty((n,) + self.shape)
        t, filled = int(t0), 0
        while filled < n:
            c, r = divmod(t, self.block)
            take = min(self.block - r, n - filled)
            out[filled:filled + take] = self._load(c)[r:r + take]
            filled += take
            t += take
        return out


# ---------------------------------------------------------------------------
# Sphere sampling
# ---------------------------------------------------------------------------

def sample_uniform_sphere(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) from the unit sphere in ``d`` dimensions."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    shape = (d,) if size is None else (size, d)
    z = rng.standard_normal(shape)
    return _normalize_rows(z)


def _normalize_rows(z: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    # a zero gaussian vector has probability 0; guard anyway
    norms[norms == 0] = 1.0
    return z / norms


def sparse_vector(d: int, d_star: int, gamma: float, rng: np.random.Generator,
                  support: Sequence[int] | None = None) -> np.ndarray:
    """A ``d_star``-sparse vector of norm <= 1 whose smallest nonzero magnitude is ``gamma``.

    Magnitudes are drawn from U[gamma, 2 gamma] with one entry pinned to
    gamma; signs are random.  If the norm would exceed 1 the larger entries
    are pulled toward gamma.
    """
    if not 0 < d_star <= d:
        raise ValueError(f"need 0 < d_star <= d, got d_star={d_star}, d={d}")
    if gamma <= 0 or gamma * math.sqrt(d_star) > 1:
        raise ValueError(f"gamma={gamma} is incompatible with d_star={d_star} and norm <= 1")
    if support is None:
        support = np.sort(rng.choice(d, size=d_star, replace=False))
    support = np.asarray(support, dtype=np.intp)
    mags = rng.uniform(gamma, 2 * gamma, size=d_star)
    mags[rng.integers(d_star)] = gamma
    excess = mags - gamma
    norm = np.linalg.norm(mags)
    if norm > 1:
        # solve ||gamma + s * excess|| = 1 for the shrink factor s in [0, 1)
        a = excess @ excess
        b = 2 * gamma * excess.sum()
        c = d_star * gamma**2 - 1
        s = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
        mags = gamma + s * excess
    signs = rng.choice([-1.0, 1.0], size=d_star)
    theta = np.zeros(d)
    theta[support] = signs * mags
    return theta


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureInstance:
    """K-armed mixture bandit: arm ``i`` pays ``mu_i + <alpha_i, theta*> + noise``."""

    theta_star: np.ndarray
    biases: np.ndarray
    sigma: float
    context_law: str = STANDARD_NORMAL

    def __post_init__(self):
        if self.context_law not in CONTEXT_LAWS:
            raise ValueError(f"unknown context law {self.context_law!r}")
        if np.any(np.abs(self.biases) > 1):
            raise ValueError("biases must lie in [-1, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def d(self) -> int:
        return int(self.theta_star.shape[0])

    @property
    def K(self) -> int:
        return int(self.biases.shape[0])

    @property
    def rho_min(self) -> float:
        return 1.0 if self.context_law == STANDARD_NORMAL else 1.0 / self.d

    def mean_rewards(self, contexts) -> np.ndarray:
        return self.biases + np.asarray(contexts) @ self.theta_star


@dataclass(frozen=True)
class ContinuumInstance:
    """Linear bandit over the unit ball with a sparse parameter."""

    theta_star: np.ndarray
    sigma: float

    def __post_init__(self):
        if np.linalg.norm(self.theta_star) > 1 + 1e-12:
            raise ValueError("theta_star must have norm <= 1")

    @property
    def d(self) -> int:
        return int(self.theta_star.shape[0])

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.theta_star))

    @property
    def d_star(self) -> int:
        return len(self.support)

    @property
    def gamma(self) -> float:
        nz = np.abs(self.theta_star[self.theta_star != 0])
        return float(nz.min()) if nz.size else 0.0

    @property
    def best_arm(self) -> np.ndarray:
        norm = np.linalg.norm(self.theta_star)
        if norm == 0:
            return np.zeros(self.d)
        return self.theta_star / norm

    @property
    def best_mean(self) -> float:
        return float(np.linalg.norm(self.theta_star))


@dataclass(frozen=True)
class NestedFiniteInstance:
    """Finite-armed contextual bandit with nested feature maps.

    The full feature map draws ``phi^M(x_t, a) ~ N(0, tau^2/d I)`` per round
    and arm; the map of ladder level ``m`` is its first ``d_ladder[m-1]``
    coordinates.  Ladder levels are numbered from 1.
    """

    d_ladder: tuple[int, ...]
    theta_star: np.ndarray
    K: int
    tau: float
    sigma: float

    def __post_init__(self):
        ladder = tuple(int(x) for x in self.d_ladder)
        if any(b <= a for a, b in zip(ladder, ladder[1:])) or ladder[0] < 1:
            raise ValueError(f"ladder must be strictly increasing positive dims, got {ladder}")
        if ladder[-1] != self.theta_star.shape[0]:
            raise ValueError("top of ladder must equal dim(theta_star)")
        object.__setattr__(self, "d_ladder", ladder)

    @property
    def d(self) -> int:
        return self.d_ladder[-1]

    @property
    def m_star(self) -> int:
        nz = np.flatnonzero(self.theta_star)
        top = int(nz.max()) + 1 if nz.size else 0
        return ladder_level(top - 1 if top else -1, self.d_ladder)

    def sample_features(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((self.K, self.d)) * (self.tau / math.sqrt(self.d))

    def truncate(self, features, m: int) -> np.ndarray:
        return np.asarray(features)[..., : self.d_ladder[m - 1]]

    def mean_rewards(self, features) -> np.ndarray:
        return np.asarray(features) @ self.theta_star


def ladder_level(max_index: int, ladder: Sequence[int]) -> int:
    """Smallest 1-based ladder level whose dimension covers 0-based ``max_index``."""
    for m, dm in enumerate(ladder, start=1):
        if dm >= max_index + 1:
            return m
    raise ValueError(f"index {max_index} exceeds the top ladder dimension {ladder[-1]}")


def make_mixture_instance(d: int, K: int, theta_norm: float, sigma: float,
                          rng: np.random.Generator, context_law: str = STANDARD_NORMAL,
                          bias_low: float = -1.0, bias_high: float = 1.0) -> MixtureInstance:
    direction = sample_uniform_sphere(d, rng)
    biases = rng.uniform(bias_low, bias_high, size=K)
    return MixtureInstance(theta_norm * direction, biases, sigma, context_law)


def make_continuum_instance(d: int, d_star: int, gamma: float, sigma: float,
                            rng: np.random.Generator) -> ContinuumInstance:
    return ContinuumInstance(sparse_vector(d, d_star, gamma, rng), sigma)


def make_nested_instance(ladder: Sequence[int], m_star: int, gamma: float, K: int, tau: float,
                         sigma: float, rng: np.random.Generator) -> NestedFiniteInstance:
    ladder = tuple(int(x) for x in ladder)
    width = ladder[m_star - 1]
    theta = sparse_vector(ladder[-1], width, gamma, rng, support=range(width))
    return NestedFiniteInstance(ladder, theta, K, tau, sigma)


# ---------------------------------------------------------------------------
# Stateless environment operations
# ---------------------------------------------------------------------------

def sample_contexts(instance: MixtureInstance, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((instance.K, instance.d))
    if instance.context_law == UNIFORM_SPHERE:
        z = _normalize_rows(z)
    return z


def _check_arm(instance, arm) -> int:
    arm = int(arm)
    if not 0 <= arm < instance.K:
        raise IndexError(f"arm {arm} out of range for K={instance.K}")
    return arm


def pull(instance, contexts, arm, rng: np.random.Generator) -> float:
    """Noisy reward of ``arm``.  For continuum instances ``arm`` is the action vector."""
    noise = instance.sigma * rng.standard_normal()
    if isinstance(instance, ContinuumInstance):
        return float(np.asarray(arm) @ instance.theta_star) + noise
    arm = _check_arm(instance, arm)
    return float(instance.mean_rewards(contexts)[arm]) + noise


def instant_regret(instance, contexts, arm) -> float:
    """Gap between the best mean and the played mean (never negative)."""
    if isinstance(instance, ContinuumInstance):
        return max(instance.best_mean - float(np.asarray(arm) @ instance.theta_star), 0.0)
    arm = _check_arm(instance, arm)
    means = instance.mean_rewards(contexts)
    return float(means.max() - means[arm])


@dataclass(frozen=True)
class RoundObservation:
    contexts: np.ndarray
    chosen: object
    reward: float
    instant_regret: float


# ---------------------------------------------------------------------------
# Worlds: instances bound to keyed streams
# ---------------------------------------------------------------------------

class MixtureWorld:
    """Mixture instance with per-(round, arm) contexts and noise."""

    def __init__(self, instance: MixtureInstance, seed: int):
        self.instance = instance
        self.seed = int(seed)
        self.K, self.d = instance.K, instance.d
        self.sigma = instance.sigma
        self.rho_min = instance.rho_min
        self._ctx = BlockStream((seed, CONTEXT_STREAM), (self.K, self.d))
        self._noise = BlockStream((seed, NOISE_STREAM), (self.K,))
        self._ctx_t = -1
        self._ctx_cache: np.ndarray | None = None

    def contexts(self, t: int) -> np.ndarray:
        if t != self._ctx_t:
            z = self._ctx[t]
            if self.instance.context_law == UNIFORM_SPHERE:
                z = _normalize_rows(z)
            self._ctx_cache, self._ctx_t = z, t
        return self._ctx_cache  # type: ignore[return-value]

    def means(self, t: int) -> np.ndarray:
        return self.instance.mean_rewards(self.contexts(t))

    def noise(self, t: int, arm: int) -> float:
        return float(self.sigma * self._noise[t][arm])

    def reward(self, t: int, arm: int) -> float:
        return float(self.means(t)[arm]) + self.noise(t, arm)

    def regret(self, t: int, arm: int) -> float:
        m = self.means(t)
        return float(m.max() - m[arm])


class ContinuumWorld:
    """Unit-ball linear bandit with one keyed noise draw per round."""

    def __init__(self, instance: ContinuumInstance, seed: int):
        self.instance = instance
        self.seed = int(seed)
        self.d = instance.d
        self.sigma = instance.sigma
        self._noise = BlockStream((seed, NOISE_STREAM), ())

    def noise(self, t: int) -> float:
        return float(self.sigma * self._noise[t])

    def reward(self, t: int, x) -> float:
        return float(np.asarray(x) @ self.instance.theta_star) + self.noise(t)

    def rewards(self, t0: int, X) -> np.ndarray:
        """Rewards for actions ``X[j]`` played at rounds ``t0 + j``."""
        X = np.asarray(X)
        return X @ self.instance.theta_star + self.sigma * self._noise.span(t0, X.shape[0])

    def regret(self, x) -> float:
        return instant_regret(self.instance, None, x)

    def regrets(self, X) -> np.ndarray:
        return np.maximum(self.instance.best_mean - np.asarray(X) @ self.instance.theta_star, 0.0)


class FiniteWorld:
    """Nested-feature finite-armed world with keyed features and noise."""

    def __init__(self, instance: NestedFiniteInstance, seed: int):
        self.instance = instance
        self.seed = int(seed)
        self.K, self.d = instance.K, instance.d
        self.sigma = instance.sigma
        self._scale = instance.tau / math.sqrt(instance.d)
        self._feat = BlockStream((seed, FEATURE_STREAM), (self.K, self.d))
        self._noise = BlockStream((seed, NOISE_STREAM), (self.K,))
        self._cached_t = -1
        self._cached: tuple[np.ndarray, np.ndarray] = (np.zeros((self.K, self.d)), np.zeros(self.K))

    def features(self, t: int) -> np.ndarray:
        return self._round(t)[0]

    def means(self, t: int) -> np.ndarray:
        return self._round(t)[1]

    def _round(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        # Policies read features, reward and regret of the same round in turn.
        if t != self._cached_t:
            feats = self._feat[t] * self._scale
            self._cached = (feats, feats @ self.instance.theta_star)
            self._cached_t = t
        return self._cached

    def reward(self, t: int, arm: int) -> float:
        return float(self.means(t)[arm] + self.sigma * self._noise[t][arm])

    def regret(self, t: int, arm: int) -> float:
        m = self.means(t)
        return float(m.max() - m[arm])

    def span(self, t0: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Features ``(n, K, d)``, means ``(n, K)`` and rewards ``(n, K)`` of rounds ``t0 .. t0+n-1``."""
        feats = self._feat.span(t0, n) * self._scale
        means = feats @ self.instance.theta_star
        return feats, means, means + self.sigma * self._noise.span(t0, n)

    def features_at(self, t0: int, arms) -> np.ndarray:
        """Features of ``arms[j]`` at rounds ``t0 + j``."""
        arms = np.asarray(arms, dtype=np.intp)
        block = self._feat.span(t0, arms.shape[0]) * self._scale
        return block[np.arange(arms.shape[0]), arms]

    def batch(self, t0: int, arms):
        """Features, rewards and regrets of a scripted run of ``arms``."""
        arms = np.asarray(arms, dtype=np.intp)
        n = arms.shape[0]
        feats = self._feat.span(t0, n) * self._scale
        means = feats @ self.instance.theta_star
        rows = np.arange(n)
        noise = self._noise.span(t0, n)[rows, arms]
        chosen = means[rows, arms]
        return feats[rows, arms], chosen + self.sigma * noise, means.max(axis=1) - chosen
