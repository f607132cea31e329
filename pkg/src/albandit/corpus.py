"""Real-data pipeline: CSV rows clustered into pseudo-arms with fixed contexts."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .envs import NOISE_STREAM, BlockStream

RHO_FLOOR = 1e-6


class CorpusParseError(ValueError):
    """A selected cell is not numeric; ``row`` and ``column`` are 0-based file coordinates."""

    def __init__(self, path, row: int, column: int, cell: str):
        super().__init__(f"{path}: row {row}, column {column}: cannot parse {cell!r} as a number")
        self.row, self.column = row, column


class CorpusSchemaError(ValueError):
    pass


@dataclass(frozen=True)
class RatedRow:
    reward: float
    features: np.ndarray


@dataclass(frozen=True)
class ClusteredArms:
    centroids: np.ndarray
    arm_means: np.ndarray
    assignment: np.ndarray

    @property
    def K(self) -> int:
        return self.centroids.shape[0]


def _subsample(n: int, limit: int | None, rng: np.random.Generator | None) -> np.ndarray:
    if limit is None or limit >= n:
        return np.arange(n)
    if rng is None:
        raise ValueError("subsampling needs an rng")
    return np.sort(rng.choice(n, size=limit, replace=False))


def ingest_csv(path, reward_col: int = 0, feature_cols: Sequence[int] | None = None,
               row_limit: int | None = None, col_limit: int | None = None,
               rng: np.random.Generator | None = None, header: bool = False) -> list[RatedRow]:
    """Read ``(reward, features)`` rows, optionally subsampling rows and feature columns.

    Columns are chosen before rows, both uniformly without replacement and
    kept in file order.  Without ``feature_cols`` every column other than
    ``reward_col`` is a feature.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        records = list(csv.reader(fh))
    first = 1 if header else 0
    body = [r for r in records[first:] if r]
    if not body:
        return []
    width = len(body[0])
    if feature_cols is None:
        feature_cols = [c for c in range(width) if c != reward_col]
    feature_cols = list(feature_cols)
    wanted = [reward_col, *feature_cols]
    bad = [c for c in wanted if not 0 <= c < width]
    if bad:
        raise CorpusSchemaError(f"{path}: columns {bad} missing (file has {width} columns)")
    feature_cols = [feature_cols[i] for i in _subsample(len(feature_cols), col_limit, rng)]
    keep = _subsample(len(body), row_limit, rng)

    rows = []
    for i in keep:
        rec = body[i]
        line = int(i) + first
        if len(rec) != width:
            raise CorpusSchemaError(f"{path}: row {line} has {len(rec)} columns, expected {width}")

        def cell(c):
            try:
                return float(rec[c])
            except ValueError:
                raise CorpusParseError(path, line, c, rec[c]) from None

        rows.append(RatedRow(cell(reward_col), np.array([cell(c) for c in feature_cols])))
    return rows


def _as_arrays(rows: Sequence[RatedRow]) -> tuple[np.ndarray, np.ndarray]:
    X = np.vstack([r.features for r in rows]).astype(float)
    y = np.array([r.reward for r in rows], dtype=float)
    return X, y


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    closest = _sq_dists(X, centers[0][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers.append(X[idx])
        closest = np.minimum(closest, _sq_dists(X, X[idx][None, :])[:, 0])
    return np.array(centers)


def distortion(X: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    """Within-cluster sum of squared distances."""
    return float(((X - centroids[assignment]) ** 2).sum())


def lloyd(X: np.ndarray, centroids: np.ndarray, max_iters: int = 100,
          history: list | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations until the assignment stops changing.

    An emptied cluster is moved to the point farthest from its current
    centroid, which never increases the distortion.
    """
    C = centroids.astype(float).copy()
    k = C.shape[0]
    assign = np.argmin(_sq_dists(X, C), axis=1)
    for _ in range(max_iters):
        for j in range(k):
            members = assign == j
            if members.any():
                C[j] = X[members].mean(axis=0)
        for j in range(k):
            if not (assign == j).any():
                spread = ((X - C[assign]) ** 2).sum(1)
                spread[np.bincount(assign, minlength=k)[assign] < 2] = -1.0
                far = int(np.argmax(spread))
                assign[far] = j
                C[j] = X[far]
        if history is not None:
            history.append(distortion(X, C, assign))
        new = np.argmin(_sq_dists(X, C), axis=1)
        if np.array_equal(new, assign):
            break
        assign = new
    return C, assign


def kmeans_cluster(rows: Sequence[RatedRow], k: int, max_iters: int = 100,
                   rng: np.random.Generator | None = None) -> ClusteredArms:
    """k-means++ seeding plus Lloyd; each cluster becomes an arm."""
    if k < 1 or k > len(rows):
        raise ValueError(f"k must lie in [1, {len(rows)}], got {k}")
    rng = np.random.default_rng(0) if rng is None else rng
    X, y = _as_arrays(rows)
    C, assign = lloyd(X, kmeans_plus_plus(X, k, rng), max_iters)
    # Lloyd already guarantees nonempty clusters; means follow the final assignment.
    counts = np.bincount(assign, minlength=k)
    means = np.bincount(assign, weights=y, minlength=k) / counts
    return ClusteredArms(C, means, assign)


def write_arms(arms: ClusteredArms, path) -> Path:
    path = Path(path)
    d = arms.centroids.shape[1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arm", "mean_reward", *(f"centroid_{j}" for j in range(d))])
        for i in range(arms.K):
            w.writerow([i, repr(float(arms.arm_means[i])), *(repr(float(v)) for v in arms.centroids[i])])
    return path


@dataclass(frozen=True)
class ClusteredInstance:
    """Clustered arms viewed as a mixture model with zero linear part."""

    arms: ClusteredArms
    sigma: float

    @property
    def theta_star(self) -> np.ndarray:
        return np.zeros(self.arms.centroids.shape[1])

    @property
    def biases(self) -> np.ndarray:
        return self.arms.arm_means

    @property
    def d(self) -> int:
        return self.arms.centroids.shape[1]

    @property
    def K(self) -> int:
        return self.arms.K

    @property
    def rho_min(self) -> float:
        C = self.arms.centroids
        second = C.T @ C / C.shape[0]
        return max(float(np.linalg.eigvalsh(second)[0]), RHO_FLOOR)


class ClusteredWorld:
    """Fixed centroid contexts; reward is the cluster mean plus Gaussian noise."""

    def __init__(self, instance: ClusteredInstance, seed: int):
        self.instance = instance
        self.seed = int(seed)
        self.K, self.d = instance.K, instance.d
        self.sigma = instance.sigma
        self.rho_min = instance.rho_min
        self._contexts = instance.arms.centroids
        self._means = instance.arms.arm_means
        self._best = float(self._means.max())
        self._noise = BlockStream((seed, NOISE_STREAM), (self.K,))

    def contexts(self, t: int) -> np.ndarray:
        return self._contexts

    def means(self, t: int) -> np.ndarray:
        return self._means

    def noise(self, t: int, arm: int) -> float:
        return float(self._noise[t][arm])

    def reward(self, t: int, arm: int) -> float:
        return float(self._means[arm] + self.sigma * self._noise[t][arm])

    def regret(self, t: int, arm: int) -> float:
        return self._best - float(self._means[arm])


def synthetic_ratings(n: int, d: int, rng: np.random.Generator, levels: int = 5,
                      groups: int = 8) -> np.ndarray:
    """A rating-shaped table: integer reward in ``0..levels-1`` then ``d`` features.

    Rows come from ``groups`` Gaussian blobs, each with its own rating
    propensity, so clustering recovers arms with distinct mean ratings.
    """
    centers = rng.normal(0.0, 3.0, size=(groups, d))
    propensity = rng.uniform(0, levels - 1, size=groups)
    g = rng.integers(groups, size=n)
    X = centers[g] + rng.standard_normal((n, d))
    r = np.clip(np.rint(propensity[g] + rng.normal(0, 0.7, size=n)), 0, levels - 1)
    return np.column_stack([r, X])


def write_csv(table: np.ndarray, path, header: Sequence[str] | None = None) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in table:
            w.writerow([format(v, ".10g") if not float(v).is_integer() else str(int(v)) for v in row])
    return path


__all__ = [
    "ClusteredArms", "ClusteredInstance", "ClusteredWorld", "CorpusParseError", "CorpusSchemaError",
    "RatedRow", "distortion", "ingest_csv", "kmeans_cluster", "kmeans_plus_plus", "lloyd",
    "synthetic_ratings", "write_arms", "write_csv",
]
