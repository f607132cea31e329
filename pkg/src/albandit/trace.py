from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SNAPSHOT_KINDS = ("b", "support", "ladder")


@dataclass
class RegretTrace:
    """Cumulative pseudo-regret of one algorithm on one trial.

    ``snapshots`` holds ``(epoch, kind, value)`` triples: the norm bound
    ``b`` (float), the active ``support`` (tuple of indices) or the
    ``ladder`` level (int) in force during each executed epoch.
    """

    algorithm: str
    cum_regret: np.ndarray
    snapshots: list[tuple[int, str, object]] = field(default_factory=list)
    trial: int = 0
    seed: int = 0

    @classmethod
    def from_instant(cls, algorithm: str, instant, snapshots=None, trial=0, seed=0) -> "RegretTrace":
        inst = np.maximum(np.asarray(instant, dtype=float), 0.0)
        return cls(algorithm, np.cumsum(inst), list(snapshots or []), trial, seed)

    @property
    def final(self) -> float:
        return float(self.cum_regret[-1]) if self.cum_regret.size else 0.0

    def snapshot_values(self, kind: str) -> list:
        return [v for _, k, v in self.snapshots if k == kind]
