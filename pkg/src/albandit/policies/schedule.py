from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import count
from typing import Iterator

DELTA_FLOOR = 1e-12


@dataclass(frozen=True)
class EpochSchedule:
    """Bookkeeping for one epoch (norm mode) or phase (dimension mode)."""

    index: int
    length: int
    delta: float
    bound: float | None = None
    threshold: float | None = None
    explore_length: int | None = None


def ceil_sqrt(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def norm_schedule(T1: int, delta1: float) -> Iterator[EpochSchedule]:
    """Doubling epochs ``T_i = 2^(i-1) T1`` with halving slack, from ``i = 1``."""
    if T1 < 1:
        raise ValueError(f"T1 must be >= 1, got {T1}")
    for i in count(1):
        yield EpochSchedule(
            index=i,
            length=T1 * 2 ** (i - 1),
            delta=max(delta1 / 2 ** (i - 1), DELTA_FLOOR),
        )


def dim_schedule(T0: int, delta: float, threshold_base: float = 2.0) -> Iterator[EpochSchedule]:
    """Phases ``i = 0, 1, ...``: regret block ``25^i T0``, exploration ``5^i ceil(sqrt(T0))``."""
    if T0 < 1:
        raise ValueError(f"T0 must be >= 1, got {T0}")
    if threshold_base <= 1:
        raise ValueError(f"threshold_base must exceed 1, got {threshold_base}")
    root = ceil_sqrt(T0)
    for i in count(0):
        yield EpochSchedule(
            index=i,
            length=25**i * T0,
            delta=max(delta / 2**i, DELTA_FLOOR),
            threshold=float(threshold_base) ** (-i),
            explore_length=5**i * root,
        )
