"""Counter-based random streams.

Every stream is a Philox generator keyed by the master seed; the counter's
upper words carry ``(kind, index, replicate)`` so each asset, factor and
Monte Carlo replicate reads from its own disjoint block. Draws therefore
depend only on the stream identity, never on the order in which streams
are consumed or on the number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

__all__ = ["stream", "KIND", "parallel_map"]

KIND = {
    "common": 1,
    "cluster": 2,
    "noise": 3,
    "bootstrap": 4,
    "reshuffle": 5,
    "misc": 6,
}

_MASK64 = (1 << 64) - 1
T = TypeVar("T")
R = TypeVar("R")


def stream(seed: int, kind: str | int, index: int = 0, replicate: int = 0) -> np.random.Generator:
    """Generator for the stream ``(kind, index, replicate)`` under ``seed``."""
    k = KIND[kind] if isinstance(kind, str) else int(kind)
    key = int(seed) & _MASK64
    counter = [0, k & _MASK64, int(index) & _MASK64, int(replicate) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """Ordered map over ``items`` using up to ``workers`` threads."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
