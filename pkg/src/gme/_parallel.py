"""Seed derivation and order-preserving thread pool.

Every random stream is addressed by ``SeedSequence(seed, spawn_key=key)``, so
the partition of work into chunks or tasks is a pure function of the seed and
the work size, never of the number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "GME_THREADS"


def generator(seed: int, *key: int) -> np.random.Generator:
    """Philox-backed generator for the stream ``(seed, key...)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seeds(seed: int, count: int, *key: int) -> list[int]:
    """``count`` independent 63-bit integer seeds derived from ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    state = ss.generate_state(count, dtype=np.uint64)
    return [int(s >> np.uint64(1)) for s in state]


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def ordered_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T],
                threads: int | None = None) -> list[R]:
    """``[fn(x) for x in items]``, possibly evaluated concurrently, in input order."""
    items = list(items)
    workers = min(worker_count(threads), len(items)) if items else 1
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
