"""Deterministic replicate seeding and order-preserving parallel map."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np
from threadpoolctl import threadpool_limits

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "CVMC_THREADS"


def thread_cap(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, value)


def replicate_seed(master_seed: int, replicate: int) -> np.random.SeedSequence:
    """Independent stream for one replicate; identical however replicates are scheduled."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate),))


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """``[fn(x) for x in items]``, optionally on a thread pool, results in input order.

    BLAS is pinned to one thread so that results do not depend on ``workers``.
    """
    items = list(items)
    with threadpool_limits(limits=1):
        if workers <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
