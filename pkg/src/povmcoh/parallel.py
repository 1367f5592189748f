"""Deterministic fan-out over a capped thread pool."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_VAR = "COH_NUM_THREADS"


def num_workers() -> int:
    raw = os.environ.get(ENV_VAR)
    cap = os.cpu_count() or 1
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return cap


def pmap(fn, items) -> list:
    """Order-preserving map; runs inline when only one worker is allowed."""
    items = list(items)
    workers = min(num_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def spawn_rngs(seed, count: int) -> list[np.random.Generator]:
    """Independent generators, one per work item, fixed by ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(count)]
