"""Deterministic replication of randomised estimators.

Each replication draws from its own generator derived from
``(master_seed, *key)`` through :class:`numpy.random.SeedSequence`, so the
results do not depend on how replications are scheduled across threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np


def child_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by ``key`` under ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def replicate(
    fn: Callable[[np.random.Generator], object],
    m_reps: int,
    master_seed: int,
    *,
    key: Sequence[int] = (),
    threads: int = 1,
) -> list:
    """Run ``fn(rng)`` for ``m_reps`` independent streams, results in index order.

    Replication ``i`` uses ``child_rng(master_seed, *key, i)``.
    """
    if m_reps < 1:
        raise ValueError("m_reps must be >= 1")
    rngs = [child_rng(master_seed, *key, i) for i in range(m_reps)]
    if threads <= 1:
        return [fn(r) for r in rngs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, rngs))
