"""Deterministic parallel execution helpers.

Work is split into contiguous index chunks, run on a joblib thread pool and
gathered back in index order, so results never depend on the worker count.
"""
from typing import Callable, List, Optional, TypeVar

import numpy as np
from joblib import Parallel, delayed, effective_n_jobs

T = TypeVar("T")

_thread_cap = 1


def set_thread_cap(threads: int) -> None:
    """Global cap on workers; -1 means one per core."""
    global _thread_cap
    _thread_cap = int(threads)


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for replicate `index`, a pure function of (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _chunks(count: int, n_chunks: int) -> List[range]:
    bounds = np.linspace(0, count, n_chunks + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(n_chunks) if bounds[i] < bounds[i + 1]]


def _run_chunk(fn: Callable[[int], T], indices: range) -> List[T]:
    return [fn(i) for i in indices]


def map_indexed(fn: Callable[[int], T], count: int, n_jobs: Optional[int] = None) -> List[T]:
    """Evaluate fn(0), ..., fn(count - 1) and return results in index order."""
    if n_jobs is None:
        n_jobs = _thread_cap
    if count <= 0:
        return []
    workers = effective_n_jobs(n_jobs)
    if workers == 1 or count == 1:
        return [fn(i) for i in range(count)]
    n_chunks = min(count, 4 * workers)
    parts = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_run_chunk)(fn, chunk) for chunk in _chunks(count, n_chunks)
    )
    return [item for part in parts for item in part]
