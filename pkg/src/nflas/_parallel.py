"""Chunked grid evaluation with an optional thread pool.

``NF_LAS_THREADS`` caps the number of worker threads.  Chunks are written to
fixed output slices, so the result never depends on the schedule.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def n_threads() -> int:
    raw = os.environ.get("NF_LAS_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def map_chunks(fn, items: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Apply ``fn`` to consecutive row blocks of ``items`` and concatenate."""
    n = len(items)
    bounds = [(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    workers = min(n_threads(), len(bounds))
    if workers <= 1:
        parts = [fn(items[a:b]) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: fn(items[ab[0]:ab[1]]), bounds))
    return np.concatenate(parts, axis=0)
