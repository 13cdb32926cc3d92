"""Deterministic worker-pool mapping for grid scans.

Worker count comes from SGOSC_THREADS (default: cpu count, capped).  Results
keep the input order, so scans are reproducible regardless of thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    env = os.environ.get("SGOSC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def parallel_map(fn, items, threads: int | None = None) -> list:
    items = list(items)
    n = thread_count() if threads is None else max(1, threads)
    if n == 1 or len(items) < 4:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
