"""Chunked map over sample arrays.

Work is always cut into chunks of a fixed size that does not depend on the
number of workers, and results are returned in chunk order.  Each chunk is
computed by the same code on the same inputs whichever process runs it, so
outputs are identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

CHUNK_SIZE = 8192


def chunk_bounds(n: int, chunk: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    return [(i, min(i + chunk, n)) for i in range(0, n, chunk)]


def map_chunks(fn: Callable, arrays: tuple, args: tuple = (), workers: int = 1, chunk: int = CHUNK_SIZE) -> list:
    """Apply ``fn(*args, *[a[lo:hi] for a in arrays])`` to every chunk."""
    n = len(arrays[0])
    bounds = chunk_bounds(n, chunk)
    jobs = [tuple(np.ascontiguousarray(a[lo:hi]) for a in arrays) for lo, hi in bounds]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*args, *job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args, *job) for job in jobs]
        return [f.result() for f in futures]
