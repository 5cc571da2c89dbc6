"""Order-preserving map over a process pool.

Results come back in input order whatever the worker count, so reductions over
them are schedule independent.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("STABLECAP_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (8 * threads))
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items, chunksize=chunk))
