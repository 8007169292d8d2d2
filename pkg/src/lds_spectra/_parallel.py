"""Thread fan-out with results in input order.

``LDS_SPECTRA_THREADS`` caps the number of workers (default 1, which runs
everything inline). Results never depend on the worker count because every
task carries its own seed.
"""
import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(requested: int | None = None) -> int:
    try:
        cap = max(1, int(os.environ.get("LDS_SPECTRA_THREADS", "1")))
    except ValueError:
        cap = 1
    return cap if requested is None else max(1, min(int(requested), cap))


def ordered_map(func, items, max_workers: int | None = None) -> list:
    items = list(items)
    workers = worker_count(max_workers)
    if workers == 1 or len(items) < 2:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
