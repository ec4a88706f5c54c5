"""Optional thread fan-out for per-image work.

``HCRF_THREADS`` caps the worker count (0 or unset = sequential).  Results
are returned in input order, so threaded and sequential runs are
indistinguishable: every mapped task works on independent inputs.
"""

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ArgumentError


def worker_count() -> int:
    raw = os.environ.get("HCRF_THREADS", "0")
    try:
        count = int(raw)
    except ValueError:
        raise ArgumentError(f"HCRF_THREADS must be a non-negative integer, got {raw!r}") from None
    if count < 0:
        raise ArgumentError(f"HCRF_THREADS must be a non-negative integer, got {raw!r}")
    return count


def map_ordered(fn, items):
    """Apply ``fn`` to each item, in parallel when HCRF_THREADS > 1, always
    returning results in input order."""
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
