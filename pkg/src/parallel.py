"""Thread fan-out with results merged in input order."""
from __future__ import annotations

import concurrent.futures
import os
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_CONCURRENCY = 4


def concurrency() -> int:
    """Worker count from TUBES_CONCURRENCY (default 4, clamped 1-64)."""
    try:
        v = int(os.environ.get("TUBES_CONCURRENCY", str(DEFAULT_CONCURRENCY)))
        return max(1, min(64, v))
    except (TypeError, ValueError):
        return DEFAULT_CONCURRENCY


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Apply fn to every item, concurrently when more than one worker is allowed.

    Output order is the input order regardless of completion order; the first
    exception raised by fn propagates.
    """
    items = list(items)
    n = workers if workers is not None else concurrency()
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))
