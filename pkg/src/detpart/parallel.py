"""Deterministic thread-pool helper.

Work is always split into chunks whose boundaries are a pure function of
the workload (never of the thread count), each chunk writes to disjoint
output slices or returns a value, and results are combined in chunk index
order. Under these rules the output of any parallel map is bitwise
identical to the sequential one, so the thread count only changes speed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


class WorkerPool:
    """Fixed-size thread pool returning results in submission order."""

    def __init__(self, threads: int = 1):
        if threads < 1:
            raise ValueError(f"thread count must be >= 1, got {threads}")
        self.threads = threads
        self._pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def map(self, fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
        if self._pool is None or len(items) <= 1:
            return [fn(x) for x in items]
        return list(self._pool.map(fn, items))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def even_chunks(n: int, parts: int) -> list[tuple[int, int]]:
    """Split range(n) into `parts` near-even slices (bounds depend on
    n and parts only)."""
    parts = max(1, min(parts, n)) if n else 1
    if n == 0:
        return []
    base, extra = divmod(n, parts)
    out = []
    lo = 0
    for i in range(parts):
        hi = lo + base + (1 if i < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out
