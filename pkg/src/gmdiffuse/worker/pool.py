"""
In-process worker pool for gmdiffuse.

Per-cell regressions, trajectory blocks and Monte-Carlo shards are independent
units of work. run_concurrently fans them out over a ThreadPoolExecutor (numpy
and scipy release the GIL inside their kernels) and returns results in input
order, so outputs never depend on the thread count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from threading import Lock
from typing import Callable, Dict, List, Optional, Sequence, TypeVar

from gmdiffuse.core import config


logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class ProgressTracker:
    """Thread-safe progress tracking."""

    def __init__(self, total: int = 0):
        self.lock = Lock()
        self.total = total
        self.completed = 0
        self.failed = 0
        self.errors: List[str] = []

    def increment_completed(self):
        with self.lock:
            self.completed += 1

    def increment_failed(self):
        with self.lock:
            self.failed += 1

    def add_error(self, error: str):
        with self.lock:
            self.errors.append(error)

    def get_stats(self) -> Dict[str, int]:
        with self.lock:
            return {
                "total": self.total,
                "completed": self.completed,
                "failed": self.failed,
                "errors": len(self.errors),
            }


def resolve_threads(threads: Optional[int]) -> int:
    """Worker count: explicit value, else GMDIFFUSE_THREADS; at least 1."""
    value = config.MAX_THREADS if threads is None else threads
    return max(1, int(value))


def run_concurrently(
    fn: Callable[[T], R],
    items: Sequence[T],
    threads: Optional[int] = None,
    tracker: Optional[ProgressTracker] = None,
) -> List[R]:
    """
    Apply fn to every item, possibly on several threads.

    Args:
        fn: Work function
        items: Inputs
        threads: Worker cap (defaults to GMDIFFUSE_THREADS)
        tracker: Optional ProgressTracker updated as items finish

    Returns:
        list: fn(item) for every item, in input order

    Raises:
        Exception: The first failure (by input order) after all work has settled
    """
    items = list(items)
    tracker = tracker or ProgressTracker(total=len(items))
    workers = min(resolve_threads(threads), max(1, len(items)))

    if workers == 1:
        results: List[R] = []
        for item in items:
            try:
                results.append(fn(item))
            except Exception as e:
                tracker.increment_failed()
                tracker.add_error(str(e))
                raise
            tracker.increment_completed()
        return results

    slots: List[Optional[R]] = [None] * len(items)
    failures: Dict[int, BaseException] = {}

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, item): i for i, item in enumerate(items)}
        for future in as_completed(futures):
            i = futures[future]
            try:
                slots[i] = future.result()
                tracker.increment_completed()
            except Exception as e:
                failures[i] = e
                tracker.increment_failed()
                tracker.add_error(str(e))

    if failures:
        first = min(failures)
        logger.error(f"[FAIL] {len(failures)}/{len(items)} work items failed; first at item {first}")
        raise failures[first]

    return slots  # type: ignore[return-value]


# Export pool helpers
__all__ = ["ProgressTracker", "resolve_threads", "run_concurrently"]
