"""
Bounded Worker Pool

Order-preserving map over independent evaluations (fits, densities,
regularity scales). STRATAFLOW_THREADS caps the number of workers.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "STRATAFLOW_THREADS"


def worker_count() -> int:
    """Worker cap from STRATAFLOW_THREADS, falling back to the CPU count"""
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            count = int(value)
            if count >= 1:
                return count
            logger.warning(f"Ignoring {THREADS_ENV}={value}: must be at least 1")
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV}={value}")
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """[fn(x) for x in items], evaluated on a thread pool; results keep input order"""
    items = list(items)
    workers = min(max_workers or worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    logger.debug(f"Parallel map over {len(items)} items with {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
