"""Order-preserving parallel map for the per-page stages."""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: int = 1,
    chunk_size: int = 256,
) -> List[R]:
    """
    Apply `fn` to every item and return results in input order.

    threads=1 runs inline; any other count must give the same list.
    """
    if threads <= 1:
        return [fn(item) for item in items]

    items = items if isinstance(items, Sequence) else list(items)
    results: List[R] = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, len(items), chunk_size):
            chunk = items[start:start + chunk_size]
            results.extend(pool.map(fn, chunk))
    logger.debug(f"ordered_map: {len(results)} items on {threads} threads")
    return results
