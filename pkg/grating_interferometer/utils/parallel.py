"""Ordered fan-out helper used by the engines."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(
    func: Callable[[T], R],
    items: Iterable[T],
    *,
    workers: int = 1,
    progress: bool = False,
    desc: Optional[str] = None,
) -> List[R]:
    """
    Apply ``func`` to every item and return results in input order.

    With ``workers > 1`` items are evaluated on a thread pool (numpy and
    scipy.fft release the GIL). Callers reduce the returned list sequentially,
    so results do not depend on the worker count.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in tqdm(items, desc=desc, disable=not progress)]
    logger.debug(f"Evaluating {len(items)} items on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(func, items), total=len(items), desc=desc, disable=not progress))
