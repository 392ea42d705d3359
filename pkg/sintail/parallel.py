"""
Deterministic fan-out helpers.

Work is always cut into fixed-size chunks whose boundaries depend only on the
problem size, never on the worker count, and results are combined in a fixed
pairwise tree. Running with one worker or eight gives bit-identical output.
"""

import logging
import multiprocessing
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, TypeVar

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def make_chunks(first: int, last: int, size: int) -> List[Tuple[int, int]]:
    """Split [first, last] into consecutive inclusive ranges of ``size`` items.

    Boundaries are aligned to multiples of ``size`` so the chunk containing a
    given index does not depend on ``first``.
    """
    if last < first:
        return []
    chunks = []
    lo = first
    while lo <= last:
        hi = min(last, (lo // size + 1) * size - 1)
        chunks.append((lo, hi))
        lo = hi + 1
    return chunks


def iter_ordered(
    func: Callable[[T], R], tasks: Sequence[T], workers: int = 1
) -> Iterator[R]:
    """Yield func(task) for each task, in task order."""
    if workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            yield func(task)
        return
    processes = min(workers, len(tasks))
    log.debug("fanning %d tasks out to %d processes", len(tasks), processes)
    with multiprocessing.Pool(processes) as pool:
        for result in pool.imap(func, tasks):
            yield result


def ordered_map(func: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> List[R]:
    return list(iter_ordered(func, tasks, workers))


def pairwise_reduce(items: Sequence[R], combine: Callable[[R, R], R]) -> Optional[R]:
    """Combine (0,1), (2,3), ... level by level until one item is left."""
    level = list(items)
    if not level:
        return None
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            if i + 1 < len(level):
                nxt.append(combine(level[i], level[i + 1]))
            else:
                nxt.append(level[i])
        level = nxt
    return level[0]
