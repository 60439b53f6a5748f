"""
Process pool used for replicate- and replication-level parallelism.

Work is always cut into index-ordered chunks and the chunk results are
concatenated in index order, so the output never depends on the workers
count
"""

import os
import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from .osdetector import start_method
from ..typehints import Logger

Item = TypeVar('Item')
Result = TypeVar('Result')

THREADS_ENV = 'IFS_THREADS'


def resolve_workers(raw_count: Optional[int], logger: Optional[Logger] = None) -> int:
    """
    Returns a count of worker processes to use

    Returns raw_count if raw_count >= 1
    Returns IFS_THREADS if raw_count is None and the variable is set
    Returns multiprocessing.cpu_count() if raw_count is 0, negative or unset
    """

    logger = logger or logging.getLogger(__name__)

    if raw_count is None:
        env_value = os.environ.get(THREADS_ENV)

        if env_value:
            try:
                raw_count = int(env_value)
            except ValueError:
                logger.warning(f'ignoring {THREADS_ENV}={env_value!r}: not an integer')

    if raw_count is None or raw_count <= 0:
        count = multiprocessing.cpu_count()
        logger.debug(f'setting workers count to {count}')
        return count

    return raw_count


def _mp_context():
    return multiprocessing.get_context(start_method())


def chunked(count: int, chunks: int) -> List[range]:
    chunks = max(1, min(chunks, count))
    bounds = [round(count * part / chunks) for part in range(chunks + 1)]

    return [range(start, stop) for start, stop in zip(bounds, bounds[1:]) if stop > start]


def map_ordered(func: Callable[[Item], Result],
                items: Sequence[Item],
                workers: int = 1) -> List[Result]:
    """
    [func(item) for item in items], possibly evaluated by a process pool.
    func and items must be picklable when workers > 1
    """

    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    with ProcessPoolExecutor(max_workers=min(workers, len(items)),
                             mp_context=_mp_context()) as executor:
        return list(executor.map(func, items))
