"""
Grid Runner
Order-preserving parallel map over independent sweep cells.
Results come back in submission order, so grids assemble row-major
whatever the worker count.
"""
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional

import config
from errors import InvalidParam

logger = logging.getLogger(__name__)


def resolve_workers(workers: Optional[int]) -> int:
    """None -> configured default, 0 -> one per CPU"""
    if workers is None:
        workers = config.WORKERS
    if workers < 0:
        raise InvalidParam(f"worker count must be >= 0, got {workers}")
    return workers or (os.cpu_count() or 1)


class GridRunner:
    """Runs a picklable cell function over many cells, serially or on a process pool"""

    def __init__(self, workers: Optional[int] = None):
        self.workers = resolve_workers(workers)
        self._pool: Optional[ProcessPoolExecutor] = None

    def map(self, fn: Callable, cells: Iterable) -> List:
        cells = list(cells)
        if self.workers <= 1 or len(cells) <= 1:
            return [fn(cell) for cell in cells]

        if self._pool is None:
            logger.info(f"⚙️ Starting {self.workers} sweep workers")
            self._pool = ProcessPoolExecutor(max_workers=self.workers)
        chunksize = max(1, len(cells) // (self.workers * 4))
        return list(self._pool.map(fn, cells, chunksize=chunksize))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None


# Singleton instance
_runner: Optional[GridRunner] = None


def get_grid_runner(workers: Optional[int] = None) -> GridRunner:
    """Get or create the shared runner; a different worker count replaces it"""
    global _runner
    wanted = resolve_workers(workers)
    if _runner is None or _runner.workers != wanted:
        if _runner is not None:
            _runner.close()
        _runner = GridRunner(wanted)
    return _runner


def close_grid_runner():
    global _runner
    if _runner is not None:
        _runner.close()
        _runner = None
