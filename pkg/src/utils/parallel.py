"""
Chunked, order-preserving parallel map used by the sampling and grid checks.
"""
from typing import Callable, List, Sequence, TypeVar

import structlog
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from config.settings import settings

logger = structlog.get_logger(__name__)

T = TypeVar("T")


def chunk_ranges(total: int, chunk_size: int) -> List[range]:
    """Split range(total) into consecutive chunks."""
    return [range(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]


def ordered_map(func: Callable[[range], T], chunks: Sequence[range], threads: int = None) -> List[T]:
    """Apply `func` to every chunk; results come back in chunk order."""
    n_jobs = threads or settings.runtime.threads
    if n_jobs <= 1 or len(chunks) <= 1:
        return [func(chunk) for chunk in chunks]

    logger.debug("parallel map", chunks=len(chunks), n_jobs=n_jobs)
    # one BLAS thread per worker so results do not depend on the thread count
    with threadpool_limits(limits=1):
        return Parallel(n_jobs=n_jobs, backend="threading")(delayed(func)(chunk) for chunk in chunks)
