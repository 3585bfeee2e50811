import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .constants import THREADS_ENV_VAR
from .exceptions import ConfigurationError

T = TypeVar("T")
U = TypeVar("U")


def worker_count() -> int:
    """Number of worker threads, capped by the IVCL_THREADS environment variable."""
    if (value := os.environ.get(THREADS_ENV_VAR)) is None:
        return os.cpu_count() or 1
    try:
        count = int(value)
    except ValueError:
        raise ConfigurationError(
            f"{THREADS_ENV_VAR} must be a positive integer, got {value!r}."
        ) from None
    if count < 1:
        raise ConfigurationError(f"{THREADS_ENV_VAR} must be positive, got {count}.")
    return count


def parallel_map(
    fn: Callable[[T], U], items: Iterable[T], *, workers: Optional[int] = None
) -> List[U]:
    """Apply `fn` to every item on a thread pool, keeping the input order.

    A single worker runs everything in the calling thread.
    """
    items = list(items)
    if (workers := workers or worker_count()) == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
