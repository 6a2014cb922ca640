"""(c) 2025, hybrid-sape authors.
"""

import gzip
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, List, Optional, Sequence, TypeVar

from app.config.logging_config import setup_logger

logger = setup_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def init(output_dir: str) -> None:
    """Initialize the output directory if it doesn't exist."""
    if not os.path.exists(output_dir):
        os.makedirs(output_dir)
        logger.info(f"📁 Created output directory: {output_dir}")


def generate_hash(data: Any) -> str:
    """Generate a hash for the given data."""
    data_string = json.dumps(data, sort_keys=True)
    return hashlib.md5(data_string.encode()).hexdigest()


def file_checksum(path: str) -> str:
    """Return the sha256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_lines(path: str, lines: Iterable[str]) -> None:
    """Write one line per item, UTF-8, with a trailing newline."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for line in lines:
            handle.write(line + "\n")


def write_gzip_lines(path: str, lines: Iterable[str]) -> None:
    """Write lines to a gzip file whose bytes depend only on the content."""
    with open(path, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as handle:
            for line in lines:
                handle.write((line + "\n").encode("utf-8"))


def read_gzip_lines(path: str) -> List[str]:
    """Read all lines of a gzip text file without their newlines."""
    with gzip.open(path, "rt", encoding="utf-8") as handle:
        return [line.rstrip("\n") for line in handle]


def parallel_map(
    func: Callable[[T], R],
    items: Sequence[T],
    threads: int = 1,
    initializer: Optional[Callable[..., None]] = None,
    initargs: tuple = (),
) -> List[R]:
    """Map ``func`` over ``items`` keeping input order.

    With ``threads <= 1`` everything runs in-process, otherwise a process pool
    of at most ``threads`` workers is used. ``func`` and ``initializer`` must be
    module-level callables so they can be pickled.
    """
    if threads <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [func(item) for item in items]

    chunksize = max(1, len(items) // (threads * 4))
    with ProcessPoolExecutor(
        max_workers=threads, initializer=initializer, initargs=initargs
    ) as pool:
        return list(pool.map(func, items, chunksize=chunksize))
