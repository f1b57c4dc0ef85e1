"""Deterministic work pool: results keyed by index, not completion order."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Iterable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def run_indexed(fn: Callable[[int, T], R], items: Iterable[T],
                threads: int = 1) -> List[R]:
    """Apply fn(index, item) to every item; output order matches input order.

    With threads <= 1 this is a plain loop. Item computations must not
    share mutable state; any exception propagates to the caller.
    """
    seq: Sequence[T] = list(items)
    if threads <= 1 or len(seq) <= 1:
        return [fn(i, it) for i, it in enumerate(seq)]
    out: List[R] = [None] * len(seq)  # type: ignore[list-item]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        futures = {ex.submit(fn, i, it): i for i, it in enumerate(seq)}
        for fut in as_completed(futures):
            out[futures[fut]] = fut.result()
    return out
