from __future__ import annotations

from typing import Iterable, Sequence

# Event counts in the counter order of the owning document
CounterVector = tuple[int, ...]


def zero_vector(dimension: int) -> CounterVector:
    return (0,) * dimension


def add_vectors(a: Sequence[int], b: Sequence[int]) -> CounterVector:
    assert len(a) == len(b), f"Dimension mismatch: {len(a)} != {len(b)}"
    return tuple(x + y for x, y in zip(a, b))


def sub_vectors(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    assert len(a) == len(b), f"Dimension mismatch: {len(a)} != {len(b)}"
    return tuple(x - y for x, y in zip(a, b))


def scale_vector(v: Sequence[int], factor: int) -> CounterVector:
    return tuple(x * factor for x in v)


def sum_vectors(vectors: Iterable[Sequence[int]], dimension: int) -> CounterVector:
    total = [0] * dimension
    for v in vectors:
        for i, x in enumerate(v):
            total[i] += x
    return tuple(total)


def is_zero(v: Sequence[int]) -> bool:
    return not any(v)
