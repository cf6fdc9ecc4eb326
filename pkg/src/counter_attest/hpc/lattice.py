from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Sequence

from counter_attest.cfg.vectors import CounterVector

# Digits kept when a covolume is irrational
SCORE_DECIMALS = 6


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    # Invariants: x * a + y * b == g and next_x * a + next_y * b == next_g
    x, next_x = 1, 0
    y, next_y = 0, 1
    g, next_g = a, b
    while next_g:
        q = g // next_g
        x, next_x = next_x, x - q * next_x
        y, next_y = next_y, y - q * next_y
        g, next_g = next_g, g - q * next_g
    if g < 0:
        x, y, g = -x, -y, -g
    return x, y, g


def integer_basis(vectors: Iterable[Sequence[int]], dimension: int) -> list[tuple[int, ...]]:
    """
    Row echelon basis of the integer lattice generated by the vectors.
    Rows are reduced column by column with unimodular 2x2 steps, so the
    generated lattice never changes.
    """
    pivots: dict[int, list[int]] = {}
    for v in vectors:
        assert len(v) == dimension
        vec = list(v)
        for j in range(dimension):
            b = vec[j]
            if b == 0:
                continue
            row = pivots.get(j)
            if row is None:
                pivots[j] = vec if b > 0 else [-x for x in vec]
                break
            a = row[j]
            if b % a == 0:
                q = b // a
                vec = [x - q * y for x, y in zip(vec, row)]
                continue
            x, y, g = _xgcd(a, b)
            ag, bg = a // g, b // g
            pivots[j] = [x * ra + y * va for ra, va in zip(row, vec)]
            vec = [-bg * ra + ag * va for ra, va in zip(row, vec)]
    return [tuple(pivots[j]) for j in sorted(pivots)]


def lattice_contains(basis: Sequence[Sequence[int]], vector: Sequence[int]) -> bool:
    """Membership test against a basis in the echelon form of integer_basis."""
    residue = list(vector)
    for row in basis:
        pivot = next(j for j, x in enumerate(row) if x)
        if residue[pivot] % row[pivot]:
            return False
        q = residue[pivot] // row[pivot]
        residue = [r - q * x for r, x in zip(residue, row)]
    return not any(residue)


def integer_determinant(matrix: Sequence[Sequence[int]]) -> int:
    """Fraction-free Bareiss elimination; exact for integer matrices."""
    m = [list(row) for row in matrix]
    n = len(m)
    if n == 0:
        return 1
    sign, previous = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // previous
        previous = m[k][k]
    return sign * m[n - 1][n - 1]


def gram_determinant(basis: Sequence[Sequence[int]]) -> int:
    gram = [[sum(x * y for x, y in zip(a, b)) for b in basis] for a in basis]
    return integer_determinant(gram)


def _projected_lattice(
    loops: Iterable[Sequence[int]], subset: Sequence[int]
) -> tuple[int, int]:
    """Rank and Gram determinant of the lattice spanned by the projections."""
    projected = [tuple(v[i] for i in subset) for v in loops]
    basis = integer_basis(projected, len(subset))
    if not basis:
        return 0, 0
    return len(basis), gram_determinant(basis)


def lattice_density_score(loops: Iterable[CounterVector], subset: Sequence[int]) -> Fraction:
    """
    Covolume of the lattice generated by the loop vectors restricted to the
    subset. Larger means sparser, i.e. fewer measurements explained by loops.
    Empty and zero-rank generator sets score 0.

    The covolume is the square root of the Gram determinant. It is exact when
    that determinant is a perfect square, which always holds at full rank;
    otherwise it is rounded down to SCORE_DECIMALS digits. Ranking compares
    Gram determinants and never depends on the rounding.
    """
    if not subset:
        raise ValueError("Counter subset must not be empty")
    rank, gram = _projected_lattice(loops, subset)
    if rank == 0:
        return Fraction(0)
    root = math.isqrt(gram)
    if root * root == gram:
        return Fraction(root)
    scale = 10**SCORE_DECIMALS
    return Fraction(math.isqrt(gram * scale * scale), scale)


def rank_counter_subsets(
    loops: Iterable[CounterVector], k: int, dimension: int | None = None
) -> list[tuple[int, ...]]:
    """
    All size-k counter subsets, best first. A subset on which the loops
    project to a lower-rank lattice hides the loops entirely in the missing
    directions, so lower rank ranks first; within a rank, larger covolume
    ranks first; ties fall back to the index tuple.
    """
    loops = [tuple(v) for v in loops]
    if dimension is None:
        if not loops:
            raise ValueError("dimension is required when there are no loops")
        dimension = len(loops[0])
    if not 1 <= k <= dimension:
        raise ValueError(f"k must be within 1..{dimension}, got {k}")

    def key(subset: tuple[int, ...]) -> tuple[int, int, tuple[int, ...]]:
        rank, gram = _projected_lattice(loops, subset)
        return rank, -gram, subset

    return sorted(itertools.combinations(range(dimension), k), key=key)
