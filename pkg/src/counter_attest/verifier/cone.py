from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from counter_attest.cfg.vectors import CounterVector
from counter_attest.hpc.lattice import integer_basis, lattice_contains
from counter_attest.verifier.exceptions import SolverBudgetError

DEFAULT_SOLVER_NODES = 100_000


@dataclass(frozen=True)
class ConeProblem:
    """Is target a nonnegative integer combination of the generators?"""

    target: tuple[int, ...]
    generators: tuple[CounterVector, ...]

    def __post_init__(self) -> None:
        for v in self.generators:
            assert len(v) == len(self.target), "Generator dimension mismatch"
            assert all(x >= 0 for x in v), "Generators must be nonnegative"


@dataclass(frozen=True)
class ConeSolution:
    assignment: tuple[int, ...] | None
    nodes: int


def _lp_feasible(
    generators: Sequence[Sequence[int]],
    target: Sequence[int],
    lower: Sequence[int],
    upper: Sequence[int],
) -> list[Fraction] | None:
    """
    A point y with lower <= y <= upper and sum(y_i * v_i) == target, found by
    phase one of an exact simplex with Bland's rule; None if there is none.
    """
    n, dims = len(generators), len(target)
    # Columns: z (shifted y), bound slacks, artificials; last column is the rhs
    width = 2 * n + dims
    rows: list[list[Fraction]] = []
    basis: list[int] = []
    for d in range(dims):
        rhs = target[d] - sum(generators[i][d] * lower[i] for i in range(n))
        sign = -1 if rhs < 0 else 1
        row = [Fraction(0)] * (width + 1)
        for i in range(n):
            row[i] = Fraction(sign * generators[i][d])
        row[2 * n + d] = Fraction(1)
        row[width] = Fraction(sign * rhs)
        rows.append(row)
        basis.append(2 * n + d)
    for i in range(n):
        row = [Fraction(0)] * (width + 1)
        row[i] = Fraction(1)
        row[n + i] = Fraction(1)
        row[width] = Fraction(upper[i] - lower[i])
        rows.append(row)
        basis.append(n + i)

    # Reduced costs of minimizing the sum of artificials
    objective = [Fraction(0)] * (width + 1)
    for d in range(dims):
        for j in range(width + 1):
            if not 2 * n <= j < width:
                objective[j] -= rows[d][j]

    while True:
        entering = next((j for j in range(width) if objective[j] < 0), None)
        if entering is None:
            break
        leaving: int | None = None
        best: Fraction | None = None
        for r, row in enumerate(rows):
            if row[entering] > 0:
                ratio = row[width] / row[entering]
                if (
                    best is None
                    or ratio < best
                    or (ratio == best and leaving is not None and basis[r] < basis[leaving])
                ):
                    best, leaving = ratio, r
        assert leaving is not None, "Phase one is bounded below"
        pivot_row = rows[leaving]
        pivot = pivot_row[entering]
        pivot_row[:] = [x / pivot for x in pivot_row]
        for r, row in enumerate(rows):
            if r != leaving and row[entering] != 0:
                factor = row[entering]
                row[:] = [x - factor * p for x, p in zip(row, pivot_row)]
        factor = objective[entering]
        objective[:] = [x - factor * p for x, p in zip(objective, pivot_row)]
        basis[leaving] = entering

    if objective[width] != 0:
        return None
    values = [Fraction(lower[i]) for i in range(n)]
    for r, column in enumerate(basis):
        if column < n:
            values[column] += rows[r][width]
    return values


def _tighten(
    generators: Sequence[Sequence[int]],
    target: Sequence[int],
    lower: list[int],
    upper: list[int],
) -> bool:
    """Interval propagation per dimension; False if some dimension can't be met."""
    n = len(generators)
    changed = True
    while changed:
        changed = False
        for d in range(len(target)):
            low = sum(generators[i][d] * lower[i] for i in range(n))
            high = sum(generators[i][d] * upper[i] for i in range(n))
            if not low <= target[d] <= high:
                return False
            for i in range(n):
                c = generators[i][d]
                if c == 0:
                    continue
                limit = lower[i] + (target[d] - low) // c
                if limit < upper[i]:
                    upper[i] = limit
                    changed = True
                floor = upper[i] - (high - target[d]) // c
                if floor > lower[i]:
                    lower[i] = floor
                    changed = True
            if changed:
                break
    return all(lo <= hi for lo, hi in zip(lower, upper))


def _branch_and_bound(
    generators: Sequence[Sequence[int]], target: Sequence[int], upper: list[int], max_nodes: int
) -> tuple[tuple[int, ...] | None, int]:
    n = len(generators)
    stack: list[tuple[list[int], list[int]]] = [([0] * n, upper)]
    nodes = 0
    while stack:
        lower, upper = stack.pop()
        nodes += 1
        if nodes > max_nodes:
            raise SolverBudgetError(max_nodes)
        if not _tighten(generators, target, lower, upper):
            continue
        if lower == upper:
            return tuple(lower), nodes
        point = _lp_feasible(generators, target, lower, upper)
        if point is None:
            continue
        fractional = next((i for i, x in enumerate(point) if x.denominator != 1), None)
        if fractional is None:
            return tuple(int(x) for x in point), nodes
        value = point[fractional]
        down_upper = list(upper)
        down_upper[fractional] = math.floor(value)
        up_lower = list(lower)
        up_lower[fractional] = math.ceil(value)
        stack.append((up_lower, list(upper)))
        stack.append((list(lower), down_upper))
    return None, nodes


def solve_cone(problem: ConeProblem, max_nodes: int = DEFAULT_SOLVER_NODES) -> ConeSolution:
    """
    Exact membership of the target in the integer cone of the generators,
    by branch and bound over per-generator bounds derived from the target.
    """
    target = problem.target
    if any(t < 0 for t in target):
        return ConeSolution(None, 0)
    n = len(problem.generators)
    if not any(target):
        return ConeSolution((0,) * n, 0)

    # Zero and repeated generators never change membership
    first_index: dict[CounterVector, int] = {}
    for i, v in enumerate(problem.generators):
        if any(v):
            first_index.setdefault(v, i)
    active = sorted(first_index.values())
    generators = [problem.generators[i] for i in active]
    if not lattice_contains(integer_basis(generators, len(target)), target):
        return ConeSolution(None, 0)
    upper = [min(t // x for t, x in zip(target, v) if x > 0) for v in generators]

    solved, nodes = _branch_and_bound(generators, target, upper, max_nodes)
    if solved is None:
        return ConeSolution(None, nodes)
    assignment = [0] * n
    for i, x in zip(active, solved):
        assignment[i] = x
    return ConeSolution(tuple(assignment), nodes)


def cone_member(
    problem: ConeProblem, max_nodes: int = DEFAULT_SOLVER_NODES
) -> tuple[int, ...] | None:
    return solve_cone(problem, max_nodes).assignment
