from __future__ import annotations

from functools import cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from counter_attest.verifier.cone import ConeProblem, cone_member, solve_cone
from counter_attest.verifier.exceptions import SolverBudgetError


def brute_force(target: tuple[int, ...], generators: tuple[tuple[int, ...], ...]) -> bool:
    """Membership by enumerating coefficients, the last generator solved by division."""
    gens = sorted({v for v in generators if any(v)}, key=lambda v: -max(v))
    dimension = len(target)

    @cache
    def reachable(index: int, remaining: tuple[int, ...]) -> bool:
        if not any(remaining):
            return True
        rest = gens[index:]
        if any(r > 0 and all(v[d] == 0 for v in rest) for d, r in enumerate(remaining)):
            return False
        v = gens[index]
        if index == len(gens) - 1:
            d = next(d for d in range(dimension) if v[d] > 0)
            count, left = divmod(remaining[d], v[d])
            return left == 0 and all(remaining[e] == count * v[e] for e in range(dimension))
        current = remaining
        while all(x >= 0 for x in current):
            if reachable(index + 1, current):
                return True
            current = tuple(x - y for x, y in zip(current, v))
        return False

    return all(t >= 0 for t in target) and reachable(0, tuple(target))


def combine(assignment: tuple[int, ...], generators: tuple[tuple[int, ...], ...], dimension: int) -> tuple[int, ...]:
    return tuple(sum(c * v[d] for c, v in zip(assignment, generators)) for d in range(dimension))


Problem = tuple[tuple[int, ...], tuple[tuple[int, ...], ...]]


def cone_problems() -> st.SearchStrategy[Problem]:
    """Up to four counters, five loop vectors with entries up to 20, targets up to 200."""
    return st.integers(min_value=1, max_value=4).flatmap(
        lambda dim: st.tuples(
            st.tuples(*[st.integers(min_value=0, max_value=200)] * dim),
            st.lists(
                st.tuples(*[st.integers(min_value=0, max_value=20)] * dim),
                max_size=5,
            ).map(tuple),
        )
    )


def check_against_enumeration(problem: Problem) -> None:
    target, generators = problem
    assignment = cone_member(ConeProblem(target, generators))
    assert (assignment is not None) == brute_force(target, generators)
    if assignment is not None:
        assert all(x >= 0 for x in assignment)
        assert combine(assignment, generators, len(target)) == target


class TestConeMember:
    def test_lattice_gap(self) -> None:
        assert cone_member(ConeProblem((7, 4), ((3, 0), (1, 2)))) is None

    def test_member(self) -> None:
        assert cone_member(ConeProblem((5, 4), ((3, 0), (1, 2)))) == (1, 2)

    def test_zero_target(self) -> None:
        assert cone_member(ConeProblem((0, 0), ((3, 0), (1, 2)))) == (0, 0)
        assert cone_member(ConeProblem((0, 0), ())) == ()

    def test_no_generators(self) -> None:
        assert cone_member(ConeProblem((1, 0), ())) is None

    def test_negative_target(self) -> None:
        solution = solve_cone(ConeProblem((-1, 4), ((1, 2),)))
        assert solution.assignment is None
        assert solution.nodes == 0

    def test_zero_and_repeated_generators(self) -> None:
        generators = ((0, 0), (2, 1), (2, 1), (1, 1))
        assignment = cone_member(ConeProblem((5, 3), generators))
        assert assignment is not None
        assert assignment[0] == 0 and assignment[2] == 0
        assert combine(assignment, generators, 2) == (5, 3)

    def test_in_lattice_outside_cone(self) -> None:
        # (1, -1) is in the lattice of the generators but needs a negative coefficient
        generators = ((2, 1), (1, 2))
        assert cone_member(ConeProblem((1, 2), generators)) == (0, 1)
        assert cone_member(ConeProblem((0, 3), generators)) is None

    def test_node_budget(self) -> None:
        generators = ((7, 1, 0), (11, 0, 1), (13, 1, 1), (17, 1, 0))
        with pytest.raises(SolverBudgetError):
            solve_cone(ConeProblem((1000, 40, 40), generators), max_nodes=0)

    @settings(deadline=None, max_examples=300)
    @given(cone_problems())
    def test_agrees_with_enumeration(self, problem: Problem) -> None:
        check_against_enumeration(problem)

    @pytest.mark.slow
    @settings(deadline=None, max_examples=10_000)
    @given(cone_problems())
    def test_agrees_with_enumeration_extended(self, problem: Problem) -> None:
        check_against_enumeration(problem)

    @settings(deadline=None, max_examples=300)
    @given(
        st.integers(min_value=1, max_value=4).flatmap(
            lambda dim: st.lists(
                st.tuples(
                    st.tuples(*[st.integers(min_value=0, max_value=20)] * dim),
                    st.integers(min_value=0, max_value=10),
                ),
                max_size=5,
            ).map(lambda pairs: (dim, pairs))
        )
    )
    def test_constructed_members_are_found(
        self, problem: tuple[int, list[tuple[tuple[int, ...], int]]]
    ) -> None:
        dimension, pairs = problem
        generators = tuple(v for v, _ in pairs)
        target = combine(tuple(c for _, c in pairs), generators, dimension)
        assignment = cone_member(ConeProblem(target, generators))
        assert assignment is not None
        assert combine(assignment, generators, dimension) == target
