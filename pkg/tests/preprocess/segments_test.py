from __future__ import annotations

import random
from typing import Any

import networkx as nx
import pytest

from counter_attest.cfg.enums import EdgeKind
from counter_attest.cfg.loader import load_cfg
from counter_attest.cfg.model import AnnotatedCfg
from counter_attest.cfg.stacks import EMPTY_STACK, Frame
from counter_attest.cfg.trace import BlockTrace
from counter_attest.cfg.vectors import add_vectors, scale_vector, sum_vectors
from counter_attest.demos.builder import CfgBuilder
from counter_attest.demos.programs import crypto, explosion, fig2, hello, random_program
from counter_attest.hpc.counters import CounterConfig
from counter_attest.hpc.events import default_event_table, resolve_block_deltas
from counter_attest.preprocess.database import SegmentDatabase
from counter_attest.preprocess.exceptions import CycleBudgetError, PathBudgetError
from counter_attest.preprocess.expansion import ExpandedNode
from counter_attest.preprocess.segments import (
    PreprocessBudgets,
    SegmentEnumerator,
    enumerate_segments,
)
from counter_attest.tracesim.simulate import measure
from counter_attest.utils.hashing import canonical_json


def preprocess(document: dict[str, Any], **budgets: int) -> tuple[AnnotatedCfg, SegmentDatabase]:
    cfg = load_cfg(document)
    return cfg, enumerate_segments(cfg, default_event_table(), PreprocessBudgets(**budgets))


def diamond() -> dict[str, Any]:
    b = CfgBuilder()
    b.block("a", "main", ["ecall"], measurement_point=True)
    b.block("b", "main", ["lw", "jal"])
    b.block("c", "main", ["sw", "sw"])
    b.block("d", "main", ["ecall"], measurement_point=True)
    b.edge("a", "b", EdgeKind.BRANCH).edge("a", "c", EdgeKind.BRANCH)
    b.chain("b", "d").chain("c", "d")
    return b.build("a")


STRAIGHT = {
    "counters": ["instructions_retired", "int_loads_retired"],
    "functions": [{"name": "main", "entry": "A", "blocks": ["A", "B", "C"]}],
    "blocks": [
        {"id": "A", "function": "main", "instruction_count": 1, "is_measurement_point": True, "delta": [1, 0]},
        {"id": "B", "function": "main", "instruction_count": 3, "is_measurement_point": False, "delta": [3, 2]},
        {"id": "C", "function": "main", "instruction_count": 1, "is_measurement_point": True, "delta": [1, 0]},
    ],
    "edges": [
        {"from": "A", "to": "B", "kind": "fallthrough"},
        {"from": "B", "to": "C", "kind": "fallthrough"},
    ],
    "entry": "A",
}


class TestFig2:
    def test_single_candidate_with_both_loops(self) -> None:
        cfg, db = preprocess(fig2().document)
        assert set(db.entries) == {("A", "C")}
        entry = db.entries[("A", "C")]
        assert len(entry.candidates) == 1
        candidate = entry.candidates[0]
        assert candidate.path == ("A", "B", "C")
        deltas = resolve_block_deltas(cfg, default_event_table())
        assert candidate.base == add_vectors(deltas["B"], deltas["C"])
        assert candidate.base_instruction_count == 4
        # D-F-G never touches the path but shares D with B-D-E
        expected_loops = {
            sum_vectors([deltas["B"], deltas["D"], deltas["E"]], cfg.dimension),
            sum_vectors([deltas["D"], deltas["F"], deltas["G"]], cfg.dimension),
        }
        assert set(candidate.loops) == expected_loops
        assert list(candidate.loops) == sorted(candidate.loops)
        assert sorted(candidate.loop_instruction_counts) == [7, 8]

    def test_canonical_trace_decomposes(self) -> None:
        cfg, db = preprocess(fig2().document)
        table = default_event_table()
        deltas = resolve_block_deltas(cfg, table)
        config = CounterConfig.parse("all", cfg.counters, table.deterministic)
        [measurement] = measure(cfg, table, config, BlockTrace(fig2().trace))
        outer = sum_vectors([deltas["B"], deltas["D"], deltas["E"]], cfg.dimension)
        inner = sum_vectors([deltas["D"], deltas["F"], deltas["G"]], cfg.dimension)
        base = db.entries[("A", "C")].candidates[0].base
        expected = add_vectors(add_vectors(base, scale_vector(outer, 2)), inner)
        assert measurement.delta == config.project(expected)

    def test_cycle_budget(self) -> None:
        with pytest.raises(CycleBudgetError) as info:
            preprocess(fig2().document, cycles=1)
        assert info.value.start == "A"


class TestShapes:
    def test_straight_line(self) -> None:
        _, db = preprocess(STRAIGHT)
        [candidate] = db.entries[("A", "C")].candidates
        assert candidate.base == (4, 2)
        assert candidate.loops == ()
        assert candidate.entry_stack == candidate.exit_stack == EMPTY_STACK

    def test_diamond(self) -> None:
        _, db = preprocess(diamond())
        candidates = db.entries[("a", "d")].candidates
        assert [c.path for c in candidates] == [("a", "b", "d"), ("a", "c", "d")]
        assert all(c.loops == () for c in candidates)

    def test_loops_only_where_the_path_enters_them(self) -> None:
        _, db = preprocess(hello().document)
        candidates = db.entries[("main_entry", "main_write")].candidates
        assert len(candidates) == 2
        through = [c for c in candidates if "puts_char" in c.path]
        around = [c for c in candidates if "puts_char" not in c.path]
        assert len(through) == len(around) == 1
        assert len(through[0].loops) == 1
        assert around[0].loops == ()
        assert through[0].entry_stack == EMPTY_STACK
        assert through[0].path[2] == "puts_entry"

    def test_zero_delta_loop_dropped(self) -> None:
        b = CfgBuilder()
        b.block("a", "main", ["ecall"], measurement_point=True)
        b.block("spin", "main", ["nop"])
        b.block("z", "main", ["ecall"], measurement_point=True)
        b.chain("a", "spin", "z").edge("spin", "spin")
        document = b.build("a")
        spin = next(block for block in document["blocks"] if block["id"] == "spin")
        del spin["instructions"]
        spin["delta"] = [0] * len(b.counters)
        _, db = preprocess(document)
        [candidate] = db.entries[("a", "z")].candidates
        assert candidate.loops == ()

    def test_path_budget(self) -> None:
        with pytest.raises(PathBudgetError) as info:
            preprocess(explosion(diamonds=12).document, paths=1000)
        assert (info.value.start, info.value.end) == ("main_entry", "main_exit")

    def test_measurement_points_split_explosion(self) -> None:
        _, db = preprocess(explosion(measurement_every=6).document)
        sizes = {key: len(entry.candidates) for key, entry in db.entries.items()}
        assert sizes == {
            ("main_entry", "join_5"): 64,
            ("join_5", "join_11"): 64,
            ("join_11", "join_17"): 64,
            ("join_17", "main_exit"): 1,
        }

    @pytest.mark.slow
    def test_default_explosion_exceeds_default_budget(self) -> None:
        with pytest.raises(PathBudgetError):
            preprocess(explosion().document)

    def test_deterministic(self) -> None:
        _, first = preprocess(crypto().document)
        _, second = preprocess(crypto().document)
        assert canonical_json(first.to_json()) == canonical_json(second.to_json())


class TestSkipSegments:
    @pytest.fixture(name="db")
    def skip_db(self) -> SegmentDatabase:
        b = CfgBuilder()
        b.block("m0", "main", ["ecall", "jal"], measurement_point=True)
        b.block("m1", "main", ["ecall"], measurement_point=True)
        b.block("m2", "main", ["ecall"], measurement_point=True)
        b.block("f0", "f", ["lw", "bne"])
        b.block("f1", "f", ["jalr"])
        b.edge("f0", "f0").chain("f0", "f1").returns_from("f", "f1")
        b.call("m0", "f", "m1").chain("m1", "m2").skip("m0", "m1")
        return preprocess(b.build("m0"))[1]

    def test_transitions_instead_of_paths(self, db: SegmentDatabase) -> None:
        entry = db.entries[("m0", "m1")]
        assert entry.skip
        assert entry.candidates == ()
        assert entry.transitions == ((EMPTY_STACK, EMPTY_STACK),)
        assert entry.to_json()["transitions"] == [[[], []]]

    def test_other_segments_unaffected(self, db: SegmentDatabase) -> None:
        entry = db.entries[("m1", "m2")]
        assert not entry.skip
        assert [c.path for c in entry.candidates] == [("m1", "m2")]


class TestCallStacks:
    def test_candidates_carry_stacks(self) -> None:
        b = CfgBuilder()
        b.block("m0", "main", ["ecall", "jal"], measurement_point=True)
        b.block("m1", "main", ["ecall"], measurement_point=True)
        b.block("f0", "f", ["ecall", "addi"], measurement_point=True)
        b.block("f1", "f", ["jalr"])
        b.chain("f0", "f1").returns_from("f", "f1").call("m0", "f", "m1")
        _, db = preprocess(b.build("m0"))
        [into] = db.entries[("m0", "f0")].candidates
        [out] = db.entries[("f0", "m1")].candidates
        frame = (Frame("m0", "f"),)
        assert (into.entry_stack, into.exit_stack) == (EMPTY_STACK, frame)
        assert (out.entry_stack, out.exit_stack) == (frame, EMPTY_STACK)


def closure_by_fixed_point(
    enumerator: SegmentEnumerator, start: str, path: tuple[str, ...]
) -> set[tuple[int, ...]]:
    """Loop vectors of the cycles reachable from the path through shared nodes."""
    source = ExpandedNode(start, EMPTY_STACK)
    graph = enumerator.segment_graph(source)
    interior = [n for n in graph if isinstance(n, ExpandedNode) and n != source]
    cycles = [set(c) for c in nx.simple_cycles(graph.subgraph(interior))]
    touched = {ExpandedNode(b, EMPTY_STACK) for b in path[1:-1]}
    included: list[set[ExpandedNode]] = []
    changed = True
    while changed:
        changed = False
        for cycle in cycles:
            if cycle not in included and cycle & touched:
                included.append(cycle)
                touched |= cycle
                changed = True
    dimension = enumerator.cfg.dimension
    vectors = {sum_vectors((enumerator.deltas[n.block] for n in c), dimension) for c in included}
    return {v for v in vectors if any(v)}


class TestLoopClosure:
    @pytest.mark.parametrize("seed", range(25))
    def test_matches_fixed_point(self, seed: int) -> None:
        demo = random_program(random.Random(seed), max_blocks=14, max_functions=1)
        cfg = load_cfg(demo.document)
        enumerator = SegmentEnumerator(cfg, default_event_table())
        db = enumerator.enumerate()
        for (start, _), entry in db.entries.items():
            for candidate in entry.candidates:
                expected = closure_by_fixed_point(enumerator, start, candidate.path)
                assert set(candidate.loops) == expected, candidate.path
