from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Mapping, NamedTuple

import networkx as nx

from counter_attest.cfg.loader import cfg_digest
from counter_attest.cfg.model import AnnotatedCfg
from counter_attest.cfg.stacks import CallStack
from counter_attest.cfg.vectors import CounterVector, is_zero, sum_vectors
from counter_attest.hpc.events import EventTable, resolve_block_deltas
from counter_attest.preprocess.database import (
    PathCandidate,
    SegmentDatabase,
    SegmentEntry,
    SegmentKey,
    candidate_sort_key,
)
from counter_attest.preprocess.exceptions import CycleBudgetError, PathBudgetError
from counter_attest.preprocess.expansion import DEFAULT_NODE_BUDGET, ExpandedNode, expand

DEFAULT_PATH_BUDGET = 100_000
DEFAULT_CYCLE_BUDGET = 10_000


@dataclass(frozen=True)
class PreprocessBudgets:
    paths: int = DEFAULT_PATH_BUDGET
    cycles: int = DEFAULT_CYCLE_BUDGET
    nodes: int = DEFAULT_NODE_BUDGET


class SegmentExit(NamedTuple):
    """Sink standing for the measurement point that terminates a segment."""

    node: ExpandedNode


# Distinct loop vectors of a strongly connected region, each with the
# smallest instruction count among the cycles producing it
LoopSet = Mapping[CounterVector, int]


class SegmentEnumerator:
    def __init__(
        self,
        cfg: AnnotatedCfg,
        table: EventTable | None,
        budgets: PreprocessBudgets = PreprocessBudgets(),
    ) -> None:
        self.cfg = cfg
        self.budgets = budgets
        self.deltas = resolve_block_deltas(cfg, table)
        self.expanded = expand(cfg, budgets.nodes)
        self._region_loops: dict[frozenset[ExpandedNode], LoopSet] = {}

    def is_boundary(self, node: ExpandedNode) -> bool:
        return self.cfg.is_measurement_point(node.block)

    def segment_graph(self, source: ExpandedNode) -> nx.DiGraph:
        """
        Everything reachable from the source without crossing another
        measurement point; reached measurement points become SegmentExit sinks.
        """
        graph = nx.DiGraph()
        graph.add_node(source)
        queue = deque([source])
        seen = {source}
        while queue:
            node = queue.popleft()
            for succ in sorted(self.expanded.successors(node)):
                if self.is_boundary(succ):
                    graph.add_edge(node, SegmentExit(succ))
                    continue
                graph.add_edge(node, succ)
                if succ not in seen:
                    seen.add(succ)
                    queue.append(succ)
        return graph

    def region_loops(self, source: ExpandedNode, region: frozenset[ExpandedNode]) -> LoopSet:
        cached = self._region_loops.get(region)
        if cached is not None:
            return cached
        loops: dict[CounterVector, int] = {}
        subgraph = self.expanded.subgraph(region)
        for count, cycle in enumerate(nx.simple_cycles(subgraph), start=1):
            if count > self.budgets.cycles:
                raise CycleBudgetError(source.block, self.budgets.cycles)
            delta = sum_vectors((self.deltas[n.block] for n in cycle), self.cfg.dimension)
            if is_zero(delta):
                continue
            instructions = self.cfg.instruction_total([n.block for n in cycle])
            loops[delta] = min(instructions, loops.get(delta, instructions))
        self._region_loops[region] = loops
        return loops

    def loop_closure(
        self,
        source: ExpandedNode,
        path: list[ExpandedNode],
        regions: Mapping[ExpandedNode, frozenset[ExpandedNode]],
    ) -> dict[CounterVector, int]:
        """
        Loops transitively connected to the path. Cycles sharing nodes never
        leave a strongly connected region and every cycle of a region is
        reachable from any other through shared nodes, so the fixed point of
        the closure is the union of the cycles of the regions the path enters.
        """
        loops: dict[CounterVector, int] = {}
        visited: set[frozenset[ExpandedNode]] = set()
        for node in path:
            region = regions.get(node)
            if region is None or region in visited:
                continue
            visited.add(region)
            for delta, instructions in self.region_loops(source, region).items():
                loops[delta] = min(instructions, loops.get(delta, instructions))
        return loops

    @staticmethod
    def cyclic_regions(
        graph: nx.DiGraph, interior: list[ExpandedNode]
    ) -> dict[ExpandedNode, frozenset[ExpandedNode]]:
        subgraph = graph.subgraph(interior)
        regions: dict[ExpandedNode, frozenset[ExpandedNode]] = {}
        for component in nx.strongly_connected_components(subgraph):
            node = next(iter(component))
            if len(component) == 1 and not subgraph.has_edge(node, node):
                continue
            region = frozenset(component)
            for member in component:
                regions[member] = region
        return regions

    def segment_paths(
        self, source: ExpandedNode, graph: nx.DiGraph
    ) -> Iterator[list[ExpandedNode]]:
        sinks = sorted(n for n in graph if isinstance(n, SegmentExit))
        for sink in sinks:
            for path in nx.all_simple_paths(graph, source, sink):
                yield path[:-1] + [sink.node]

    def make_candidate(
        self, path: list[ExpandedNode], loops: Mapping[CounterVector, int]
    ) -> PathCandidate:
        # Snapshot-on-exit: the start block belongs to the previous segment
        counted = [n.block for n in path[1:]]
        ordered = sorted(loops)
        return PathCandidate(
            start=path[0],
            end=path[-1],
            base=sum_vectors((self.deltas[b] for b in counted), self.cfg.dimension),
            loops=tuple(ordered),
            base_instruction_count=self.cfg.instruction_total(counted),
            loop_instruction_counts=tuple(loops[v] for v in ordered),
            path=tuple(n.block for n in path),
        )

    def sources(self) -> list[ExpandedNode]:
        return sorted(n for n in self.expanded if self.is_boundary(n))

    def enumerate(self) -> SegmentDatabase:
        candidates: dict[SegmentKey, list[PathCandidate]] = {}
        transitions: dict[SegmentKey, set[tuple[CallStack, CallStack]]] = {}
        for source in self.sources():
            graph = self.segment_graph(source)
            exits = sorted(n.node for n in graph if isinstance(n, SegmentExit))
            for end in exits:
                key = (source.block, end.block)
                if key in self.cfg.skip_segments:
                    transitions.setdefault(key, set()).add((source.stack, end.stack))
            interior = [n for n in graph if isinstance(n, ExpandedNode) and n != source]
            regions = self.cyclic_regions(graph, interior)
            for path in self.segment_paths(source, graph):
                key = (source.block, path[-1].block)
                if key in self.cfg.skip_segments:
                    continue
                found = candidates.setdefault(key, [])
                if len(found) >= self.budgets.paths:
                    raise PathBudgetError(key[0], key[1], self.budgets.paths)
                loops = self.loop_closure(source, path[1:-1], regions)
                found.append(self.make_candidate(path, loops))

        entries: dict[SegmentKey, SegmentEntry] = {}
        for key, found in candidates.items():
            entries[key] = SegmentEntry(
                key[0], key[1], tuple(sorted(found, key=candidate_sort_key))
            )
        for key, pairs in transitions.items():
            entries[key] = SegmentEntry(
                key[0], key[1], skip=True, transitions=tuple(sorted(pairs))
            )
        return SegmentDatabase(self.cfg.counters, cfg_digest(self.cfg), entries)


def enumerate_segments(
    cfg: AnnotatedCfg,
    table: EventTable | None,
    budgets: PreprocessBudgets = PreprocessBudgets(),
) -> SegmentDatabase:
    return SegmentEnumerator(cfg, table, budgets).enumerate()
