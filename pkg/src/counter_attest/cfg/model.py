from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

from counter_attest.cfg.enums import EdgeKind
from counter_attest.cfg.exceptions import UnknownBlockError
from counter_attest.cfg.vectors import CounterVector


@dataclass(frozen=True)
class BasicBlock:
    id: str
    function: str
    instruction_count: int
    is_measurement_point: bool = False
    instructions: tuple[str, ...] | None = None
    delta: CounterVector | None = None


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    kind: EdgeKind
    # Only meaningful for call edges: the block a matching return must land on
    return_to: str | None = None


@dataclass(frozen=True)
class Function:
    name: str
    entry: str
    blocks: tuple[str, ...]


@dataclass(frozen=True)
class AnnotatedCfg:
    counters: tuple[str, ...]
    functions: Mapping[str, Function]
    blocks: Mapping[str, BasicBlock]
    edges: tuple[Edge, ...]
    entry: str
    skip_segments: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    @property
    def dimension(self) -> int:
        return len(self.counters)

    @cached_property
    def _out_edges(self) -> Mapping[str, tuple[Edge, ...]]:
        result: dict[str, list[Edge]] = {block_id: [] for block_id in self.blocks}
        for edge in self.edges:
            result[edge.source].append(edge)
        return {k: tuple(v) for k, v in result.items()}

    @cached_property
    def _edge_set(self) -> frozenset[tuple[str, str]]:
        return frozenset((e.source, e.target) for e in self.edges)

    @cached_property
    def entry_blocks(self) -> Mapping[str, str]:
        """Maps a function entry block id to its function name."""
        return {f.entry: f.name for f in self.functions.values()}

    @cached_property
    def measurement_points(self) -> frozenset[str]:
        return frozenset(b.id for b in self.blocks.values() if b.is_measurement_point)

    def block(self, block_id: str) -> BasicBlock:
        try:
            return self.blocks[block_id]
        except KeyError:
            raise UnknownBlockError(block_id) from None

    def out_edges(self, block_id: str) -> tuple[Edge, ...]:
        return self._out_edges[self.block(block_id).id]

    def has_edge(self, source: str, target: str) -> bool:
        return (source, target) in self._edge_set

    def is_measurement_point(self, block_id: str) -> bool:
        return self.block(block_id).is_measurement_point

    def is_call(self, edge: Edge) -> bool:
        """Direct calls, and indirect edges that land on another function's entry."""
        if edge.kind == EdgeKind.CALL:
            return True
        return (
            edge.kind == EdgeKind.INDIRECT
            and edge.target in self.entry_blocks
            and self.blocks[edge.target].function != self.blocks[edge.source].function
        )

    def instruction_total(self, steps: Sequence[str]) -> int:
        return sum(self.block(s).instruction_count for s in steps)
