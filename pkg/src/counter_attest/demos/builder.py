from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

from counter_attest.cfg.enums import EdgeKind
from counter_attest.hpc.events import default_event_table


@dataclass(frozen=True)
class Demo:
    name: str
    document: dict[str, Any]
    # A valid execution of the program, from the entry to a measurement point
    trace: tuple[str, ...]


@dataclass
class _FunctionDraft:
    name: str
    blocks: list[str] = field(default_factory=list)
    returns: list[str] = field(default_factory=list)


class CfgBuilder:
    """
    Assembles CFG documents over the default event table. Blocks carry
    mnemonics; measurement points are expected to contain an ecall.
    """

    def __init__(self, counters: Sequence[str] | None = None) -> None:
        self.counters = tuple(counters or default_event_table().counter_names)
        self.functions: dict[str, _FunctionDraft] = {}
        self.blocks: dict[str, dict[str, Any]] = {}
        self.edges: dict[tuple[str, str, str], dict[str, Any]] = {}
        self.calls: list[tuple[str, str, str]] = []
        self.skip_segments: list[list[str]] = []

    def block(
        self,
        block_id: str,
        function: str,
        instructions: Sequence[str],
        *,
        measurement_point: bool = False,
    ) -> CfgBuilder:
        assert block_id not in self.blocks, f"Duplicate block {block_id}"
        self.functions.setdefault(function, _FunctionDraft(function)).blocks.append(block_id)
        self.blocks[block_id] = {
            "id": block_id,
            "function": function,
            "instruction_count": len(instructions),
            "is_measurement_point": measurement_point,
            "instructions": list(instructions),
        }
        return self

    def edge(self, source: str, target: str, kind: EdgeKind = EdgeKind.FALLTHROUGH) -> CfgBuilder:
        self.edges[(source, target, kind.value)] = {
            "from": source,
            "to": target,
            "kind": kind.value,
        }
        return self

    def chain(self, *blocks: str) -> CfgBuilder:
        for source, target in zip(blocks, blocks[1:]):
            self.edge(source, target)
        return self

    def returns_from(self, function: str, *blocks: str) -> CfgBuilder:
        self.functions[function].returns.extend(blocks)
        return self

    def call(self, site: str, callee: str, return_to: str) -> CfgBuilder:
        self.calls.append((site, callee, return_to))
        return self

    def skip(self, start: str, end: str) -> CfgBuilder:
        self.skip_segments.append([start, end])
        return self

    def build(self, entry: str) -> dict[str, Any]:
        edges = dict(self.edges)
        for site, callee, return_to in self.calls:
            function = self.functions[callee]
            edges[(site, function.blocks[0], "call")] = {
                "from": site,
                "to": function.blocks[0],
                "kind": EdgeKind.CALL.value,
                "return_to": return_to,
            }
            for ret in function.returns:
                edges[(ret, return_to, "return")] = {
                    "from": ret,
                    "to": return_to,
                    "kind": EdgeKind.RETURN.value,
                }
        document: dict[str, Any] = {
            "counters": list(self.counters),
            "functions": [
                {"name": f.name, "entry": f.blocks[0], "blocks": list(f.blocks)}
                for f in self.functions.values()
            ],
            "blocks": list(self.blocks.values()),
            "edges": [edges[k] for k in sorted(edges)],
            "entry": entry,
        }
        if self.skip_segments:
            document["skip_segments"] = self.skip_segments
        return document
