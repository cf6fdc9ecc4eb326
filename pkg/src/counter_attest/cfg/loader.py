from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any, NoReturn

import networkx as nx

from counter_attest.cfg.enums import EdgeKind
from counter_attest.cfg.exceptions import InvalidDocumentError, RecursionDetectedError
from counter_attest.cfg.model import AnnotatedCfg, BasicBlock, Edge, Function
from counter_attest.utils.documents import DocumentReader, read_json_file
from counter_attest.utils.hashing import get_object_blake2b

if TYPE_CHECKING:
    from counter_attest.hpc.events import EventTable


class CfgDocumentParser:
    def __init__(self, document: Any, source: str = "<cfg>") -> None:
        self.reader = DocumentReader(
            document, source=source, error=InvalidDocumentError
        )
        self.reader.expect_keys(
            ("counters", "functions", "blocks", "edges", "entry"),
            ("skip_segments",),
        )

    def fail(self, message: str) -> NoReturn:
        self.reader.fail(message)

    @property
    def counters(self) -> tuple[str, ...]:
        counters = self.reader.get_string_list("counters")
        if len(set(counters)) != len(counters):
            self.fail("Duplicate counter name in counters")
        return tuple(counters)

    def parse_block(self, item: DocumentReader, dimension: int) -> BasicBlock:
        item.expect_keys(
            ("id", "function", "instruction_count", "is_measurement_point"),
            ("instructions", "delta"),
        )
        block_id = item.get_string("id")
        instructions = None
        delta = None
        if item.has("instructions"):
            instructions = tuple(item.get_string_list("instructions"))
        if item.has("delta"):
            delta = tuple(item.get_int_list("delta", minimum=0))
            if len(delta) != dimension:
                item.fail(
                    f"Block {block_id} delta has {len(delta)} entries, "
                    f"expected {dimension}"
                )
        if instructions is None and delta is None:
            item.fail(f"Block {block_id} needs instructions or delta")
        count = item.get_int("instruction_count", minimum=1)
        if instructions is not None and count != len(instructions):
            item.fail(
                f"Block {block_id} instruction_count {count} does not match "
                f"its {len(instructions)} instructions"
            )
        return BasicBlock(
            id=block_id,
            function=item.get_string("function"),
            instruction_count=count,
            is_measurement_point=item.get_bool("is_measurement_point"),
            instructions=instructions,
            delta=delta,
        )

    def parse_blocks(self, dimension: int) -> dict[str, BasicBlock]:
        blocks: dict[str, BasicBlock] = {}
        for item in self.reader.children("blocks"):
            block = self.parse_block(item, dimension)
            if block.id in blocks:
                self.fail(f"Duplicate block id {block.id}")
            blocks[block.id] = block
        return blocks

    def parse_functions(self, blocks: dict[str, BasicBlock]) -> dict[str, Function]:
        functions: dict[str, Function] = {}
        owner: dict[str, str] = {}
        for item in self.reader.children("functions"):
            item.expect_keys(("name", "entry", "blocks"))
            function = Function(
                name=item.get_string("name"),
                entry=item.get_string("entry"),
                blocks=tuple(item.get_string_list("blocks")),
            )
            if function.name in functions:
                self.fail(f"Duplicate function {function.name}")
            if function.entry not in function.blocks:
                self.fail(
                    f"Entry {function.entry} of {function.name} is not one of its blocks"
                )
            for block_id in function.blocks:
                if block_id not in blocks:
                    self.fail(f"Function {function.name} lists unknown block {block_id}")
                if block_id in owner:
                    self.fail(
                        f"Block {block_id} belongs to both {owner[block_id]} "
                        f"and {function.name}"
                    )
                if blocks[block_id].function != function.name:
                    self.fail(
                        f"Block {block_id} declares function "
                        f"{blocks[block_id].function}, listed in {function.name}"
                    )
                owner[block_id] = function.name
            functions[function.name] = function
        orphans = sorted(set(blocks) - owner.keys())
        if orphans:
            self.fail(f"Blocks without a function: {', '.join(orphans)}")
        return functions

    def parse_edges(
        self, blocks: dict[str, BasicBlock], functions: dict[str, Function]
    ) -> tuple[Edge, ...]:
        entries = {f.entry for f in functions.values()}
        edges: list[Edge] = []
        for item in self.reader.children("edges"):
            item.expect_keys(("from", "to", "kind"), ("return_to",))
            source, target = item.get_string("from"), item.get_string("to")
            for endpoint in (source, target):
                if endpoint not in blocks:
                    item.fail(f"Dangling edge endpoint {endpoint} in {source}->{target}")
            try:
                kind = EdgeKind(item.get_string("kind"))
            except ValueError:
                item.fail(f"Unknown edge kind {item.get_string('kind')}")
            return_to = item.get_optional_string("return_to")
            same_function = blocks[source].function == blocks[target].function
            if kind == EdgeKind.CALL and target not in entries:
                item.fail(f"Call edge {source}->{target} does not target a function entry")
            if kind == EdgeKind.RETURN and same_function:
                item.fail(f"Return edge {source}->{target} stays inside its function")
            if kind in (EdgeKind.FALLTHROUGH, EdgeKind.BRANCH) and not same_function:
                item.fail(f"Edge {source}->{target} of kind {kind.value} crosses functions")
            if kind == EdgeKind.INDIRECT and not same_function and target not in entries:
                item.fail(
                    f"Indirect edge {source}->{target} leaves its function "
                    f"without targeting an entry"
                )
            if return_to is not None:
                if kind != EdgeKind.CALL:
                    item.fail(f"return_to is only allowed on call edges ({source}->{target})")
                if return_to not in blocks:
                    item.fail(f"Dangling return_to {return_to}")
                if blocks[return_to].function != blocks[source].function:
                    item.fail(f"return_to {return_to} is not in the caller of {source}")
            edges.append(Edge(source, target, kind, return_to))
        return tuple(edges)

    def parse_skip_segments(
        self, blocks: dict[str, BasicBlock]
    ) -> frozenset[tuple[str, str]]:
        if not self.reader.has("skip_segments"):
            return frozenset()
        result: set[tuple[str, str]] = set()
        for pair in self.reader.get_list("skip_segments"):
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not all(isinstance(p, str) for p in pair)
            ):
                self.fail("skip_segments must contain [start, end] pairs")
            start, end = pair
            for endpoint in (start, end):
                if endpoint not in blocks or not blocks[endpoint].is_measurement_point:
                    self.fail(f"Skip segment endpoint {endpoint} is not a measurement point")
            result.add((start, end))
        return frozenset(result)

    def parse(self) -> AnnotatedCfg:
        counters = self.counters
        blocks = self.parse_blocks(len(counters))
        functions = self.parse_functions(blocks)
        edges = self.parse_edges(blocks, functions)
        entry = self.reader.get_string("entry")
        if entry not in blocks:
            self.fail(f"Entry {entry} is not a block")
        if not blocks[entry].is_measurement_point:
            self.fail(f"Entry {entry} must be a measurement point")
        cfg = AnnotatedCfg(
            counters=counters,
            functions=functions,
            blocks=blocks,
            edges=edges,
            entry=entry,
            skip_segments=self.parse_skip_segments(blocks),
        )
        check_no_recursion(cfg)
        return cfg


def call_graph(cfg: AnnotatedCfg) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted(cfg.functions))
    graph.add_edges_from(
        sorted(
            {
                (cfg.blocks[e.source].function, cfg.blocks[e.target].function)
                for e in cfg.edges
                if cfg.is_call(e)
            }
        )
    )
    return graph


def check_no_recursion(cfg: AnnotatedCfg) -> None:
    try:
        cycle = nx.find_cycle(call_graph(cfg))
    except nx.NetworkXNoCycle:
        return
    raise RecursionDetectedError([caller for caller, _ in cycle])


def check_against_table(cfg: AnnotatedCfg, table: EventTable) -> None:
    for block in cfg.blocks.values():
        if block.instructions is not None and block.delta is not None:
            computed = table.block_vector(block.instructions, cfg.counters)
            if computed != block.delta:
                raise InvalidDocumentError(
                    "<cfg>",
                    f"Block {block.id} delta {list(block.delta)} disagrees with "
                    f"its instructions {list(computed)}",
                )


def load_cfg(
    document: Any, source: str = "<cfg>", table: EventTable | None = None
) -> AnnotatedCfg:
    cfg = CfgDocumentParser(document, source).parse()
    if table is not None:
        check_against_table(cfg, table)
    return cfg


def load_cfg_file(path: Path, table: EventTable | None = None) -> AnnotatedCfg:
    return load_cfg(read_json_file(path, InvalidDocumentError), str(path), table)


def serialize_cfg(cfg: AnnotatedCfg) -> dict[str, Any]:
    def block_json(block: BasicBlock) -> dict[str, Any]:
        result: dict[str, Any] = {
            "id": block.id,
            "function": block.function,
            "instruction_count": block.instruction_count,
            "is_measurement_point": block.is_measurement_point,
        }
        if block.instructions is not None:
            result["instructions"] = list(block.instructions)
        if block.delta is not None:
            result["delta"] = list(block.delta)
        return result

    def edge_json(edge: Edge) -> dict[str, Any]:
        result = {"from": edge.source, "to": edge.target, "kind": edge.kind.value}
        if edge.return_to is not None:
            result["return_to"] = edge.return_to
        return result

    result: dict[str, Any] = {
        "counters": list(cfg.counters),
        "functions": [
            {"name": f.name, "entry": f.entry, "blocks": list(f.blocks)}
            for f in sorted(cfg.functions.values(), key=lambda f: f.name)
        ],
        "blocks": [block_json(cfg.blocks[k]) for k in sorted(cfg.blocks)],
        "edges": [
            edge_json(e)
            for e in sorted(
                cfg.edges, key=lambda e: (e.source, e.target, e.kind.value, e.return_to or "")
            )
        ],
        "entry": cfg.entry,
    }
    if cfg.skip_segments:
        result["skip_segments"] = [list(p) for p in sorted(cfg.skip_segments)]
    return result


def cfg_digest(cfg: AnnotatedCfg) -> str:
    return get_object_blake2b(serialize_cfg(cfg))
