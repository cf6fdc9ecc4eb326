from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cache, cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from counter_attest.cfg.model import AnnotatedCfg, BasicBlock
from counter_attest.cfg.vectors import CounterVector, sum_vectors
from counter_attest.hpc.exceptions import EventTableError, UnknownMnemonicError
from counter_attest.utils.documents import DocumentReader, read_json_file

DEFAULT_TABLE_RESOURCE = "default_table.json"


@dataclass(frozen=True)
class CounterEvent:
    name: str
    deterministic: bool = True


@dataclass(frozen=True)
class EventTable:
    counters: tuple[CounterEvent, ...]
    attribution: Mapping[str, CounterVector]

    @property
    def dimension(self) -> int:
        return len(self.counters)

    @cached_property
    def counter_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.counters)

    @cached_property
    def deterministic(self) -> Mapping[str, bool]:
        return {c.name: c.deterministic for c in self.counters}

    @cached_property
    def instret_index(self) -> int:
        """The fixed counter: increments by exactly one for every mnemonic."""
        for index in range(self.dimension):
            if all(v[index] == 1 for v in self.attribution.values()):
                return index
        raise EventTableError("<table>", "No instructions-retired counter")

    def instruction_vector(self, mnemonic: str, block_id: str | None = None) -> CounterVector:
        try:
            return self.attribution[mnemonic]
        except KeyError:
            raise UnknownMnemonicError(mnemonic, block_id) from None

    def block_vector(
        self,
        instructions: Sequence[str],
        counters: Sequence[str] | None = None,
        block_id: str | None = None,
    ) -> CounterVector:
        """
        Componentwise sum of the attributions, optionally rearranged into the
        order of the given counter names.
        """
        total = sum_vectors(
            (self.instruction_vector(m, block_id) for m in instructions), self.dimension
        )
        if counters is None or tuple(counters) == self.counter_names:
            return total
        index = {name: i for i, name in enumerate(self.counter_names)}
        missing = [name for name in counters if name not in index]
        if missing:
            raise EventTableError(
                "<table>", f"Counters {', '.join(missing)} are not in the event table"
            )
        return tuple(total[index[name]] for name in counters)


def block_delta(table: EventTable, block: BasicBlock) -> CounterVector:
    if block.instructions is None:
        raise EventTableError("<table>", f"Block {block.id} carries no instructions")
    return table.block_vector(block.instructions, block_id=block.id)


def resolve_block_delta(
    cfg: AnnotatedCfg, table: EventTable | None, block_id: str
) -> CounterVector:
    """Delta of a block in the CFG's counter order; explicit deltas win."""
    block = cfg.block(block_id)
    if block.delta is not None:
        return block.delta
    if table is None:
        raise EventTableError(
            "<table>", f"Block {block_id} has no delta and no event table is given"
        )
    assert block.instructions is not None
    return table.block_vector(block.instructions, cfg.counters, block_id)


def resolve_block_deltas(
    cfg: AnnotatedCfg, table: EventTable | None
) -> dict[str, CounterVector]:
    return {block_id: resolve_block_delta(cfg, table, block_id) for block_id in cfg.blocks}


def load_event_table(document: Any, source: str = "<table>") -> EventTable:
    def error(src: str, message: str) -> EventTableError:
        return EventTableError(src, message)

    reader = DocumentReader(document, source=source, error=error)
    reader.expect_keys(("counters", "attribution"))
    counters: list[CounterEvent] = []
    for item in reader.children("counters"):
        item.expect_keys(("name", "deterministic"))
        name = item.get_string("name")
        if not name or "," in name or "+" in name:
            item.fail(f"Invalid counter name {name!r}")
        counters.append(CounterEvent(name, item.get_bool("deterministic")))
    if len({c.name for c in counters}) != len(counters):
        reader.fail("Duplicate counter name")
    attribution_reader = DocumentReader(
        reader.get_mapping("attribution"),
        source=source,
        error=error,
        where="$.attribution",
    )
    attribution: dict[str, CounterVector] = {}
    for mnemonic in sorted(attribution_reader.value):
        vector = tuple(attribution_reader.get_int_list(mnemonic, minimum=0))
        if len(vector) != len(counters):
            reader.fail(
                f"Attribution of {mnemonic} has {len(vector)} entries, "
                f"expected {len(counters)}"
            )
        attribution[mnemonic] = vector
    table = EventTable(tuple(counters), attribution)
    try:
        table.instret_index
    except EventTableError:
        reader.fail("No counter increments by exactly 1 for every mnemonic")
    return table


def load_event_table_file(path: Path) -> EventTable:
    return load_event_table(read_json_file(path, EventTableError), str(path))


@cache
def default_event_table() -> EventTable:
    text = resources.files("counter_attest.hpc").joinpath(DEFAULT_TABLE_RESOURCE).read_text()
    return load_event_table(json.loads(text), DEFAULT_TABLE_RESOURCE)


def get_event_table(path_or_default: str | Path | None) -> EventTable:
    if path_or_default is None or str(path_or_default) == "default":
        return default_event_table()
    return load_event_table_file(Path(path_or_default))
