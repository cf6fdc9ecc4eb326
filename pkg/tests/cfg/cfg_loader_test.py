from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import pytest

from counter_attest.cfg.enums import EdgeKind
from counter_attest.cfg.exceptions import InvalidDocumentError, RecursionDetectedError
from counter_attest.cfg.loader import (
    call_graph,
    cfg_digest,
    load_cfg,
    load_cfg_file,
    serialize_cfg,
)
from counter_attest.demos.programs import fig2, hello
from counter_attest.hpc.events import default_event_table


def _asset(name: str) -> Path:
    path = Path(__file__).parent / "test_assets" / name
    assert path.exists(), f"Asset {path} does not exist"
    return path


@pytest.fixture(name="document")
def fig2_document() -> dict[str, Any]:
    return copy.deepcopy(fig2().document)


class TestLoading:
    def test_fig2(self, document: dict[str, Any]) -> None:
        cfg = load_cfg(document)
        assert len(cfg.blocks) == 7
        assert len(cfg.edges) == 8
        assert cfg.entry == "A"
        assert cfg.measurement_points == {"A", "C"}
        assert cfg.dimension == len(default_event_table().counter_names)

    def test_file(self) -> None:
        cfg = load_cfg_file(_asset("straight.cfg.json"))
        assert cfg.counters == ("instructions_retired", "int_loads_retired")
        assert cfg.blocks["B"].delta == (3, 2)
        assert [e.kind for e in cfg.out_edges("A")] == [EdgeKind.FALLTHROUGH]

    def test_truncated_file(self) -> None:
        with pytest.raises(InvalidDocumentError, match="Failed to parse JSON"):
            load_cfg_file(_asset("truncated.cfg.json"))

    def test_missing_file(self) -> None:
        with pytest.raises(InvalidDocumentError, match="does not exist"):
            load_cfg_file(Path(__file__).parent / "test_assets" / "missing.json")

    def test_recursion(self) -> None:
        with pytest.raises(RecursionDetectedError) as info:
            load_cfg_file(_asset("recursive.cfg.json"))
        assert set(info.value.cycle) == {"f", "g"}
        assert str(info.value).startswith("recursion detected: ")

    def test_call_graph(self) -> None:
        graph = call_graph(load_cfg(hello().document))
        assert set(graph.edges) == {("main", "puts")}

    def test_checked_against_table(self, document: dict[str, Any]) -> None:
        table = default_event_table()
        cfg = load_cfg(document, table=table)
        assert cfg.blocks["B"].delta is None
        document["blocks"][1]["delta"] = [0] * table.dimension
        with pytest.raises(InvalidDocumentError, match="disagrees"):
            load_cfg(document, table=table)


class TestValidation:
    def test_unknown_key(self, document: dict[str, Any]) -> None:
        document["extra"] = 1
        with pytest.raises(InvalidDocumentError, match="Unknown key extra"):
            load_cfg(document)

    def test_missing_key(self, document: dict[str, Any]) -> None:
        del document["entry"]
        with pytest.raises(InvalidDocumentError, match="Missing entry"):
            load_cfg(document)

    def test_dangling_edge(self, document: dict[str, Any]) -> None:
        document["edges"].append({"from": "A", "to": "Z", "kind": "branch"})
        with pytest.raises(InvalidDocumentError, match="Dangling"):
            load_cfg(document)

    def test_unknown_edge_kind(self, document: dict[str, Any]) -> None:
        document["edges"][0]["kind"] = "jump"
        with pytest.raises(InvalidDocumentError, match="Unknown edge kind"):
            load_cfg(document)

    def test_duplicate_block(self, document: dict[str, Any]) -> None:
        document["blocks"].append(dict(document["blocks"][0]))
        with pytest.raises(InvalidDocumentError, match="Duplicate block"):
            load_cfg(document)

    def test_instruction_count_mismatch(self, document: dict[str, Any]) -> None:
        document["blocks"][1]["instruction_count"] += 1
        with pytest.raises(InvalidDocumentError, match="does not match"):
            load_cfg(document)

    def test_negative_delta(self) -> None:
        document = load_cfg_file(_asset("straight.cfg.json"))
        as_json = serialize_cfg(document)
        as_json["blocks"][1]["delta"] = [-1, 0]
        with pytest.raises(InvalidDocumentError, match=">= 0"):
            load_cfg(as_json)

    def test_empty_block(self, document: dict[str, Any]) -> None:
        document["blocks"][1]["instructions"] = []
        document["blocks"][1]["instruction_count"] = 0
        with pytest.raises(InvalidDocumentError, match="integer >= 1"):
            load_cfg(document)

    def test_entry_must_be_measurement_point(self, document: dict[str, Any]) -> None:
        document["entry"] = "B"
        with pytest.raises(InvalidDocumentError, match="measurement point"):
            load_cfg(document)

    def test_fallthrough_across_functions(self) -> None:
        document = copy.deepcopy(hello().document)
        document["edges"].append({"from": "main_setup", "to": "puts_char", "kind": "fallthrough"})
        with pytest.raises(InvalidDocumentError, match="crosses functions"):
            load_cfg(document)

    def test_call_must_target_entry(self) -> None:
        document = copy.deepcopy(hello().document)
        document["edges"].append({"from": "main_setup", "to": "puts_char", "kind": "call"})
        with pytest.raises(InvalidDocumentError, match="function entry"):
            load_cfg(document)

    def test_skip_segment_endpoints(self, document: dict[str, Any]) -> None:
        document["skip_segments"] = [["A", "B"]]
        with pytest.raises(InvalidDocumentError, match="not a measurement point"):
            load_cfg(document)
        document["skip_segments"] = [["A", "C"]]
        assert load_cfg(document).skip_segments == {("A", "C")}


class TestDigest:
    def test_independent_of_ordering(self, document: dict[str, Any]) -> None:
        shuffled = copy.deepcopy(document)
        shuffled["blocks"].reverse()
        shuffled["edges"].reverse()
        shuffled = {k: shuffled[k] for k in reversed(list(shuffled))}
        assert cfg_digest(load_cfg(shuffled)) == cfg_digest(load_cfg(document))

    def test_changes_with_content(self, document: dict[str, Any]) -> None:
        original = cfg_digest(load_cfg(document))
        document["blocks"][3]["is_measurement_point"] = True
        document["blocks"][3]["instructions"] = ["ecall", "bne"]
        assert cfg_digest(load_cfg(document)) != original

    def test_serialize_round_trip(self, document: dict[str, Any]) -> None:
        cfg = load_cfg(document)
        assert load_cfg(serialize_cfg(cfg)) == cfg
