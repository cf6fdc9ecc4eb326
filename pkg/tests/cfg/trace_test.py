from __future__ import annotations

import pytest

from counter_attest.cfg.exceptions import EmptyTraceError, InvalidDocumentError, UnknownBlockError
from counter_attest.cfg.loader import load_cfg
from counter_attest.cfg.model import AnnotatedCfg
from counter_attest.cfg.trace import (
    BlockTrace,
    Measurement,
    MeasurementLog,
    load_measurement_log,
    load_trace,
    segment_instruction_counts,
    split_trace,
    trace_to_json,
    validate_trace,
)
from counter_attest.demos.builder import CfgBuilder
from counter_attest.demos.programs import fig2, loop_ecall


@pytest.fixture(name="cfg")
def fig2_cfg() -> AnnotatedCfg:
    return load_cfg(fig2().document)


class TestValidateTrace:
    def test_canonical(self, cfg: AnnotatedCfg) -> None:
        assert validate_trace(cfg, BlockTrace(fig2().trace))

    def test_missing_edge(self, cfg: AnnotatedCfg) -> None:
        assert not validate_trace(cfg, BlockTrace(("A", "B", "E", "B", "C")))

    def test_must_end_at_measurement_point(self, cfg: AnnotatedCfg) -> None:
        assert not validate_trace(cfg, BlockTrace(("A", "B", "D")))

    def test_empty(self, cfg: AnnotatedCfg) -> None:
        with pytest.raises(EmptyTraceError):
            validate_trace(cfg, BlockTrace(()))

    def test_unknown_block(self, cfg: AnnotatedCfg) -> None:
        with pytest.raises(UnknownBlockError):
            validate_trace(cfg, BlockTrace(("A", "Q", "C")))

    def test_call_discipline(self) -> None:
        b = CfgBuilder()
        b.block("m0", "main", ["ecall"], measurement_point=True)
        b.block("m1", "main", ["ecall"], measurement_point=True)
        b.block("m2", "main", ["ecall"], measurement_point=True)
        b.block("f0", "f", ["add", "jalr"])
        b.call("m0", "f", "m1").call("m1", "f", "m2").returns_from("f", "f0")
        cfg = load_cfg(b.build("m0"))
        # Both edges exist, but f returns to the other call site
        crossed = BlockTrace(("m0", "f0", "m2"))
        assert validate_trace(cfg, crossed)
        assert not validate_trace(cfg, crossed, check_calls=True)
        assert validate_trace(cfg, BlockTrace(("m0", "f0", "m1", "f0", "m2")), check_calls=True)


class TestSplitTrace:
    def test_single_segment(self, cfg: AnnotatedCfg) -> None:
        trace = BlockTrace(fig2().trace)
        assert split_trace(cfg, trace) == [trace]

    def test_shared_boundaries(self) -> None:
        demo = loop_ecall(iterations=3)
        segments = split_trace(load_cfg(demo.document), BlockTrace(demo.trace))
        assert [s.steps for s in segments] == [
            ("main_entry", "prepare", "loop_latch"),
            ("loop_latch", "loop_body", "loop_latch"),
            ("loop_latch", "loop_body", "loop_latch"),
            ("loop_latch", "loop_body", "loop_latch"),
            ("loop_latch", "finish", "main_exit"),
        ]

    def test_instruction_counts(self) -> None:
        demo = loop_ecall(iterations=2)
        cfg = load_cfg(demo.document)
        segments = split_trace(cfg, BlockTrace(demo.trace))
        # main_entry 1, prepare 2, loop_latch 3, loop_body 4, finish 1, main_exit 1
        assert segment_instruction_counts(cfg, segments) == [6, 7, 7, 2]

    def test_no_segments(self, cfg: AnnotatedCfg) -> None:
        assert split_trace(cfg, BlockTrace(("A",))) == []


class TestDocuments:
    def test_trace(self) -> None:
        ref, trace = load_trace(trace_to_json("digest", BlockTrace(("A", "C"))))
        assert ref == "digest"
        assert trace.steps == ("A", "C")

    def test_measurement_log(self) -> None:
        log = MeasurementLog("digest", ("x", "y"), (Measurement("A", "C", (3, 1)),))
        assert load_measurement_log(log.to_json()) == log

    def test_measurement_log_dimension(self) -> None:
        document = {
            "cfg_ref": "digest",
            "counters": ["x", "y"],
            "measurements": [{"start": "A", "end": "C", "delta": [3]}],
        }
        with pytest.raises(InvalidDocumentError, match="expected 2"):
            load_measurement_log(document)
