from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from counter_attest.cfg.exceptions import EmptyTraceError, InvalidDocumentError
from counter_attest.cfg.model import AnnotatedCfg
from counter_attest.cfg.stacks import EMPTY_STACK, CallStack, replay_stack
from counter_attest.cfg.vectors import CounterVector
from counter_attest.utils.documents import DocumentReader, read_json_file


@dataclass(frozen=True)
class BlockTrace:
    steps: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Measurement:
    start_block: str
    end_block: str
    delta: CounterVector

    def to_json(self) -> dict[str, Any]:
        return {"start": self.start_block, "end": self.end_block, "delta": list(self.delta)}


def validate_trace(
    cfg: AnnotatedCfg,
    trace: BlockTrace,
    *,
    check_calls: bool = False,
    entry_stack: CallStack = EMPTY_STACK,
) -> bool:
    """
    True iff consecutive steps are CFG edges and both ends are measurement points.
    With check_calls the call/return discipline is replayed from entry_stack too.
    """
    if not trace.steps:
        raise EmptyTraceError()
    for step in trace.steps:
        cfg.block(step)
    if not (
        cfg.is_measurement_point(trace.steps[0])
        and cfg.is_measurement_point(trace.steps[-1])
    ):
        return False
    if not all(cfg.has_edge(a, b) for a, b in zip(trace.steps, trace.steps[1:])):
        return False
    if check_calls:
        return replay_stack(cfg, trace.steps, entry_stack) is not None
    return True


def split_trace(cfg: AnnotatedCfg, trace: BlockTrace) -> list[BlockTrace]:
    """
    Splits at measurement points; consecutive segments share their boundary step.
    """
    if not trace.steps:
        raise EmptyTraceError()
    boundaries = [i for i, step in enumerate(trace.steps) if cfg.is_measurement_point(step)]
    return [
        BlockTrace(trace.steps[start : end + 1])
        for start, end in zip(boundaries, boundaries[1:])
    ]


def segment_instruction_count(
    cfg: AnnotatedCfg, segment: BlockTrace, *, include_start: bool = False
) -> int:
    """
    The end block is attributed to the segment it terminates; the start block
    only counts for the first segment of a trace.
    """
    steps = segment.steps if include_start else segment.steps[1:]
    return cfg.instruction_total(steps)


def segment_instruction_counts(
    cfg: AnnotatedCfg, segments: Sequence[BlockTrace]
) -> list[int]:
    return [
        segment_instruction_count(cfg, segment, include_start=i == 0)
        for i, segment in enumerate(segments)
    ]


# Documents


def load_trace(document: Any, source: str = "<trace>") -> tuple[str, BlockTrace]:
    reader = DocumentReader(document, source=source, error=InvalidDocumentError)
    reader.expect_keys(("cfg_ref", "steps"))
    return reader.get_string("cfg_ref"), BlockTrace(tuple(reader.get_string_list("steps")))


def load_trace_file(path: Path) -> tuple[str, BlockTrace]:
    return load_trace(read_json_file(path, InvalidDocumentError), str(path))


def trace_to_json(cfg_ref: str, trace: BlockTrace) -> dict[str, Any]:
    return {"cfg_ref": cfg_ref, "steps": list(trace.steps)}


def load_measurement(reader: DocumentReader) -> Measurement:
    reader.expect_keys(("start", "end", "delta"))
    return Measurement(
        start_block=reader.get_string("start"),
        end_block=reader.get_string("end"),
        delta=tuple(reader.get_int_list("delta", minimum=0)),
    )


@dataclass(frozen=True)
class MeasurementLog:
    """
    The measurements of one run plus the digest of the CFG they belong to and
    the register labels of the counter configuration that produced them.
    """

    cfg_ref: str
    counters: tuple[str, ...]
    measurements: tuple[Measurement, ...]

    def to_json(self) -> dict[str, Any]:
        return {
            "cfg_ref": self.cfg_ref,
            "counters": list(self.counters),
            "measurements": [m.to_json() for m in self.measurements],
        }


def load_measurement_log(document: Any, source: str = "<measurements>") -> MeasurementLog:
    reader = DocumentReader(document, source=source, error=InvalidDocumentError)
    reader.expect_keys(("cfg_ref", "counters", "measurements"))
    counters = tuple(reader.get_string_list("counters"))
    measurements = tuple(load_measurement(m) for m in reader.children("measurements"))
    for i, m in enumerate(measurements):
        if len(m.delta) != len(counters):
            reader.fail(
                f"Measurement {i} has {len(m.delta)} counters, expected {len(counters)}"
            )
    return MeasurementLog(reader.get_string("cfg_ref"), counters, measurements)


def load_measurement_log_file(path: Path) -> MeasurementLog:
    return load_measurement_log(read_json_file(path, InvalidDocumentError), str(path))
