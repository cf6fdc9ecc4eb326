from __future__ import annotations

from pathlib import Path
from typing import Any

from counter_attest.cfg.stacks import CallStack, Frame
from counter_attest.preprocess.database import (
    DATABASE_FORMAT_VERSION,
    PathCandidate,
    SegmentDatabase,
    SegmentEntry,
)
from counter_attest.preprocess.expansion import ExpandedNode
from counter_attest.utils.documents import DocumentReader, read_json_file
from counter_attest.verifier.exceptions import DatabaseFormatError, DigestMismatchError


def _stack(reader: DocumentReader, value: Any) -> CallStack:
    if not isinstance(value, list):
        reader.fail(f"Call stack must be a list at {reader.where}")
    frames = []
    for frame in value:
        if (
            not isinstance(frame, list)
            or len(frame) != 2
            or not all(isinstance(x, str) for x in frame)
        ):
            reader.fail(f"Call stack frames must be [call_site, callee] at {reader.where}")
        frames.append(Frame(frame[0], frame[1]))
    return tuple(frames)


def _candidate(reader: DocumentReader, start: str, end: str, dimension: int) -> PathCandidate:
    reader.expect_keys(
        ("entry_stack", "exit_stack", "path", "base", "base_instruction_count", "loops")
    )
    path = tuple(reader.get_string_list("path"))
    if len(path) < 2 or path[0] != start or path[-1] != end:
        reader.fail(f"Candidate path does not run from {start} to {end}")
    base = tuple(reader.get_int_list("base", minimum=0))
    loops, loop_counts = [], []
    for loop in reader.children("loops"):
        loop.expect_keys(("delta", "instruction_count"))
        loops.append(tuple(loop.get_int_list("delta", minimum=0)))
        loop_counts.append(loop.get_int("instruction_count", minimum=0))
    for vector in (base, *loops):
        if len(vector) != dimension:
            reader.fail(f"Vector of dimension {len(vector)}, expected {dimension}")
    return PathCandidate(
        start=ExpandedNode(start, _stack(reader, reader.value["entry_stack"])),
        end=ExpandedNode(end, _stack(reader, reader.value["exit_stack"])),
        base=base,
        loops=tuple(loops),
        base_instruction_count=reader.get_int("base_instruction_count", minimum=0),
        loop_instruction_counts=tuple(loop_counts),
        path=path,
    )


def _segment(reader: DocumentReader, dimension: int) -> SegmentEntry:
    reader.expect_keys(("start", "end", "skip", "candidates"), ("transitions",))
    start, end = reader.get_string("start"), reader.get_string("end")
    skip = reader.get_bool("skip")
    candidates = tuple(_candidate(c, start, end, dimension) for c in reader.children("candidates"))
    transitions = []
    if skip:
        for pair in reader.get_list("transitions"):
            if not isinstance(pair, list) or len(pair) != 2:
                reader.fail("Transitions must be [entry_stack, exit_stack] pairs")
            transitions.append((_stack(reader, pair[0]), _stack(reader, pair[1])))
    elif reader.has("transitions"):
        reader.fail(f"Segment {start}->{end} is not a skip segment but has transitions")
    return SegmentEntry(start, end, candidates, skip, tuple(transitions))


def load_database(document: Any, source: str = "<database>") -> SegmentDatabase:
    reader = DocumentReader(document, source=source, error=DatabaseFormatError)
    reader.expect_keys(("format", "cfg_digest", "counters", "segments"))
    version = reader.get_int("format")
    if version != DATABASE_FORMAT_VERSION:
        reader.fail(f"Unsupported format {version}, expected {DATABASE_FORMAT_VERSION}")
    counters = tuple(reader.get_string_list("counters"))
    entries = {}
    for item in reader.children("segments"):
        entry = _segment(item, len(counters))
        if entry.key in entries:
            reader.fail(f"Duplicate segment {entry.start}->{entry.end}")
        entries[entry.key] = entry
    return SegmentDatabase(counters, reader.get_string("cfg_digest"), entries)


def load_database_file(path: Path) -> SegmentDatabase:
    return load_database(read_json_file(path, DatabaseFormatError), str(path))


def check_digest(db: SegmentDatabase, what: str, digest: str) -> None:
    if db.cfg_digest != digest:
        raise DigestMismatchError(what, db.cfg_digest, digest)
