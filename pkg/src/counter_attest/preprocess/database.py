from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

from counter_attest.cfg.stacks import CallStack, stack_to_json
from counter_attest.cfg.vectors import CounterVector
from counter_attest.preprocess.expansion import ExpandedNode
from counter_attest.utils.hashing import get_object_blake2b

DATABASE_FORMAT_VERSION = 1

SegmentKey = tuple[str, str]


@dataclass(frozen=True)
class PathCandidate:
    """
    One simple path between two measurement points together with every loop
    that it can be extended by. The measured delta of any walk that follows
    this path is base plus a nonnegative integer combination of the loops.
    """

    start: ExpandedNode
    end: ExpandedNode
    base: CounterVector
    loops: tuple[CounterVector, ...]
    base_instruction_count: int
    loop_instruction_counts: tuple[int, ...]
    path: tuple[str, ...]

    @property
    def entry_stack(self) -> CallStack:
        return self.start.stack

    @property
    def exit_stack(self) -> CallStack:
        return self.end.stack

    def to_json(self) -> dict[str, Any]:
        return {
            "entry_stack": stack_to_json(self.entry_stack),
            "exit_stack": stack_to_json(self.exit_stack),
            "path": list(self.path),
            "base": list(self.base),
            "base_instruction_count": self.base_instruction_count,
            "loops": [
                {"delta": list(v), "instruction_count": n}
                for v, n in zip(self.loops, self.loop_instruction_counts)
            ],
        }


def candidate_sort_key(candidate: PathCandidate) -> tuple[Any, ...]:
    return (
        stack_to_json(candidate.entry_stack),
        stack_to_json(candidate.exit_stack),
        candidate.path,
    )


@dataclass(frozen=True)
class SegmentEntry:
    start: str
    end: str
    candidates: tuple[PathCandidate, ...] = ()
    # Skip segments carry reachable (entry stack, exit stack) pairs instead of paths
    skip: bool = False
    transitions: tuple[tuple[CallStack, CallStack], ...] = ()

    @property
    def key(self) -> SegmentKey:
        return self.start, self.end

    @property
    def loop_count(self) -> int:
        return len({v for c in self.candidates for v in c.loops})

    def to_json(self) -> dict[str, Any]:
        result: dict[str, Any] = {
            "start": self.start,
            "end": self.end,
            "skip": self.skip,
            "candidates": [c.to_json() for c in self.candidates],
        }
        if self.skip:
            result["transitions"] = [
                [stack_to_json(entry), stack_to_json(exit)]
                for entry, exit in self.transitions
            ]
        return result


@dataclass(frozen=True)
class SegmentDatabase:
    counters: tuple[str, ...]
    cfg_digest: str
    entries: Mapping[SegmentKey, SegmentEntry]

    @property
    def dimension(self) -> int:
        return len(self.counters)

    def get(self, start: str, end: str) -> SegmentEntry | None:
        return self.entries.get((start, end))

    @cached_property
    def loop_vectors(self) -> tuple[CounterVector, ...]:
        return tuple(
            sorted({v for e in self.entries.values() for c in e.candidates for v in c.loops})
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "format": DATABASE_FORMAT_VERSION,
            "cfg_digest": self.cfg_digest,
            "counters": list(self.counters),
            "segments": [self.entries[k].to_json() for k in sorted(self.entries)],
        }


@dataclass(frozen=True)
class SegmentStats:
    start: str
    end: str
    paths: int
    loops: int
    skip: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "start": self.start,
            "end": self.end,
            "paths": self.paths,
            "loops": self.loops,
            "skip": self.skip,
        }


def database_stats(db: SegmentDatabase) -> list[SegmentStats]:
    return [
        SegmentStats(e.start, e.end, len(e.candidates), e.loop_count, e.skip)
        for e in (db.entries[k] for k in sorted(db.entries))
    ]


def dedup_key(
    start: str, end: str, measurement: Sequence[int], entry_stacks: Iterable[CallStack]
) -> str:
    """
    Content-derived key of a segment verification: segments with equal
    endpoints, measured values and possible entry stacks get equal verdicts.
    """
    return get_object_blake2b(
        {
            "start": start,
            "end": end,
            "measurement": list(measurement),
            "entry_stacks": sorted(stack_to_json(s) for s in set(entry_stacks)),
        }
    )
