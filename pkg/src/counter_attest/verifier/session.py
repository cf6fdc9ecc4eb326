from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Sequence

from counter_attest.cfg.stacks import EMPTY_STACK, CallStack
from counter_attest.cfg.trace import Measurement, MeasurementLog
from counter_attest.cfg.vectors import sub_vectors
from counter_attest.hpc.counters import CounterConfig
from counter_attest.hpc.exceptions import CounterConfigError
from counter_attest.preprocess.database import SegmentDatabase, SegmentEntry, dedup_key
from counter_attest.verifier.cone import DEFAULT_SOLVER_NODES, ConeProblem, ConeSolution, solve_cone


class Verdict(Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"


NO_SUCH_SEGMENT = "no-such-segment"
SESSION_REJECTED = "session-rejected"
SKIP_SEGMENT = "skip-segment"
NO_CANDIDATE = "no-candidate"


@dataclass(frozen=True)
class CachedVerdict:
    accepted: bool
    exit_stacks: frozenset[CallStack]
    accepting_candidates: tuple[int, ...]
    witness: tuple[int, ...] | None
    candidates_tried: int


@dataclass
class SessionState:
    """
    Verification state of one tracee run. The feasible set holds every call
    stack the program may be in at the last accepted measurement point.
    """

    feasible: frozenset[CallStack] = frozenset({EMPTY_STACK})
    cache: dict[str, CachedVerdict] = field(default_factory=dict)
    cache_hits: int = 0
    cache_misses: int = 0
    solver_invocations: int = 0
    rejected: bool = False

    @property
    def cache_hit_ratio(self) -> float:
        total = self.cache_hits + self.cache_misses
        return self.cache_hits / total if total else 0.0


@dataclass(frozen=True)
class VerificationResult:
    verdict: Verdict
    accepting_candidates: tuple[int, ...] = ()
    witness: tuple[int, ...] | None = None
    cache_hit: bool = False
    reason: str | None = None
    candidates_tried: int = 0
    solver_nodes: int = 0
    elapsed: float = 0.0

    @property
    def accepted(self) -> bool:
        return self.verdict == Verdict.ACCEPTED


def counter_config_for(db: SegmentDatabase, config: CounterConfig | None) -> CounterConfig:
    if config is None:
        return CounterConfig.identity(db.counters)
    if config.counters != db.counters:
        raise CounterConfigError(
            "Counter configuration is not over the counters of the segment database"
        )
    return config


def config_from_log(db: SegmentDatabase, log: MeasurementLog) -> CounterConfig:
    """Rebuilds the register layout from the labels recorded with the measurements."""
    return CounterConfig.parse(",".join(log.counters), db.counters)


def _solve_candidates(
    entry: SegmentEntry,
    state: SessionState,
    delta: Sequence[int],
    config: CounterConfig,
    max_nodes: int,
) -> tuple[CachedVerdict, int]:
    order = sorted(
        (i for i, c in enumerate(entry.candidates) if c.entry_stack in state.feasible),
        key=lambda i: (len(entry.candidates[i].loops), i),
    )
    solved: dict[ConeProblem, ConeSolution] = {}
    exits: set[CallStack] = set()
    accepting: list[int] = []
    witness = None
    tried = nodes = 0
    for i in order:
        candidate = entry.candidates[i]
        # Another accepting candidate already contributed this exit stack
        if candidate.exit_stack in exits:
            continue
        tried += 1
        problem = ConeProblem(
            sub_vectors(delta, config.project(candidate.base)),
            tuple(config.project(v) for v in candidate.loops),
        )
        solution = solved.get(problem)
        if solution is None:
            solution = solved[problem] = solve_cone(problem, max_nodes)
            nodes += solution.nodes
        if solution.assignment is not None:
            accepting.append(i)
            exits.add(candidate.exit_stack)
            if witness is None:
                witness = solution.assignment
    verdict = CachedVerdict(
        accepted=bool(accepting),
        exit_stacks=frozenset(exits),
        accepting_candidates=tuple(accepting),
        witness=witness,
        candidates_tried=tried,
    )
    return verdict, nodes


def verify_segment(
    db: SegmentDatabase,
    state: SessionState,
    m: Measurement,
    config: CounterConfig | None = None,
    *,
    use_cache: bool = True,
    offset: Sequence[int] | None = None,
    max_nodes: int = DEFAULT_SOLVER_NODES,
) -> VerificationResult:
    started = time.perf_counter()
    config = counter_config_for(db, config)
    if len(m.delta) != config.dimension:
        raise CounterConfigError(
            f"Measurement has {len(m.delta)} counters, the configuration "
            f"has {config.dimension} registers"
        )

    def finish(result: VerificationResult) -> VerificationResult:
        if not result.accepted:
            state.rejected = True
        return replace(result, elapsed=time.perf_counter() - started)

    if state.rejected:
        return finish(VerificationResult(Verdict.REJECTED, reason=SESSION_REJECTED))
    entry = db.get(m.start_block, m.end_block)
    if entry is None:
        return finish(VerificationResult(Verdict.REJECTED, reason=NO_SUCH_SEGMENT))
    if entry.skip:
        state.feasible = frozenset(exit for _, exit in entry.transitions)
        return finish(VerificationResult(Verdict.ACCEPTED, reason=SKIP_SEGMENT))

    delta = sub_vectors(m.delta, offset) if offset is not None else m.delta
    key = dedup_key(m.start_block, m.end_block, delta, state.feasible)
    cached = state.cache.get(key) if use_cache else None
    hit = cached is not None
    nodes = 0
    if cached is not None:
        state.cache_hits += 1
    else:
        if use_cache:
            state.cache_misses += 1
        state.solver_invocations += 1
        cached, nodes = _solve_candidates(entry, state, delta, config, max_nodes)
        if use_cache:
            state.cache[key] = cached

    if cached.accepted:
        state.feasible = cached.exit_stacks
    return finish(
        VerificationResult(
            Verdict.ACCEPTED if cached.accepted else Verdict.REJECTED,
            accepting_candidates=cached.accepting_candidates,
            witness=cached.witness,
            cache_hit=hit,
            reason=None if cached.accepted else NO_CANDIDATE,
            candidates_tried=0 if hit else cached.candidates_tried,
            solver_nodes=nodes,
        )
    )


@dataclass(frozen=True)
class TraceVerification:
    measurements: tuple[Measurement, ...]
    results: tuple[VerificationResult, ...]
    state: SessionState

    @property
    def accepted(self) -> bool:
        return len(self.results) == len(self.measurements) and all(
            r.accepted for r in self.results
        )

    @property
    def rejected_at(self) -> int | None:
        return next((i for i, r in enumerate(self.results) if not r.accepted), None)

    def to_json(self, include_timings: bool = False) -> dict[str, Any]:
        records = []
        for i, (m, r) in enumerate(zip(self.measurements, self.results)):
            record: dict[str, Any] = {
                "index": i,
                "start": m.start_block,
                "end": m.end_block,
                "verdict": r.verdict.value,
                "candidates_tried": r.candidates_tried,
                "solver_nodes": r.solver_nodes,
                "cache_hit": r.cache_hit,
            }
            if r.witness is not None:
                record["witness"] = list(r.witness)
            if r.reason is not None:
                record["reason"] = r.reason
            if include_timings:
                record["elapsed"] = r.elapsed
            records.append(record)
        summary: dict[str, Any] = {
            "segments": len(self.measurements),
            "accepted": sum(1 for r in self.results if r.accepted),
            "verdict": "accepted" if self.accepted else "rejected",
            "cache_hit_ratio": round(self.state.cache_hit_ratio, 6),
            "solver_invocations": self.state.solver_invocations,
        }
        if self.rejected_at is not None:
            summary["rejected_at"] = self.rejected_at
        return {"segments": records, "summary": summary}


def verify_trace_measurements(
    db: SegmentDatabase,
    measurements: Sequence[Measurement],
    config: CounterConfig | None = None,
    *,
    use_cache: bool = True,
    offset: Sequence[int] | None = None,
    max_nodes: int = DEFAULT_SOLVER_NODES,
    state: SessionState | None = None,
) -> TraceVerification:
    """Verifies the measurements of one run in order, stopping at the first rejection."""
    state = state if state is not None else SessionState()
    results: list[VerificationResult] = []
    for m in measurements:
        result = verify_segment(
            db, state, m, config, use_cache=use_cache, offset=offset, max_nodes=max_nodes
        )
        results.append(result)
        if not result.accepted:
            break
    return TraceVerification(tuple(measurements), tuple(results), state)
