from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

from rich.table import Table

from counter_attest.attacks.enums import MutationKind
from counter_attest.attacks.exceptions import BaselineRejectedError, NoApplicableMutationError
from counter_attest.attacks.mutations import MutationSpec, Mutator
from counter_attest.cfg.model import AnnotatedCfg
from counter_attest.cfg.stacks import EMPTY_STACK, CallStack, replay_stack
from counter_attest.cfg.trace import (
    BlockTrace,
    Measurement,
    segment_instruction_counts,
    split_trace,
)
from counter_attest.cfg.vectors import CounterVector
from counter_attest.hpc.counters import CounterConfig
from counter_attest.hpc.events import EventTable
from counter_attest.preprocess.database import SegmentDatabase, dedup_key
from counter_attest.tracesim.simulate import SimConfig, Simulator
from counter_attest.utils.cli_tools import render_plain
from counter_attest.verifier.session import SessionState, verify_segment

PERTURBATION_NOTE = "random_change perturbs every counter independently within +-10%"


@dataclass(frozen=True)
class SegmentReliability:
    index: int
    start: str
    end: str
    attempted: int
    detected: int
    # Occurrences of this segment in the trace and their summed instruction count
    frequency: int
    instruction_count: int

    @property
    def rate(self) -> Fraction:
        return Fraction(self.detected, self.attempted)

    def to_json(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "start": self.start,
            "end": self.end,
            "attempted": self.attempted,
            "detected": self.detected,
            "rate": float(self.rate),
            "frequency": self.frequency,
            "instruction_count": self.instruction_count,
        }


@dataclass(frozen=True)
class ExcludedSegment:
    index: int
    start: str
    end: str
    reason: str


def compute_metrics(
    rows: Iterable[tuple[Fraction, int, int]],
) -> tuple[Fraction | None, Fraction | None]:
    """
    Uniform and instruction-weighted detection rates over (rate, frequency,
    instructions) rows; None when there is nothing to average.
    """
    rows = list(rows)
    occurrences = sum(f for _, f, _ in rows)
    instructions = sum(n for _, _, n in rows)
    uniform = sum((r * f for r, f, _ in rows), Fraction(0)) / occurrences if occurrences else None
    weighted = (
        sum((r * n for r, _, n in rows), Fraction(0)) / instructions if instructions else None
    )
    return uniform, weighted


def _metric_json(value: Fraction | None) -> dict[str, Any] | None:
    if value is None:
        return None
    return {"value": round(float(value), 6), "exact": str(value)}


@dataclass(frozen=True)
class ReliabilityReport:
    kind: MutationKind
    segments: tuple[SegmentReliability, ...]
    excluded: tuple[ExcludedSegment, ...]

    @property
    def metrics(self) -> tuple[Fraction | None, Fraction | None]:
        return compute_metrics((s.rate, s.frequency, s.instruction_count) for s in self.segments)

    @property
    def metric_uniform(self) -> Fraction | None:
        return self.metrics[0]

    @property
    def metric_weighted(self) -> Fraction | None:
        return self.metrics[1]

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "per_segment": [s.to_json() for s in self.segments],
            "excluded": [
                {"index": e.index, "start": e.start, "end": e.end, "reason": e.reason}
                for e in self.excluded
            ],
            "metric_uniform": _metric_json(self.metric_uniform),
            "metric_weighted": _metric_json(self.metric_weighted),
        }


@dataclass(frozen=True)
class EvaluationReport:
    experiment: str
    counters: tuple[str, ...]
    reports: tuple[ReliabilityReport, ...]

    def get(self, kind: MutationKind) -> ReliabilityReport | None:
        return next((r for r in self.reports if r.kind == kind), None)

    def to_json(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "counters": list(self.counters),
            "note": PERTURBATION_NOTE,
            "reports": [r.to_json() for r in self.reports],
        }


@dataclass(frozen=True)
class _SegmentGroup:
    index: int
    segment: BlockTrace
    measurement: Measurement
    feasible: frozenset[CallStack]
    entry_stack: CallStack
    frequency: int
    instruction_count: int


def _group_segments(
    cfg: AnnotatedCfg,
    db: SegmentDatabase,
    config: CounterConfig,
    simulator: Simulator,
    trace: BlockTrace,
    offset: CounterVector | None,
) -> list[_SegmentGroup]:
    """
    Verifies the unmodified trace and merges segments that the verifier can't
    tell apart, remembering how often each one occurred.
    """
    segments = split_trace(cfg, trace)
    instructions = segment_instruction_counts(cfg, segments)
    state = SessionState()
    stack: CallStack | None = EMPTY_STACK
    groups: dict[str, _SegmentGroup] = {}
    for i, segment in enumerate(segments):
        assert stack is not None
        measurement = simulator.measure_segment(segment)
        feasible = state.feasible
        if not verify_segment(db, state, measurement, config, offset=offset).accepted:
            raise BaselineRejectedError(i)
        key = dedup_key(measurement.start_block, measurement.end_block, measurement.delta, feasible)
        group = groups.get(key)
        if group is None:
            groups[key] = _SegmentGroup(i, segment, measurement, feasible, stack, 1, instructions[i])
        else:
            groups[key] = _SegmentGroup(
                group.index,
                group.segment,
                group.measurement,
                group.feasible,
                group.entry_stack,
                group.frequency + 1,
                group.instruction_count + instructions[i],
            )
        stack = replay_stack(cfg, segment.steps, stack)
    return sorted(groups.values(), key=lambda g: g.index)


def evaluate(
    cfg: AnnotatedCfg,
    db: SegmentDatabase,
    table: EventTable | None,
    trace: BlockTrace,
    specs: Sequence[MutationSpec],
    config: CounterConfig,
    *,
    offset: CounterVector | None = None,
    experiment: str = "",
) -> EvaluationReport:
    """
    Detection rate of every mutation kind on every distinct segment of a
    valid trace. Block-level mutants are executed again by the simulator;
    counter perturbations corrupt the measurement directly.
    """
    simulator = Simulator(cfg, SimConfig(table, config, offset=offset))
    mutator = Mutator(cfg, table, config)
    groups = _group_segments(cfg, db, config, simulator, trace, offset)
    reports = []
    for spec in specs:
        rows: list[SegmentReliability] = []
        excluded: list[ExcludedSegment] = []
        for group in groups:
            start, end = group.measurement.start_block, group.measurement.end_block
            try:
                mutants = mutator.mutate(
                    group.segment,
                    spec,
                    entry_stack=group.entry_stack,
                    measurement=group.measurement,
                    segment_index=group.index,
                )
            except NoApplicableMutationError as ex:
                excluded.append(ExcludedSegment(group.index, start, end, str(ex)))
                continue
            detected = 0
            for mutant in mutants:
                measured = (
                    simulator.measure_segment(mutant)
                    if isinstance(mutant, BlockTrace)
                    else mutant
                )
                state = SessionState(feasible=group.feasible)
                result = verify_segment(
                    db, state, measured, config, use_cache=False, offset=offset
                )
                detected += not result.accepted
            rows.append(
                SegmentReliability(
                    group.index,
                    start,
                    end,
                    len(mutants),
                    detected,
                    group.frequency,
                    group.instruction_count,
                )
            )
        reports.append(ReliabilityReport(spec.kind, tuple(rows), tuple(excluded)))
    return EvaluationReport(experiment, config.labels, tuple(reports))


def _cell(report: ReliabilityReport | None) -> str:
    if report is None:
        return ""
    uniform, weighted = report.metrics
    if uniform is None or weighted is None:
        return "n/a"
    return f"{float(uniform):.3f}, {float(weighted):.3f}"


def render_reliability_table(evaluations: Sequence[EvaluationReport]) -> str:
    """Rows are experiments, cells hold "uniform, weighted" per mutation kind."""
    kinds = [k for k in MutationKind if any(e.get(k) for e in evaluations)]
    table = Table(title="Reliability (uniform, weighted)", caption=PERTURBATION_NOTE)
    table.add_column("Experiment")
    for kind in kinds:
        table.add_column(kind.value, justify="right")
    for evaluation in evaluations:
        table.add_row(evaluation.experiment, *(_cell(evaluation.get(k)) for k in kinds))
    return render_plain(table)
