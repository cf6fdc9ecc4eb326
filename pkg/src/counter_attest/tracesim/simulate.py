from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

from counter_attest.cfg.model import AnnotatedCfg
from counter_attest.cfg.trace import BlockTrace, Measurement, split_trace
from counter_attest.cfg.vectors import CounterVector, add_vectors, sum_vectors
from counter_attest.hpc.counters import CounterConfig
from counter_attest.hpc.events import EventTable, resolve_block_deltas
from counter_attest.hpc.exceptions import CounterConfigError


@dataclass(frozen=True)
class SimConfig:
    table: EventTable | None
    config: CounterConfig
    seed: int = 0
    # Constant footprint added by every snapshot, in register order
    offset: CounterVector | None = None

    def __post_init__(self) -> None:
        if self.table is not None:
            self.config.check_deterministic(self.table.deterministic)
        if self.offset is not None and len(self.offset) != self.config.dimension:
            raise CounterConfigError(
                f"Offset has {len(self.offset)} entries, expected {self.config.dimension}"
            )


class Simulator:
    """Replays block traces into the counter snapshots a monitor would take."""

    def __init__(self, cfg: AnnotatedCfg, sim: SimConfig) -> None:
        if sim.config.counters != cfg.counters:
            raise CounterConfigError("Counter configuration is not over the CFG's counters")
        self.cfg = cfg
        self.sim = sim

    @cached_property
    def deltas(self) -> Mapping[str, CounterVector]:
        return resolve_block_deltas(self.cfg, self.sim.table)

    def segment_delta(self, steps: Sequence[str]) -> CounterVector:
        # The start block was measured by the previous snapshot
        total = sum_vectors((self.deltas[s] for s in steps[1:]), self.cfg.dimension)
        projected = self.sim.config.project(total)
        if self.sim.offset is not None:
            projected = add_vectors(projected, self.sim.offset)
        return projected

    def measure_segment(self, segment: BlockTrace) -> Measurement:
        return Measurement(
            segment.steps[0], segment.steps[-1], self.segment_delta(segment.steps)
        )

    def measure(self, trace: BlockTrace) -> list[Measurement]:
        return [self.measure_segment(s) for s in split_trace(self.cfg, trace)]


def measure(
    cfg: AnnotatedCfg,
    table: EventTable | None,
    config: CounterConfig,
    trace: BlockTrace,
    offset: CounterVector | None = None,
) -> list[Measurement]:
    return Simulator(cfg, SimConfig(table, config, offset=offset)).measure(trace)
