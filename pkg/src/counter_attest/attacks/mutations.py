from __future__ import annotations

import itertools
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Union

from counter_attest.attacks.enums import MutationKind
from counter_attest.attacks.exceptions import NoApplicableMutationError
from counter_attest.cfg.model import AnnotatedCfg
from counter_attest.cfg.stacks import EMPTY_STACK, CallStack
from counter_attest.cfg.trace import BlockTrace, Measurement, validate_trace
from counter_attest.cfg.vectors import CounterVector, add_vectors
from counter_attest.hpc.counters import CounterConfig
from counter_attest.hpc.events import EventTable, resolve_block_deltas

# Above this many possible edits mutants are sampled instead of enumerated
ENUMERATION_LIMIT = 50_000
SAMPLING_ATTEMPTS_PER_MUTANT = 50
# Counter values may be perturbed by up to a tenth
PERTURBATION_DIVISOR = 10

Mutant = Union[BlockTrace, Measurement]
Edit = tuple[int, str | None]


@dataclass(frozen=True)
class MutationSpec:
    kind: MutationKind
    repetitions: int = field(default=0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.repetitions == 0:
            object.__setattr__(self, "repetitions", self.kind.default_repetitions)
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")

    def rng(self, segment_index: int) -> random.Random:
        return random.Random(f"{self.seed}:{self.kind.value}:{segment_index}")


class Mutator:
    def __init__(
        self, cfg: AnnotatedCfg, table: EventTable | None, config: CounterConfig
    ) -> None:
        self.cfg = cfg
        self.table = table
        self.config = config

    @cached_property
    def projected_deltas(self) -> dict[str, CounterVector]:
        return {
            block_id: self.config.project(v)
            for block_id, v in resolve_block_deltas(self.cfg, self.table).items()
        }

    @cached_property
    def ordinary_blocks(self) -> tuple[str, ...]:
        """Blocks that may appear inside a segment."""
        return tuple(sorted(b for b in self.cfg.blocks if not self.cfg.is_measurement_point(b)))

    @cached_property
    def unique_blocks(self) -> tuple[str, ...]:
        """Ordinary blocks whose projected delta no other block shares."""
        occurrences = Counter(self.projected_deltas.values())
        return tuple(b for b in self.ordinary_blocks if occurrences[self.projected_deltas[b]] == 1)

    def pool(self, kind: MutationKind) -> tuple[str, ...]:
        if kind in (MutationKind.REPLACE_UNIQUE, MutationKind.INSERT_UNIQUE):
            return self.unique_blocks
        return self.ordinary_blocks

    @staticmethod
    def apply(kind: MutationKind, steps: tuple[str, ...], edit: Edit) -> tuple[str, ...]:
        position, block = edit
        if kind == MutationKind.REMOVE_BLOCK:
            return steps[:position] + steps[position + 1 :]
        assert block is not None
        if kind == MutationKind.INSERT_UNIQUE:
            return steps[:position] + (block,) + steps[position:]
        return steps[:position] + (block,) + steps[position + 1 :]

    def edit_space(self, kind: MutationKind, steps: tuple[str, ...]) -> tuple[range, tuple[str, ...]]:
        # Endpoints are the measurement points and are never touched
        if kind == MutationKind.INSERT_UNIQUE:
            return range(1, len(steps)), self.pool(kind)
        return range(1, len(steps) - 1), self.pool(kind)

    def all_edits(self, kind: MutationKind, steps: tuple[str, ...]) -> Iterator[Edit]:
        positions, pool = self.edit_space(kind, steps)
        if kind == MutationKind.REMOVE_BLOCK:
            yield from ((p, None) for p in positions)
            return
        for position in positions:
            for block in pool:
                if kind == MutationKind.INSERT_UNIQUE or block != steps[position]:
                    yield position, block

    def random_edit(
        self, kind: MutationKind, steps: tuple[str, ...], rng: random.Random
    ) -> Edit:
        positions, pool = self.edit_space(kind, steps)
        position = rng.choice(positions)
        if kind == MutationKind.REMOVE_BLOCK:
            return position, None
        return position, rng.choice(pool)

    def is_invalid(self, steps: tuple[str, ...], entry_stack: CallStack) -> bool:
        return not validate_trace(
            self.cfg, BlockTrace(steps), check_calls=True, entry_stack=entry_stack
        )

    def block_mutants(
        self,
        segment: BlockTrace,
        spec: MutationSpec,
        rng: random.Random,
        entry_stack: CallStack,
    ) -> list[BlockTrace]:
        steps = segment.steps
        positions, pool = self.edit_space(spec.kind, steps)
        space = len(positions) * (1 if spec.kind == MutationKind.REMOVE_BLOCK else len(pool))
        found: dict[tuple[str, ...], None] = {}
        if space <= ENUMERATION_LIMIT:
            for edit in self.all_edits(spec.kind, steps):
                mutated = self.apply(spec.kind, steps, edit)
                if mutated != steps and self.is_invalid(mutated, entry_stack):
                    found[mutated] = None
            ordered = list(found)
            rng.shuffle(ordered)
            return [BlockTrace(s) for s in ordered[: spec.repetitions]]
        for _ in range(spec.repetitions * SAMPLING_ATTEMPTS_PER_MUTANT):
            if len(found) >= spec.repetitions:
                break
            mutated = self.apply(spec.kind, steps, self.random_edit(spec.kind, steps, rng))
            if mutated != steps and mutated not in found and self.is_invalid(mutated, entry_stack):
                found[mutated] = None
        return [BlockTrace(s) for s in found]

    def mutate(
        self,
        segment: BlockTrace,
        spec: MutationSpec,
        *,
        entry_stack: CallStack = EMPTY_STACK,
        measurement: Measurement | None = None,
        segment_index: int = 0,
    ) -> tuple[Mutant, ...]:
        rng = spec.rng(segment_index)
        mutants: list[Mutant]
        if spec.kind == MutationKind.RANDOM_CHANGE:
            if measurement is None:
                raise ValueError("random_change needs the measurement of the segment")
            mutants = list(perturb_measurement(measurement, spec.repetitions, rng))
        else:
            mutants = list(self.block_mutants(segment, spec, rng, entry_stack))
        if not mutants:
            raise NoApplicableMutationError(spec.kind, segment.steps[0], segment.steps[-1])
        return tuple(mutants)


def perturb_measurement(
    measurement: Measurement, repetitions: int, rng: random.Random
) -> list[Measurement]:
    """
    Distinct nonzero perturbations, each counter independently by a uniform
    integer within a tenth of its value.
    """
    bounds = [v // PERTURBATION_DIVISOR for v in measurement.delta]
    space = math.prod(2 * b + 1 for b in bounds) - 1
    perturbations: dict[tuple[int, ...], None] = {}
    if space <= repetitions:
        for p in itertools.product(*(range(-b, b + 1) for b in bounds)):
            if any(p):
                perturbations[p] = None
    else:
        while len(perturbations) < repetitions:
            p = tuple(rng.randint(-b, b) for b in bounds)
            if any(p):
                perturbations[p] = None
    return [
        Measurement(measurement.start_block, measurement.end_block, add_vectors(measurement.delta, p))
        for p in perturbations
    ]


def mutate(
    cfg: AnnotatedCfg,
    table: EventTable | None,
    config: CounterConfig,
    segment: BlockTrace,
    spec: MutationSpec,
    *,
    entry_stack: CallStack = EMPTY_STACK,
    measurement: Measurement | None = None,
    segment_index: int = 0,
) -> tuple[Mutant, ...]:
    return Mutator(cfg, table, config).mutate(
        segment,
        spec,
        entry_stack=entry_stack,
        measurement=measurement,
        segment_index=segment_index,
    )
