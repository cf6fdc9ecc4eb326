from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from counter_attest.protocol.enums import EffectKind, EventKind, Role
from counter_attest.protocol.exceptions import ExplorationBudgetError
from counter_attest.protocol.world import ProtocolEvent, World, check_transition, step

DEFAULT_STATE_BUDGET = 1_000_000

TRACEE = "tracee"
TRACER = "tracer"
ROGUE = "rogue"
HOST = "host"
TRACER_HASH = "tracer-code"
ROGUE_HASH = "rogue-code"


def honest_alphabet() -> tuple[ProtocolEvent, ...]:
    return (
        ProtocolEvent(EventKind.CREATE, TRACER, role=Role.TRACER, measurement=TRACER_HASH),
        ProtocolEvent(
            EventKind.CREATE,
            TRACEE,
            role=Role.TRACEE,
            measurement="tracee-code",
            expected=TRACER_HASH,
        ),
        ProtocolEvent(EventKind.ATTACH_AS_TRACER, TRACER, target=TRACEE),
        ProtocolEvent(EventKind.START, TRACEE),
        ProtocolEvent(EventKind.ECALL, TRACEE),
        ProtocolEvent(EventKind.VERIFY_RESULT, TRACER, accept=True),
        ProtocolEvent(EventKind.HOST_READ_SHM, HOST, target=TRACEE),
    )


def adversarial_alphabet() -> tuple[ProtocolEvent, ...]:
    """
    The honest events plus a rogue tracer with the wrong code, rejecting
    verdicts, and verification-state writes by parties other than the tracer.
    """
    return honest_alphabet() + (
        ProtocolEvent(EventKind.CREATE, ROGUE, role=Role.TRACER, measurement=ROGUE_HASH),
        ProtocolEvent(EventKind.ATTACH_AS_TRACER, ROGUE, target=TRACEE),
        ProtocolEvent(EventKind.VERIFY_RESULT, TRACER, accept=False),
        ProtocolEvent(EventKind.VERIFY_RESULT, ROGUE, accept=True),
        ProtocolEvent(EventKind.SET_CFA_VERIFICATION_STATE, ROGUE, target=TRACEE, accept=True),
        ProtocolEvent(EventKind.SET_CFA_VERIFICATION_STATE, TRACEE, target=TRACEE, accept=True),
        ProtocolEvent(EventKind.SET_CFA_VERIFICATION_STATE, HOST, target=TRACEE, accept=True),
        ProtocolEvent(EventKind.START, TRACER),
        ProtocolEvent(EventKind.ECALL, TRACER),
    )


@dataclass(frozen=True)
class Violation:
    events: tuple[ProtocolEvent, ...]
    message: str

    def to_json(self) -> dict[str, Any]:
        return {"events": [e.to_json() for e in self.events], "message": self.message}


@dataclass(frozen=True)
class ExplorationResult:
    states: frozenset[World]
    violations: tuple[Violation, ...]
    depth: int
    transitions: int
    granted_reads: int
    denied_reads: int

    def to_json(self) -> dict[str, Any]:
        return {
            "depth": self.depth,
            "states": len(self.states),
            "transitions": self.transitions,
            "granted_reads": self.granted_reads,
            "denied_reads": self.denied_reads,
            "violations": [v.to_json() for v in self.violations],
        }


def explore(
    world: World,
    alphabet: Sequence[ProtocolEvent],
    depth: int,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> ExplorationResult:
    """
    Breadth-first search over every interleaving of the alphabet up to the
    given depth, checking the safety properties on each transition.
    """
    parents: dict[World, tuple[World, ProtocolEvent] | None] = {world: None}

    def path_to(state: World) -> tuple[ProtocolEvent, ...]:
        events: list[ProtocolEvent] = []
        link = parents[state]
        while link is not None:
            state, event = link
            events.append(event)
            link = parents[state]
        return tuple(reversed(events))

    violations: list[Violation] = []
    transitions = granted = denied = 0
    frontier = [world]
    for level in range(depth):
        next_frontier = []
        for state in frontier:
            for event in alphabet:
                after, effects = step(state, event)
                transitions += 1
                granted += sum(1 for e in effects if e.kind == EffectKind.READ_GRANTED)
                denied += sum(1 for e in effects if e.kind == EffectKind.READ_DENIED)
                for message in check_transition(state, event, after, effects):
                    violations.append(Violation(path_to(state) + (event,), message))
                if after not in parents:
                    parents[after] = (state, event)
                    next_frontier.append(after)
                    if len(parents) > state_budget:
                        raise ExplorationBudgetError(state_budget, level + 1)
        frontier = next_frontier
    return ExplorationResult(
        frozenset(parents), tuple(violations), depth, transitions, granted, denied
    )
