from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from counter_attest.protocol.enums import EffectKind, EventKind, Role, TracerDesign
from counter_attest.protocol.exceptions import InvalidScenarioError
from counter_attest.protocol.explorer import HOST, TRACEE, TRACER, TRACER_HASH
from counter_attest.protocol.world import Effect, ProtocolEvent, World, step
from counter_attest.utils.documents import DocumentReader, read_json_file


@dataclass(frozen=True)
class ProtocolRun:
    events: tuple[ProtocolEvent, ...]
    effects: tuple[tuple[Effect, ...], ...]
    world: World

    @property
    def context_switches(self) -> int:
        return sum(e.context_switches for effects in self.effects for e in effects)

    def count(self, kind: EffectKind) -> int:
        return sum(1 for effects in self.effects for e in effects if e.kind == kind)

    def to_json(self) -> dict[str, Any]:
        return {
            "steps": [
                {"event": event.to_json(), "effects": [e.to_json() for e in effects]}
                for event, effects in zip(self.events, self.effects)
            ],
            "world": self.world.to_json(),
            "context_switches": self.context_switches,
            "granted_reads": self.count(EffectKind.READ_GRANTED),
            "denied_reads": self.count(EffectKind.READ_DENIED),
        }


def run_scenario(events: Iterable[ProtocolEvent], world: World = World()) -> ProtocolRun:
    applied, effects = [], []
    for event in events:
        world, produced = step(world, event)
        applied.append(event)
        effects.append(produced)
    return ProtocolRun(tuple(applied), tuple(effects), world)


def attested_session_events(verdicts: Sequence[bool]) -> list[ProtocolEvent]:
    """
    One tracee run where every ecall is followed by the tracer's verdict and
    an attempt of the host to read the shared region.
    """
    events = [
        ProtocolEvent(EventKind.CREATE, TRACER, role=Role.TRACER, measurement=TRACER_HASH),
        ProtocolEvent(
            EventKind.CREATE,
            TRACEE,
            role=Role.TRACEE,
            measurement="tracee-code",
            expected=TRACER_HASH,
        ),
        ProtocolEvent(EventKind.ATTACH_AS_TRACER, TRACER, target=TRACEE),
    ]
    for accepted in verdicts:
        events += [
            ProtocolEvent(EventKind.START, TRACEE),
            ProtocolEvent(EventKind.ECALL, TRACEE),
            ProtocolEvent(EventKind.VERIFY_RESULT, TRACER, accept=accepted),
            ProtocolEvent(EventKind.HOST_READ_SHM, HOST, target=TRACEE),
        ]
        if not accepted:
            # A halted tracee must stay halted
            events.append(ProtocolEvent(EventKind.START, TRACEE))
            break
    return events


def run_attested_session(
    verdicts: Sequence[bool], design: TracerDesign = TracerDesign.HOST_MEDIATED
) -> ProtocolRun:
    return run_scenario(attested_session_events(verdicts), World(design=design))


def load_scenario(document: Any, source: str = "<scenario>") -> list[ProtocolEvent]:
    if not isinstance(document, list):
        raise InvalidScenarioError(source, "Expected an array of events")
    events = []
    for i, item in enumerate(document):
        reader = DocumentReader(
            item, source=source, error=InvalidScenarioError, where=f"$[{i}]"
        )
        reader.expect_keys(
            ("kind", "actor"), ("target", "role", "measurement", "expected", "accept")
        )
        try:
            kind = EventKind(reader.get_string("kind"))
            role = Role(reader.get_string("role")) if reader.has("role") else None
        except ValueError as ex:
            reader.fail(str(ex))
        events.append(
            ProtocolEvent(
                kind,
                reader.get_string("actor"),
                target=reader.get_optional_string("target"),
                role=role,
                measurement=reader.get_optional_string("measurement"),
                expected=reader.get_optional_string("expected"),
                accept=reader.get_bool("accept") if reader.has("accept") else None,
            )
        )
    return events


def load_scenario_file(path: Path) -> list[ProtocolEvent]:
    return load_scenario(read_json_file(path, InvalidScenarioError), str(path))
