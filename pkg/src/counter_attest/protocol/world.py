from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

from counter_attest.protocol.enums import EffectKind, EventKind, Role, TracerDesign, VerifState


@dataclass(frozen=True)
class EnclaveRecord:
    id: str
    role: Role
    # Digest of the enclave's own code as computed by the security monitor
    measurement_hash: str
    counterpart: str | None = None
    # None stands for the zeroed field that every non-tracee must carry
    expected_tracer_hash: str | None = None
    verif_state: VerifState | None = None
    shm_locked: bool = False
    runnable: bool = False
    running: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "role": self.role.value,
            "measurement_hash": self.measurement_hash,
            "counterpart": self.counterpart,
            "expected_tracer_hash": self.expected_tracer_hash,
            "verif_state": self.verif_state.value if self.verif_state else None,
            "shm_locked": self.shm_locked,
            "runnable": self.runnable,
            "running": self.running,
        }


@dataclass(frozen=True)
class ProtocolEvent:
    kind: EventKind
    actor: str
    target: str | None = None
    role: Role | None = None
    measurement: str | None = None
    expected: str | None = None
    accept: bool | None = None

    def to_json(self) -> dict[str, Any]:
        result: dict[str, Any] = {"kind": self.kind.value, "actor": self.actor}
        if self.target is not None:
            result["target"] = self.target
        if self.role is not None:
            result["role"] = self.role.value
        if self.measurement is not None:
            result["measurement"] = self.measurement
        if self.expected is not None:
            result["expected"] = self.expected
        if self.accept is not None:
            result["accept"] = self.accept
        return result

    def __str__(self) -> str:
        parts = [f"{self.kind.value}({self.actor}"]
        if self.target is not None:
            parts.append(f"->{self.target}")
        if self.accept is not None:
            parts.append(", accept" if self.accept else ", reject")
        return "".join(parts) + ")"


@dataclass(frozen=True)
class Effect:
    kind: EffectKind
    actor: str
    target: str | None = None
    detail: str = ""
    context_switches: int = 0

    def to_json(self) -> dict[str, Any]:
        result: dict[str, Any] = {"kind": self.kind.value, "actor": self.actor}
        if self.target is not None:
            result["target"] = self.target
        if self.detail:
            result["detail"] = self.detail
        if self.context_switches:
            result["context_switches"] = self.context_switches
        return result


@dataclass(frozen=True)
class World:
    """Enclave records as kept by the security monitor, ordered by id."""

    enclaves: tuple[EnclaveRecord, ...] = ()
    design: TracerDesign = TracerDesign.HOST_MEDIATED

    def get(self, enclave_id: str | None) -> EnclaveRecord | None:
        return next((e for e in self.enclaves if e.id == enclave_id), None)

    def put(self, *records: EnclaveRecord) -> World:
        updated = {e.id: e for e in self.enclaves}
        for record in records:
            updated[record.id] = record
        return replace(self, enclaves=tuple(updated[k] for k in sorted(updated)))

    def to_json(self) -> dict[str, Any]:
        return {"design": self.design.value, "enclaves": [e.to_json() for e in self.enclaves]}


Transition = tuple[World, tuple[Effect, ...]]


def _reject(world: World, event: ProtocolEvent, detail: str) -> Transition:
    return world, (Effect(EffectKind.REJECTED, event.actor, event.target, detail),)


def attach_as_tracer(
    world: World, tracer_id: str, tracee_id: str, digest: str
) -> tuple[World, Effect]:
    """The tracer is linked only if its digest is the one the tracee expects."""

    def reject(detail: str) -> tuple[World, Effect]:
        return world, Effect(EffectKind.REJECTED, tracer_id, tracee_id, detail)

    tracer, tracee = world.get(tracer_id), world.get(tracee_id)
    if tracer is None or tracee is None:
        return reject("no such enclave")
    if tracer.role != Role.TRACER:
        return reject("caller is not a tracer")
    if tracee.role != Role.TRACEE:
        return reject("target is not a tracee")
    if tracee.counterpart is not None:
        return reject("tracee already has a tracer")
    if tracer.counterpart is not None:
        return reject("tracer already traces an enclave")
    if digest != tracee.expected_tracer_hash:
        return reject("tracer hash mismatch")
    world = world.put(
        replace(tracer, counterpart=tracee.id),
        replace(tracee, counterpart=tracer.id, runnable=True),
    )
    return world, Effect(EffectKind.ATTACHED, tracer_id, tracee_id)


def _create(world: World, event: ProtocolEvent) -> Transition:
    if world.get(event.actor) is not None:
        return _reject(world, event, "enclave already exists")
    if event.role is None or event.measurement is None:
        return _reject(world, event, "create needs a role and a measurement")
    if event.role == Role.TRACEE:
        if event.expected is None:
            return _reject(world, event, "tracee needs an expected tracer hash")
        record = EnclaveRecord(
            event.actor,
            event.role,
            event.measurement,
            expected_tracer_hash=event.expected,
            verif_state=VerifState.GATHERING,
            shm_locked=True,
        )
    else:
        if event.expected is not None:
            return _reject(world, event, "expected tracer hash must be zero")
        record = EnclaveRecord(event.actor, event.role, event.measurement, runnable=True)
    return world.put(record), (Effect(EffectKind.CREATED, event.actor),)


def _start(world: World, event: ProtocolEvent) -> Transition:
    record = world.get(event.actor)
    if record is None:
        return _reject(world, event, "no such enclave")
    if record.running:
        return _reject(world, event, "already running")
    if not record.runnable:
        return _reject(world, event, "not runnable")
    if record.role == Role.TRACEE:
        # The shared region is blocked again as soon as the tracee executes
        record = replace(
            record, running=True, shm_locked=True, verif_state=VerifState.GATHERING
        )
    else:
        record = replace(record, running=True)
    return world.put(record), (Effect(EffectKind.STARTED, event.actor),)


def _ecall(world: World, event: ProtocolEvent) -> Transition:
    record = world.get(event.actor)
    if record is None or not record.running:
        return _reject(world, event, "not running")
    if record.role != Role.TRACEE:
        return world.put(replace(record, running=False)), (Effect(EffectKind.ECALL, event.actor),)
    record = replace(
        record, running=False, runnable=False, verif_state=VerifState.PENDING
    )
    effect = Effect(
        EffectKind.ECALL,
        event.actor,
        record.counterpart,
        context_switches=world.design.context_switches_per_ecall,
    )
    return world.put(record), (effect,)


def _set_verification_state(
    world: World, event: ProtocolEvent, tracee_id: str | None
) -> Transition:
    tracee = world.get(tracee_id)
    if tracee is None or tracee.role != Role.TRACEE:
        return _reject(world, event, "target is not a tracee")
    if tracee.counterpart != event.actor:
        return _reject(world, event, "only the attached tracer may set the verification state")
    if tracee.verif_state != VerifState.PENDING:
        return _reject(world, event, "no verification pending")
    if event.accept:
        record = replace(
            tracee, verif_state=VerifState.VERIFIED, shm_locked=False, runnable=True
        )
        kind = EffectKind.VERIFIED
    else:
        record = replace(
            tracee,
            verif_state=VerifState.HALTED,
            shm_locked=True,
            runnable=False,
            running=False,
        )
        kind = EffectKind.HALTED
    return world.put(record), (Effect(kind, event.actor, tracee.id),)


def _verify_result(world: World, event: ProtocolEvent) -> Transition:
    tracer = world.get(event.actor)
    if tracer is None or tracer.role != Role.TRACER or tracer.counterpart is None:
        return _reject(world, event, "caller is not an attached tracer")
    return _set_verification_state(world, event, tracer.counterpart)


def _host_read(world: World, event: ProtocolEvent) -> Transition:
    tracee = world.get(event.target)
    if tracee is None or tracee.role != Role.TRACEE:
        return _reject(world, event, "no shared region")
    if tracee.shm_locked:
        return world, (Effect(EffectKind.READ_DENIED, event.actor, tracee.id),)
    return world, (Effect(EffectKind.READ_GRANTED, event.actor, tracee.id),)


def step(world: World, event: ProtocolEvent) -> Transition:
    """Applies one scheduled event. Illegal events leave the world unchanged."""
    match event.kind:
        case EventKind.CREATE:
            return _create(world, event)
        case EventKind.ATTACH_AS_TRACER:
            tracer = world.get(event.actor)
            if tracer is None or event.target is None:
                return _reject(world, event, "no such enclave")
            world, effect = attach_as_tracer(
                world, event.actor, event.target, tracer.measurement_hash
            )
            return world, (effect,)
        case EventKind.START:
            return _start(world, event)
        case EventKind.ECALL:
            return _ecall(world, event)
        case EventKind.VERIFY_RESULT:
            return _verify_result(world, event)
        case EventKind.SET_CFA_VERIFICATION_STATE:
            return _set_verification_state(world, event, event.target)
        case EventKind.HOST_READ_SHM:
            return _host_read(world, event)
    raise AssertionError(f"Unhandled event kind {event.kind}")


def check_transition(
    before: World, event: ProtocolEvent, after: World, effects: tuple[Effect, ...]
) -> list[str]:
    """Safety properties of a single transition; returns the violated ones."""
    violations = []
    for effect in effects:
        if effect.kind == EffectKind.READ_GRANTED:
            tracee = before.get(effect.target)
            if tracee is None or tracee.verif_state != VerifState.VERIFIED:
                state = tracee.verif_state.value if tracee and tracee.verif_state else "none"
                violations.append(f"host read shared memory of {effect.target} in state {state}")
    for record in after.enclaves:
        old = before.get(record.id)
        if record.role != Role.TRACEE:
            if record.expected_tracer_hash is not None:
                violations.append(f"{record.id} is not a tracee but expects a tracer")
            continue
        if record.verif_state != VerifState.VERIFIED and not record.shm_locked:
            state = record.verif_state.value if record.verif_state else "none"
            violations.append(f"{record.id} shared memory unlocked while {state}")
        if record.counterpart is None and (record.runnable or record.running):
            violations.append(f"{record.id} may run without a tracer")
        if old is None:
            continue
        if old.verif_state == VerifState.HALTED and (
            record.verif_state != VerifState.HALTED
            or record.runnable
            or not record.shm_locked
        ):
            violations.append(f"{record.id} left the halted state")
        if (
            old.verif_state == VerifState.PENDING
            and record.verif_state != VerifState.PENDING
            and event.actor != old.counterpart
        ):
            violations.append(f"{event.actor} changed the verification state of {record.id}")
    return violations
