from __future__ import annotations

from enum import Enum


class Role(Enum):
    TRACEE = "tracee"
    TRACER = "tracer"
    NONE = "none"


class VerifState(Enum):
    GATHERING = "gathering"
    PENDING = "pending"
    VERIFIED = "verified"
    HALTED = "halted"


class EventKind(Enum):
    CREATE = "create"
    ATTACH_AS_TRACER = "attach_as_tracer"
    START = "start"
    ECALL = "ecall"
    VERIFY_RESULT = "verify_result"
    HOST_READ_SHM = "host_read_shm"
    SET_CFA_VERIFICATION_STATE = "set_cfa_verification_state"


class EffectKind(Enum):
    CREATED = "created"
    ATTACHED = "attached"
    STARTED = "started"
    ECALL = "ecall"
    VERIFIED = "verified"
    HALTED = "halted"
    READ_GRANTED = "read_granted"
    READ_DENIED = "read_denied"
    REJECTED = "rejected"


class TracerDesign(Enum):
    """How the tracer learns about a tracee ecall."""

    # Host relays the ecall to the tracer and the verdict back
    HOST_MEDIATED = "host-mediated"
    # The security monitor schedules the tracer directly
    SM_TRIGGERED = "sm-triggered"

    @property
    def context_switches_per_ecall(self) -> int:
        return 8 if self == TracerDesign.HOST_MEDIATED else 4
