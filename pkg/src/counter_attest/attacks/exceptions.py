from __future__ import annotations

from counter_attest.attacks.enums import MutationKind
from counter_attest.exceptions import UserError


class AttackError(UserError): ...


class NoApplicableMutationError(AttackError):
    def __init__(self, kind: MutationKind, start: str, end: str) -> None:
        super().__init__(
            f"No {kind.value} mutation of segment {start}->{end} leaves the "
            f"control flow invalid"
        )
        self.kind = kind


class BaselineRejectedError(AttackError):
    def __init__(self, index: int) -> None:
        super().__init__(
            f"The unmodified trace is rejected at segment {index}; the database "
            f"does not match the program or the counter configuration"
        )
        self.index = index
