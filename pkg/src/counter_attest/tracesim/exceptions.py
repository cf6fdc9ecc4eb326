from __future__ import annotations

from counter_attest.exceptions import UserError


class TraceSimError(UserError): ...


class WalkError(TraceSimError):
    def __init__(self, message: str) -> None:
        super().__init__(f"Could not generate a walk: {message}")
