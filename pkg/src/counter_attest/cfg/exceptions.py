from __future__ import annotations

from typing import Sequence

from counter_attest.exceptions import UserError


class CfgError(UserError): ...


class InvalidDocumentError(CfgError):
    def __init__(self, source: str, message: str) -> None:
        super().__init__(f"Invalid document {source}: {message}")


class RecursionDetectedError(CfgError):
    def __init__(self, cycle: Sequence[str]) -> None:
        super().__init__(f"recursion detected: {','.join(cycle)}")
        self.cycle = tuple(cycle)


class UnknownBlockError(CfgError):
    def __init__(self, block_id: str) -> None:
        super().__init__(f"Unknown block {block_id}")
        self.block_id = block_id


class EmptyTraceError(CfgError):
    def __init__(self) -> None:
        super().__init__("Trace has no steps")


class InvalidTraceError(CfgError):
    def __init__(self, source: str) -> None:
        super().__init__(
            f"Trace {source} is not a valid execution: it must run along CFG edges "
            f"with matched calls and returns, between two measurement points"
        )
