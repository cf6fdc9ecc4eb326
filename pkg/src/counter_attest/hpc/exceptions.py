from __future__ import annotations

from typing import Sequence

from counter_attest.exceptions import UserError


class HpcError(UserError): ...


class EventTableError(HpcError):
    def __init__(self, source: str, message: str) -> None:
        super().__init__(f"Invalid event table {source}: {message}")


class UnknownMnemonicError(HpcError):
    def __init__(self, mnemonic: str, block_id: str | None = None) -> None:
        where = f" in block {block_id}" if block_id else ""
        super().__init__(f"Unknown mnemonic {mnemonic}{where}")
        self.mnemonic = mnemonic


class CounterConfigError(HpcError): ...


class NondeterministicCounterError(CounterConfigError):
    def __init__(self, names: Sequence[str]) -> None:
        super().__init__(
            f"Counters {', '.join(names)} are not deterministic and can't be "
            f"used for verification"
        )
