from __future__ import annotations

from counter_attest.exceptions import UserError


class DemoError(UserError): ...


class UnknownDemoError(DemoError):
    def __init__(self, name: str, known: list[str]) -> None:
        super().__init__(f"No such demo: {name}. Known demos: {', '.join(known)}")


class DemoParameterError(DemoError):
    def __init__(self, name: str, message: str) -> None:
        super().__init__(f"Invalid parameters for demo {name}: {message}")
