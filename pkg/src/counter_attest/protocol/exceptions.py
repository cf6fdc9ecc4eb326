from __future__ import annotations

from counter_attest.exceptions import UserError


class ProtocolError(UserError): ...


class ExplorationBudgetError(ProtocolError):
    def __init__(self, budget: int, depth: int) -> None:
        super().__init__(
            f"Protocol exploration visited more than {budget} states "
            f"before reaching depth {depth}"
        )
        self.budget = budget


class InvalidScenarioError(ProtocolError):
    def __init__(self, source: str, message: str) -> None:
        super().__init__(f"Invalid scenario {source}: {message}")
