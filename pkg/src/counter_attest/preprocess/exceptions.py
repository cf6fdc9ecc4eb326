from __future__ import annotations

from counter_attest.exceptions import UserError


class PreprocessError(UserError): ...


class ExpansionBudgetError(PreprocessError):
    def __init__(self, budget: int, reached: int) -> None:
        super().__init__(
            f"Call-string expansion reached {reached} nodes, "
            f"exceeding the budget of {budget}"
        )
        self.budget = budget
        self.reached = reached


class PathBudgetError(PreprocessError):
    def __init__(self, start: str, end: str, budget: int) -> None:
        super().__init__(
            f"Segment {start}->{end} has more than {budget} simple paths. "
            f"Add measurement points inside the segment to split it, "
            f"or raise --budget-paths"
        )
        self.start = start
        self.end = end
        self.budget = budget


class CycleBudgetError(PreprocessError):
    def __init__(self, start: str, budget: int) -> None:
        super().__init__(
            f"Loops reachable from measurement point {start} have more than "
            f"{budget} simple cycles. Add measurement points inside the loops, "
            f"or raise --budget-cycles"
        )
        self.start = start
        self.budget = budget
