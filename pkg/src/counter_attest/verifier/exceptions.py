from __future__ import annotations

from counter_attest.exceptions import UserError


class VerifierError(UserError): ...


class DatabaseFormatError(VerifierError):
    def __init__(self, source: str, message: str) -> None:
        super().__init__(f"Invalid segment database {source}: {message}")


class DigestMismatchError(VerifierError):
    def __init__(self, what: str, expected: str, actual: str) -> None:
        super().__init__(
            f"{what} belongs to CFG {actual}, expected CFG {expected}"
        )
        self.expected = expected
        self.actual = actual


class SolverBudgetError(VerifierError):
    def __init__(self, budget: int) -> None:
        super().__init__(
            f"Cone membership search exceeded {budget} branch-and-bound nodes"
        )
        self.budget = budget
