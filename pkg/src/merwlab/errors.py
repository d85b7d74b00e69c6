"""Exception hierarchy shared by every merwlab module."""

from __future__ import annotations


class MerwError(Exception):
    """Base class for all merwlab errors."""


class DomainError(MerwError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class StructuralError(MerwError, ValueError):
    """A graph or kernel lacks a structural property (irreducibility, out-weight)."""


class ConvergenceError(MerwError, RuntimeError):
    """An iterative method stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int | None = None):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


class ResidualTooLarge(MerwError, ValueError):
    """An eigenpair was rejected because its residual exceeds the tolerance."""

    def __init__(self, residual: float, tol: float):
        super().__init__(f"eigenpair residual {residual:.3e} exceeds tolerance {tol:.3e}")
        self.residual = residual
        self.tol = tol


class MissingInvariantMeasure(MerwError, ValueError):
    """Raised when a quantity needs the invariant measure of a kernel that has none."""


class BudgetExceeded(MerwError, RuntimeError):
    def __init__(self, required: int, budget: int):
        super().__init__(
            f"simulation needs {required} steps but the budget is {budget}; "
            "raise it with budget=... or MERWLAB_STEP_BUDGET"
        )
        self.required = required
        self.budget = budget


class CorruptedEnsemble(MerwError, ValueError):
    """A recorded path contains a transition the kernel gives zero probability."""


class AcceptanceStarvation(MerwError, RuntimeError):
    def __init__(self, accepted: int, attempts: int, target: int):
        super().__init__(
            f"only {accepted} of {target} paths accepted after {attempts} attempts; "
            "increase max_attempts or shorten the horizon"
        )
        self.accepted = accepted
        self.attempts = attempts
        self.target = target


class DataError(MerwError, ValueError):
    """Input samples are malformed (NaN, unsorted, too few)."""


class ExclusionViolation(MerwError, AssertionError):
    """Two particles occupied the same site."""
