"""Shared exception types.

Exit-code mapping used by the CLI: RegimeError and DomainError map to 2,
BudgetExceededError to 3, everything else is a plain failure.
"""


class SpinLabError(Exception):
    pass


class ModelError(SpinLabError):
    """Invalid interaction matrix (asymmetric, negative, reducible, ...)."""


class RegimeError(SpinLabError):
    """Requested quantity does not exist in this parameter regime."""


class DomainError(SpinLabError):
    """Arguments outside the mathematical domain of an operation."""


class BudgetExceededError(SpinLabError):
    """Exact enumeration would exceed the configured budget."""


class CollapseError(SpinLabError):
    """Tree recursion step collapsed onto hard constraints (zero mass)."""


class InfeasibleError(SpinLabError):
    """Marginals cannot be carried by the support of B."""


class ConvergenceError(SpinLabError):
    """An iterative solver failed to reach its residual target."""


class StructureError(SpinLabError):
    """A structural invariant check failed (non-fixpoint input etc.)."""
