"""Exception hierarchy shared by every module.

The CLI maps each class onto an exit code, so raise the most specific one.
"""


class DesignError(Exception):
    """Base class for all package errors."""


class ValidationError(DesignError, ValueError):
    """Invalid input: bad shape, unbalanced assignment, malformed file."""


class NotPSDError(ValidationError):
    """A matrix that must be positive semidefinite is not."""


class EnumerationGuardError(ValidationError):
    """Exhaustive enumeration was requested above the supported size."""


class InfeasibleError(DesignError):
    """An optimization problem or acceptance region has no feasible point."""


class ConvergenceError(DesignError, ArithmeticError):
    """An iterative numerical routine did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
