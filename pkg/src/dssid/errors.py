"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` for bad inputs and
violated preconditions, :class:`NumericalError` for failures that happen while
computing (divergence, instability, non-convergence).  The CLI maps them to
exit codes 1 and 2.
"""

from __future__ import annotations


class IdentError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(IdentError, ValueError):
    """Input or configuration violates a documented precondition."""


class DegenerateOrderError(ValidationError):
    pass


class OutOfRangeError(ValidationError):
    pass


class GridMismatchError(ValidationError):
    pass


class WindowError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class ConfigurationError(ValidationError):
    pass


class NumericalError(IdentError, ArithmeticError):
    """A computation failed or produced an unusable result."""


class DivergenceError(NumericalError):
    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class InstabilityError(NumericalError):
    def __init__(self, message: str, raw=None):
        super().__init__(message)
        self.raw = raw


class ResonanceError(NumericalError):
    pass


class DegenerateInputError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class StagnationError(NumericalError):
    """A DSS step increased the residual beyond the acceptance margin."""

    def __init__(self, message: str, previous=None, rejected=None):
        super().__init__(message)
        self.previous = previous
        self.rejected = rejected


class ObjectiveError(NumericalError):
    """Objective returned a non-finite value during a search."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point
