"""Exception hierarchy shared by every module."""


class RlsdError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RlsdError, ValueError):
    """Malformed arguments: bad shapes, non-finite data, invalid parameters."""


class UnsupportedCombinationError(InvalidInputError):
    """A regularizer/constraint pairing without an exact proximal map."""


class InfeasiblePointError(RlsdError, ValueError):
    """A point lies outside its block's constraint set."""


class NumericalError(RlsdError, ArithmeticError):
    """A numerical kernel (SVD, linear solve, inner loop) failed."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class MissingReferenceError(RlsdError):
    """A certificate needs a reference solution that was not supplied."""


class NotApplicableError(RlsdError):
    """A check was requested on a trace it does not apply to."""
