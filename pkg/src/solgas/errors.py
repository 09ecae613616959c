"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SolgasError(Exception):
    """Base class for all package errors."""


class InvariantViolation(SolgasError, ValueError):
    """A value type was constructed with data breaking its invariants."""


class SingularSystem(SolgasError, ArithmeticError):
    """The residue-condition linear system is numerically singular."""

    def __init__(self, message: str, condition: float = float("inf"), x=None, t=None):
        super().__init__(message)
        self.condition = condition
        self.x = x
        self.t = t


class PoleTooClose(SolgasError, ValueError):
    pass


class ZeroConstant(SolgasError, ValueError):
    pass


class GridTooSmall(SolgasError, ValueError):
    pass


class NonUniformGrid(SolgasError, ValueError):
    pass


class RootsNotDistinct(SolgasError, ValueError):
    pass


class RootsOutsideUpperHalfPlane(SolgasError, ValueError):
    pass


class DensityMismatch(SolgasError, ValueError):
    """Density does not have the form required by a closed-form prediction."""


class OutOfSegment(SolgasError, ValueError):
    pass


class PointOutsideReferenceDisk(SolgasError, ValueError):
    pass


class CollapsedPoints(SolgasError, ArithmeticError):
    pass


class MaxIterationsExceeded(SolgasError, RuntimeError):
    """Raised by strict callers; carries the best-so-far result."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class PeakNotFound(SolgasError, RuntimeError):
    pass


class TooFewOscillations(SolgasError, ValueError):
    pass


class TooFewSamples(SolgasError, ValueError):
    pass


class Degenerate(SolgasError, ValueError):
    pass


class NonPositiveInput(SolgasError, ValueError):
    pass


class ConfigError(SolgasError, ValueError):
    pass
