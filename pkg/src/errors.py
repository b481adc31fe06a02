"""
Exception hierarchy for the split-problem stability toolkit.

Errors that can be raised while pydantic validates a problem description
also derive from ValueError, so they surface as field-qualified
ValidationErrors instead of escaping the schema layer.
"""


class SplitStabilityError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatchError(SplitStabilityError, ValueError):
    """Vector or matrix shapes do not agree."""


class PointNotInSetError(SplitStabilityError, ValueError):
    """A normal cone was requested at a point outside the set."""


class QualificationError(SplitStabilityError):
    """Gradient vanishes at an active bound; normal regularity cannot be certified."""


class UnsupportedProjectionError(SplitStabilityError):
    """The set has no projection rule for the requested point."""


class EmptySetError(SplitStabilityError, ValueError):
    """A constraint set failed its nonemptiness probe."""


class LPNumericalError(SplitStabilityError):
    """The simplex engine could not reach a trustworthy answer."""


class InfeasibleReferencePointError(SplitStabilityError):
    """The reference point does not solve the problem instance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ProblemSchemaError(SplitStabilityError):
    """A problem file does not follow the documented schema."""
