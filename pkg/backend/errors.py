"""
Exception hierarchy for the dual-channel toolkit.

Checkers that produce reports (CPTP validation, certificate verification)
never raise on failure; these exceptions are for invalid inputs.
"""


class DualChanError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(DualChanError, ValueError):
    """Operator shapes or subsystem dimensions do not match."""


class ValidationError(DualChanError, ValueError):
    """An invariant of a channel, state or observable is violated."""

    def __init__(self, constraint: str, magnitude: float, detail: str = ""):
        self.constraint = constraint
        self.magnitude = float(magnitude)
        message = f"{constraint} violated by {self.magnitude:.3g}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class EstimationError(DualChanError, RuntimeError):
    """An estimator was asked to run on degenerate input."""
