"""Exception hierarchy shared across the package."""
from __future__ import annotations


class AutopathError(Exception):
    """Base class for all package errors."""


class DegenerateEndpoints(AutopathError):
    pass


class SchemaError(AutopathError):
    """Input document does not match its declared schema."""


class ValidationError(AutopathError):
    """Input parsed but violates a semantic invariant."""

    def __init__(self, message: str, entity: object = None):
        super().__init__(message)
        self.entity = entity


class DestinationOffMap(AutopathError):
    pass


class UnknownLane(AutopathError):
    pass


class StartUnconnectable(AutopathError):
    pass


class NoInvalidNodes(AutopathError):
    pass


class NoPathFound(AutopathError):
    """Planner finished without a solution.

    Carries the diagnostics of the failed search so callers can report them.
    """

    def __init__(self, message: str = "no path found", *, passes: int = 0,
                 samples: int = 0, best_f: float = float("inf")):
        super().__init__(message)
        self.passes = passes
        self.samples = samples
        self.best_f = best_f


class MissingBoundaryContext(AutopathError):
    pass


class DegenerateCorridor(AutopathError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class HorizonTooShort(AutopathError):
    pass


class MaxIterations(AutopathError):
    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class NumericalFailure(AutopathError):
    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class SolverError(AutopathError):
    """QP failure inside an SCP iteration; ``iteration`` is 1-based."""

    def __init__(self, message: str, iteration: int, cause: Exception | None = None):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
        self.cause = cause
