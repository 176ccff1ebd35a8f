"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError/RuntimeError so
callers can distinguish contract violations (bad inputs) from numerical
failures (a computation that could not finish).
"""


class DvduError(Exception):
    """Base error for this package."""


class DomainError(DvduError, ValueError):
    """A spatial argument lies outside the pair's domain."""


class RangeError(DvduError, ValueError):
    """An argument lies outside the range of a monotone map (inverse queries)."""


class ConstructionError(DvduError, ValueError):
    """Inputs cannot form a valid object (monotonicity, bounds, gluing data)."""


class PreconditionError(DvduError, ValueError):
    """A documented operation precondition is violated."""


class HorizonError(DvduError, RuntimeError):
    """A root/threshold was not reached within the configured horizon."""


class PathTooShortError(DvduError, RuntimeError):
    """The driving noise path ends before the clock reaches its target."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class ConfigError(DvduError, ValueError):
    """A structured configuration file is malformed or inconsistent."""
