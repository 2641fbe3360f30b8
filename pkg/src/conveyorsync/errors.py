"""Exception hierarchy.

Configuration problems and numerical problems are kept apart because the
command-line runner maps them to different exit codes.
"""


class ConveyorSyncError(Exception):
    """Base class for all package errors."""


class ConfigError(ConveyorSyncError, ValueError):
    """A scenario configuration is missing a field or has an invalid value."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalError(ConveyorSyncError, ArithmeticError):
    """A computation could not produce a trustworthy number."""


class GridResolutionError(NumericalError):
    """The frequency grid does not resolve the spectrum (normalization drift)."""


class ConvergenceError(NumericalError):
    """An iterative procedure stopped before meeting its tolerance."""

    def __init__(self, message, last_value=None):
        self.last_value = last_value
        super().__init__(message)


class NullSearchError(NumericalError):
    """The null of a scan cannot be located on the given trial grid."""


class GridTooCoarseError(NullSearchError):
    """Trial-shift step aliases the fringes."""

    def __init__(self, step, required):
        self.step = step
        self.required = required
        super().__init__(
            f"trial-shift step {step:.6g} s aliases the fringes; "
            f"use a step of at most {required:.6g} s"
        )
