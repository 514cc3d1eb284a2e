"""Exception hierarchy shared across the package."""


class ShiftPronyError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(ShiftPronyError):
    """A frequency, shift or atom was used with the wrong dimension."""


class EmptyDecouplingSetError(ShiftPronyError):
    """No usable sample points exist for the requested target atom."""


class NoBracketError(ShiftPronyError):
    """Numeric zero refinement found no sign change near the initial guess."""


class InsufficientPointsError(ShiftPronyError):
    """A selection strategy asked for more points than are available."""


class NoProgressionError(ShiftPronyError):
    """No arithmetic progression of the requested length exists in the set."""


class DivisionNearZeroError(ShiftPronyError):
    """A sample ratio would divide by a transform value below tolerance."""


class NotAProgressionError(ShiftPronyError):
    """System exponents do not form the claimed arithmetic progression."""


class RootFindingFailureError(ShiftPronyError):
    """Simultaneous root iteration failed after all randomized restarts."""


class UnderdeterminedSystemError(ShiftPronyError):
    """Fewer equations than the solver needs for the requested order."""


class NotANetError(ShiftPronyError):
    """A set failed the two-sided grid matching test.

    Carries the first violating point pair so callers can report it.
    """

    def __init__(self, message, grid_point=None, set_point=None):
        super().__init__(message)
        self.grid_point = grid_point
        self.set_point = set_point


class UnsupportedDimensionError(ShiftPronyError):
    """The operation is only implemented for dimensions 1 and 2."""


class ConfigError(ShiftPronyError):
    """An experiment configuration is malformed or inconsistent."""


class MeasurementMismatchError(ConfigError):
    """External measurement frequencies do not match the computed samples."""
