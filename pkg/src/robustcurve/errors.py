"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class RobustCurveError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InputError(RobustCurveError, ValueError):
    """Caller supplied an argument outside its documented domain."""

    exit_code = 2


class CapExceeded(RobustCurveError):
    """A grid size or draw budget exceeds the configured cap.

    ``value`` carries the computed quantity so callers can still report it.
    """

    exit_code = 3

    def __init__(self, message, value=None, cap=None):
        super().__init__(message)
        self.value = value
        self.cap = cap


class NumericalError(RobustCurveError, ArithmeticError):
    """An iterative routine failed to meet its tolerance, or a draw was not finite."""

    exit_code = 4


class PredicateError(RobustCurveError):
    """A violation predicate could not decide a point."""

    exit_code = 2

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point
