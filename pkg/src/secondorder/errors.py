"""Exception types raised across the package."""


class SecondOrderError(Exception):
    """Base class for all package errors."""


class ValidationError(SecondOrderError, ValueError):
    """An input failed validation. ``field`` names the offending parameter."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConfigParseError(SecondOrderError, ValueError):
    """Config text could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class NumericalError(SecondOrderError):
    """Base for failures of a numerical procedure (CLI exit code 2)."""


class GridResolutionError(NumericalError):
    pass


class InsufficientDataError(NumericalError):
    pass


class ShapeMismatchError(SecondOrderError, ValueError):
    pass


class NoFringeError(NumericalError):
    pass


class FitConvergenceError(NumericalError):
    pass


class UnknownAxisError(SecondOrderError, ValueError):
    pass


class IncompatiblePeriodsError(NumericalError):
    pass
