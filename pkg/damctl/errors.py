"""
Exception hierarchy for damctl.

Every error carries the context needed to print a one-line diagnostic, and an
``exit_code`` the CLI maps it to (2 = configuration / IO, 3 = numerical).
"""


class DamctlError(Exception):
    """Base class for all damctl errors."""

    exit_code = 3


class ConfigError(DamctlError):
    """Raised when run configuration or model parameters are invalid."""

    exit_code = 2

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        location = ""
        if line is not None:
            location += f"line {line}: "
        if field is not None:
            location += f"{field}: "
        super().__init__(f"{location}{message}")


class IoError(DamctlError):
    """Raised when an input or output file cannot be read or written."""

    exit_code = 2

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")


class DomainError(DamctlError, ValueError):
    """Raised when an argument lies outside the domain of a function."""

    def __init__(self, message: str, argument: float | None = None, boundary: float | None = None):
        self.argument = argument
        self.boundary = boundary
        super().__init__(message)


class RegimeError(DamctlError):
    """Raised when the traffic intensity is on the wrong side of 1 for the operation."""

    def __init__(self, message: str, rho: float):
        self.rho = rho
        super().__init__(f"{message} (rho={rho:.10g})")


class ConvergenceError(DamctlError):
    """Raised when an iterative procedure fails to reach its tolerance."""

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        self.bracket = bracket
        suffix = f" on [{bracket[0]:.10g}, {bracket[1]:.10g}]" if bracket else ""
        super().__init__(f"{message}{suffix}")


class ExistenceError(DamctlError):
    """Raised when a root that is not guaranteed to exist is absent from its bracket."""

    def __init__(self, message: str, bracket: tuple[float, float]):
        self.bracket = bracket
        super().__init__(f"{message} on [{bracket[0]:.10g}, {bracket[1]:.10g}]")


class AmbiguityError(DamctlError):
    """Raised when both regime functionals report interior minima of the same value."""

    def __init__(self, upper_value: float, lower_value: float):
        self.upper_value = upper_value
        self.lower_value = lower_value
        super().__init__(
            f"both regimes have interior minima: upper={upper_value:.10g}, lower={lower_value:.10g}"
        )


class BracketError(DamctlError):
    """Raised when a bisection range shows no sign change."""

    def __init__(self, message: str, low: float, high: float):
        self.low = low
        self.high = high
        super().__init__(f"{message} on [{low:.10g}, {high:.10g}]")
