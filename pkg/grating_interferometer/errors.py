"""Exception hierarchy for the interferometer simulator.

The CLI maps each family onto a process exit code (see ``cli.ExitCode``).
"""

from typing import Optional


class InterferometerError(Exception):
    """Base class for all simulator errors."""


class DomainError(InterferometerError, ValueError):
    """A physical quantity is outside its domain (non-positive energy, length...)."""


class GeometryError(InterferometerError):
    """The beamline is degenerate: coincident or unordered planes."""


class ConfigError(InterferometerError):
    """Run configuration failed to parse or validate.

    Attributes:
        key: Dotted path of the offending key, when known.
        line: 1-based line number in the config file, when known.
    """

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        location = ""
        if key is not None:
            location = f"{key} (line {line}): " if line is not None else f"{key}: "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class SamplingViolation(InterferometerError):
    """The grid does not resolve the quadratic phase of a propagation leg."""

    def __init__(self, leg: str, detail: str = ""):
        self.leg = leg
        message = f"sampling not certified for leg '{leg}'"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class DetectorWindowError(InterferometerError, ValueError):
    """A detector slit lies outside the computed detector-plane window."""


class FitError(InterferometerError, ValueError):
    """A fringe scan does not satisfy the fitting preconditions."""


class NumericError(InterferometerError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable numbers."""
