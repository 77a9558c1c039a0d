"""Error taxonomy of eddyperm.

Every error raised for a domain condition derives from `EddyPermError`. The command line
maps the class-level `exit_code` to the process exit status and prints `name` as the
machine-readable error class.
"""

from typing import Optional


class EddyPermError(Exception):
    """Base class for eddyperm errors."""

    exit_code: int = 1
    """Process exit status used by the command line."""

    @property
    def name(self) -> str:
        """Machine-readable error class."""
        return type(self).__name__


# Forward model
class NonConvergence(EddyPermError):
    """Adaptive quadrature exceeded its refinement budget."""

    exit_code = 7

    def __init__(self, message: str, frequency: Optional[float] = None):
        """Initialize with the offending frequency in Hz, if known."""
        if frequency is not None:
            message = f"{message} (at {frequency:.6g} Hz)"
        super().__init__(message)
        self.frequency = frequency


class NonUnimodal(EddyPermError):
    """The plate-independent kernel has no single interior peak."""

    exit_code = 7


# Features
class GridMismatch(EddyPermError):
    """Two sweeps or modes that must agree do not."""

    exit_code = 5

    def __init__(self, message: str, pair: Optional[tuple] = None):
        """Initialize with the first offending pair, if any."""
        if pair is not None:
            message = f"{message}: {pair[0]!r} != {pair[1]!r}"
        super().__init__(message)
        self.pair = pair


class NoZeroCrossing(EddyPermError):
    """Re(ΔL) never goes from positive to negative."""

    exit_code = 4


class MultipleCrossings(EddyPermError):
    """More than one sign transition survives the noise mask."""

    exit_code = 5


class InsufficientPlateau(EddyPermError):
    """Too few usable points in a plateau band."""

    exit_code = 5


# Compensation
class RatioOutOfDomain(EddyPermError):
    """Amplitude ratio at or below exp(-π²/4)."""

    exit_code = 6

    def __init__(self, ratio: float):
        """Initialize with the offending amplitude ratio."""
        super().__init__(
            f"amplitude ratio {ratio:.6g} is at or below exp(-pi^2/4) ~ 0.0848;"
            " the lift-off is beyond the validity of the compensation"
        )
        self.ratio = ratio


class NegativeLiftoff(EddyPermError):
    """Amplitude ratio above one: signal grew relative to the reference."""

    exit_code = 6

    def __init__(self, ratio: float):
        """Initialize with the offending amplitude ratio."""
        super().__init__(
            f"amplitude ratio {ratio:.6g} exceeds 1; the reference calibration is"
            " inconsistent with this spectrum"
        )
        self.ratio = ratio


class ModeMismatch(GridMismatch):
    """Features and calibration use different plateau modes."""


class FitDiverged(EddyPermError):
    """The permeability fit objective is not unimodal on its bracket."""

    exit_code = 7


# IO
class ParseError(EddyPermError):
    """Malformed input text."""

    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None):
        """Initialize with the 1-based line number, if known."""
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ParseError):
    """A required column is missing or an unexpected one is present."""

    def __init__(self, message: str, column: Optional[str] = None):
        """Initialize with the column name."""
        super().__init__(message, line=1)
        self.column = column


class DuplicateFrequency(ParseError):
    """The same frequency appears twice in a sweep."""

    def __init__(self, frequency: float, line: Optional[int] = None):
        """Initialize with the repeated frequency."""
        super().__init__(f"duplicate frequency {frequency!r} Hz", line=line)
        self.frequency = frequency


class ValidationError(EddyPermError, ValueError):
    """A value violates a documented constraint."""

    exit_code = 2

    def __init__(self, field: str, message: str):
        """Initialize with the (dotted) field name."""
        super().__init__(f"{field}: {message}")
        self.field = field
        self.constraint = message

    def within(self, prefix: str) -> "ValidationError":
        """Return a copy with the field name nested under *prefix*."""
        return ValidationError(f"{prefix}.{self.field}", self.constraint)


# CLI
class ToleranceFailure(EddyPermError):
    """An acceptance check exceeded its tolerance."""

    exit_code = 8
