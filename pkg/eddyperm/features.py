"""Feature extraction from inductance spectra.

Home of the zero-crossing and plateau extractors, and of the conversion from raw
impedance sweeps (sample and air reference) to inductance-change spectra.
"""

from typing import Optional
from dataclasses import dataclass, field
import enum
import math
from loguru import logger
import numpy as np
from .errors import (
    GridMismatch,
    InsufficientPlateau,
    MultipleCrossings,
    NoZeroCrossing,
    ValidationError,
)
from .forward_model import InductanceSpectrum, validate_grid


DEFAULT_CUTOFF_HZ = 500e3
DEFAULT_BAND_DECADES = 0.5
MIN_PLATEAU_POINTS = 3
AIR_SCATTER_FACTOR = 3.0
_BAND_EPS = 1e-12


class ReferenceMode(str, enum.Enum):
    """Which plateau of Re(ΔL) provides the amplitude feature."""

    LOW_FREQUENCY_PLATEAU = "low"
    HIGH_FREQUENCY_PLATEAU = "high"


@dataclass(frozen=True)
class FeatureOptions:
    """Options of `extract_features`."""

    reference_mode: ReferenceMode = ReferenceMode.LOW_FREQUENCY_PLATEAU
    """Plateau used for the amplitude."""
    cutoff_hz: float = DEFAULT_CUTOFF_HZ
    """Points above this frequency are dropped (coil self-resonance region)."""
    noise_floor: float = 0.0
    """Points with |ΔL| below this value (H) are ignored."""
    band_decades: float = DEFAULT_BAND_DECADES
    """Width of the plateau bands in decades."""

    def __post_init__(self):
        """Validate and coerce the reference mode."""
        try:
            object.__setattr__(self, "reference_mode", ReferenceMode(self.reference_mode))
        except ValueError:
            modes = ", ".join(repr(m.value) for m in ReferenceMode)
            raise ValidationError(
                "reference_mode", f"must be one of {modes}, got {self.reference_mode!r}"
            ) from None
        if not (math.isfinite(self.cutoff_hz) and self.cutoff_hz > 0):
            raise ValidationError("cutoff_hz", f"must be positive, got {self.cutoff_hz!r}")
        if not (math.isfinite(self.noise_floor) and self.noise_floor >= 0):
            raise ValidationError(
                "noise_floor", f"must be non-negative, got {self.noise_floor!r}"
            )
        if not (math.isfinite(self.band_decades) and self.band_decades > 0):
            raise ValidationError(
                "band_decades", f"must be positive, got {self.band_decades!r}"
            )


@dataclass(frozen=True)
class SpectralFeatures:
    """Features of one spectrum."""

    zero_crossing_hz: float
    """Frequency where Re(ΔL) goes from positive to negative (Hz)."""
    plateau_amplitude: float
    """Median |Re(ΔL)| over the selected plateau (H)."""
    reference_mode: ReferenceMode
    crossing_bracket: tuple[float, float]
    """The grid frequencies that bracket the sign change (Hz)."""

    @property
    def omega1(self) -> float:
        """Zero-crossing angular frequency (rad/s)."""
        return 2 * math.pi * self.zero_crossing_hz


@dataclass(frozen=True, eq=False)
class ImpedanceSweep:
    """Complex coil impedance Z (Ω) over a strictly increasing frequency grid (Hz)."""

    frequencies: np.ndarray = field(default_factory=lambda: np.empty(0))
    impedances: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))
    is_air_reference: bool = False

    def __post_init__(self):
        """Validate and freeze the arrays."""
        frequencies = validate_grid(self.frequencies)
        impedances = np.array(self.impedances, dtype=complex).reshape(-1)
        if impedances.shape != frequencies.shape:
            raise ValueError(
                f"{len(impedances)} impedances for {len(frequencies)} frequencies"
            )
        if not np.all(np.isfinite(impedances)):
            raise ValueError("impedances must be finite")
        impedances.setflags(write=False)
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "impedances", impedances)

    def __len__(self) -> int:
        """Number of points."""
        return len(self.frequencies)

    @property
    def points(self) -> list[tuple[float, complex]]:
        """The sweep as (frequency, Z) pairs."""
        return [(float(f), complex(z)) for f, z in zip(self.frequencies, self.impedances)]


def _check_same_grid(a: np.ndarray, b: np.ndarray):
    if len(a) != len(b):
        raise GridMismatch(f"sweeps have {len(a)} and {len(b)} points")
    differ = np.nonzero(a != b)[0]
    if len(differ):
        i = int(differ[0])
        raise GridMismatch(
            f"frequency grids differ at point {i + 1}", pair=(float(a[i]), float(b[i]))
        )


def impedance_to_inductance(sample: ImpedanceSweep, air: ImpedanceSweep) -> InductanceSpectrum:
    """ΔL(f) = (Z(f) − Z_air(f)) / (j2πf) on the shared grid.

    Raises:
        GridMismatch: If the two sweeps are not on the identical grid.
    """
    _check_same_grid(sample.frequencies, air.frequencies)
    delta_z = sample.impedances - air.impedances
    values = delta_z / (2j * math.pi * sample.frequencies)
    return InductanceSpectrum(sample.frequencies, values)


def inductance_to_impedance(spec: InductanceSpectrum, air: ImpedanceSweep) -> ImpedanceSweep:
    """Inverse of `impedance_to_inductance`: Z = Z_air + j2πf·ΔL."""
    _check_same_grid(spec.frequencies, air.frequencies)
    impedances = air.impedances + 2j * math.pi * spec.frequencies * spec.values
    return ImpedanceSweep(spec.frequencies, impedances)


def noise_floor_from_air(
    air: ImpedanceSweep,
    band_decades: float = DEFAULT_BAND_DECADES,
) -> float:
    """Three times the scatter of |Z_air/(j2πf)| over the lowest band of the air sweep.

    Raises:
        InsufficientPlateau: If the band holds fewer than three points.
    """
    band = _low_band(air.frequencies, band_decades)
    if np.count_nonzero(band) < MIN_PLATEAU_POINTS:
        raise InsufficientPlateau(
            f"air sweep has {np.count_nonzero(band)} points in its lowest"
            f" {band_decades} decades (need {MIN_PLATEAU_POINTS})"
        )
    magnitude = np.abs(air.impedances[band]) / (2 * math.pi * air.frequencies[band])
    floor = AIR_SCATTER_FACTOR * float(np.std(magnitude))
    logger.debug(f"Noise floor from air sweep: {floor:.4g} H")
    return floor


def noise_mask(spec: InductanceSpectrum, noise_floor: float = 0.0) -> np.ndarray:
    """Boolean array, True where |ΔL| is below *noise_floor* and the point is ignored."""
    return np.abs(spec.values) < noise_floor


def zero_crossing(spec: InductanceSpectrum, noise_floor: float = 0.0) -> float:
    """Frequency (Hz) where Re(ΔL) changes from positive to negative.

    See `zero_crossing_bracket` for the rules.
    """
    return zero_crossing_bracket(spec, noise_floor)[0]


def zero_crossing_bracket(
    spec: InductanceSpectrum,
    noise_floor: float = 0.0,
) -> tuple[float, tuple[float, float]]:
    """Zero-crossing frequency and the pair of grid frequencies bracketing it.

    Points with |ΔL| below *noise_floor* are ignored. Scanning upward, a point is positive
    when Re(ΔL) > 0. Exactly one sign transition may remain and it must go from positive
    to negative; its location is interpolated linearly in (log f, Re ΔL). A grid point
    where Re(ΔL) is exactly zero is itself the crossing, bracketed by its positive
    neighbour below and the next non-zero point above.

    Raises:
        NoZeroCrossing: If fewer than two points survive the mask, there is no sign
            transition, the only transition goes from negative to positive, or Re(ΔL)
            stays at zero to the top of the spectrum.
        MultipleCrossings: If two or more transitions survive the mask.
    """
    keep = ~noise_mask(spec, noise_floor)
    freqs = spec.frequencies[keep]
    real = spec.values.real[keep]
    if len(freqs) < 2:
        raise NoZeroCrossing(f"only {len(freqs)} points above the noise floor")
    positive = real > 0
    transitions = np.nonzero(positive[:-1] != positive[1:])[0]
    if len(transitions) == 0:
        sign = "positive" if positive[0] else "non-positive"
        raise NoZeroCrossing(f"Re(dL) is {sign} over the whole spectrum")
    if len(transitions) > 1:
        at = ", ".join(f"{freqs[i]:.6g}" for i in transitions[:5])
        raise MultipleCrossings(
            f"{len(transitions)} sign transitions of Re(dL) (near {at} Hz);"
            " consider raising the noise floor"
        )
    i = int(transitions[0])
    if not positive[i]:
        raise NoZeroCrossing(
            f"Re(dL) only goes from negative to positive (near {freqs[i]:.6g} Hz)"
        )
    if real[i + 1] == 0:
        # Grid point sits on the root; bracket out to the next point off it
        nonzero = np.nonzero(real[i + 2:])[0]
        if not len(nonzero):
            raise NoZeroCrossing(
                f"Re(dL) stays at zero above {freqs[i + 1]:.6g} Hz"
            )
        crossing = float(freqs[i + 1])
        bracket = (float(freqs[i]), float(freqs[i + 2 + int(nonzero[0])]))
        logger.debug(f"Zero crossing on grid point {crossing:.6g} Hz in {bracket}")
        return crossing, bracket
    x_lo, x_hi = math.log10(freqs[i]), math.log10(freqs[i + 1])
    y_lo, y_hi = real[i], real[i + 1]
    x = x_lo + (x_hi - x_lo) * y_lo / (y_lo - y_hi)
    crossing = 10.0**x
    logger.debug(f"Zero crossing at {crossing:.6g} Hz in [{freqs[i]:.6g}, {freqs[i + 1]:.6g}]")
    return crossing, (float(freqs[i]), float(freqs[i + 1]))


def _low_band(frequencies: np.ndarray, band_decades: float) -> np.ndarray:
    if not len(frequencies):
        return np.zeros(0, dtype=bool)
    top = frequencies[0] * 10.0**band_decades * (1 + _BAND_EPS)
    return frequencies <= top


def _high_band(frequencies: np.ndarray, band_decades: float, cutoff_hz: float) -> np.ndarray:
    below = frequencies <= cutoff_hz
    if not np.any(below):
        return below
    bottom = frequencies[below][-1] / 10.0**band_decades * (1 - _BAND_EPS)
    return below & (frequencies >= bottom)


def plateau_amplitude(
    spec: InductanceSpectrum,
    mode: ReferenceMode = ReferenceMode.LOW_FREQUENCY_PLATEAU,
    cutoff_hz: float = DEFAULT_CUTOFF_HZ,
    *,
    noise_floor: float = 0.0,
    band_decades: float = DEFAULT_BAND_DECADES,
) -> float:
    """Median |Re(ΔL)| (H) over a plateau band of the spectrum.

    The low-frequency band spans the lowest *band_decades* of the grid; the high-frequency
    band spans the highest *band_decades* at or below *cutoff_hz*. Masked points do not
    count.

    Raises:
        InsufficientPlateau: If fewer than three usable points fall in the band, or their
            median is zero.
    """
    mode = ReferenceMode(mode)
    if mode is ReferenceMode.LOW_FREQUENCY_PLATEAU:
        band = _low_band(spec.frequencies, band_decades)
    else:
        band = _high_band(spec.frequencies, band_decades, cutoff_hz)
    band &= ~noise_mask(spec, noise_floor)
    count = int(np.count_nonzero(band))
    if count < MIN_PLATEAU_POINTS:
        raise InsufficientPlateau(
            f"{count} usable points in the {mode.value}-frequency plateau"
            f" (need {MIN_PLATEAU_POINTS})"
        )
    amplitude = float(np.median(np.abs(spec.values.real[band])))
    if amplitude <= 0:
        raise InsufficientPlateau(f"{mode.value}-frequency plateau amplitude is zero")
    return amplitude


def extract_features(
    spec: InductanceSpectrum,
    options: Optional[FeatureOptions] = None,
) -> SpectralFeatures:
    """Zero crossing and plateau amplitude of *spec* under *options*.

    Points above the cutoff are dropped before either extractor runs.
    """
    options = options or FeatureOptions()
    truncated = spec.truncated(options.cutoff_hz)
    crossing, bracket = zero_crossing_bracket(truncated, options.noise_floor)
    amplitude = plateau_amplitude(
        truncated,
        options.reference_mode,
        options.cutoff_hz,
        noise_floor=options.noise_floor,
        band_decades=options.band_decades,
    )
    logger.debug(f"Features: crossing {crossing:.6g} Hz, plateau {amplitude:.6g} H")
    return SpectralFeatures(
        zero_crossing_hz=crossing,
        plateau_amplitude=amplitude,
        reference_mode=options.reference_mode,
        crossing_bracket=bracket,
    )
