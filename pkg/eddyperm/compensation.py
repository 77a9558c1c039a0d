"""Lift-off compensation of the zero-crossing frequency.

A coil at lift-off l above its reference position sees the plate-independent kernel
multiplied by e^{-2αl}. Approximating the kernel by sin²(απ/2α₀) turns the shift of its
peak, and with it the shift of the zero-crossing frequency, into a closed form in the
amplitude ratio ΔL₀/ΔLm:

    ω₀ = π²ω₁ / (π² + 4 ln(ΔL₀/ΔLm))
    μr = μ₀σω₀ / α₀²
    l  = (π² − sqrt(π⁴ + 4π² ln(ΔL₀/ΔLm))) / 4α₀

The expansion holds for ratios above e^{-π²/4}, where the square root stays real.
"""

from typing import Optional, Sequence, Union
from dataclasses import dataclass
import enum
import math
from loguru import logger
import numpy as np
import scipy.integrate
import scipy.optimize
from .errors import (
    FitDiverged,
    ModeMismatch,
    NegativeLiftoff,
    RatioOutOfDomain,
    ValidationError,
)
from .features import (
    FeatureOptions,
    ReferenceMode,
    SpectralFeatures,
    extract_features,
    noise_mask,
)
from .forward_model import (
    MU0,
    Alpha0,
    CoilGeometry,
    InductanceSpectrum,
    PlateProperties,
    find_alpha0,
    log_axis_kernel,
    simulate_spectrum,
)


RATIO_BOUND = math.exp(-math.pi**2 / 4)
"""Amplitude ratios at or below this value are outside the compensation's domain."""
MIN_MU_R_APPROX = 10.0
MAX_ALPHA0_LIFTOFF = 0.3
FIT_BRACKET = (1.0, 1e4)
FIT_SCAN_POINTS = 33
FIT_RTOL = 1e-4
FIT_MIN_DECADES = 2.0
FIT_MIN_DENSITY = 5.0
"""Points per decade below which the fit warns that the spectrum is coarse."""
SINUSOID_POINTS = 4001
_PI2 = math.pi**2


class Alpha0Source(str, enum.Enum):
    """Where a calibration takes its characteristic spatial frequency from."""

    GEOMETRY = "geometry"
    """Peak of the coil's kernel (`find_alpha0`)."""
    REFERENCE = "reference"
    """Zero crossing of a reference plate of known permeability (`effective_alpha0`)."""


@dataclass(frozen=True)
class ReferenceCalibration:
    """Amplitude and spatial frequency measured at the reference lift-off."""

    delta_L_m: float
    """Plateau amplitude at the reference lift-off (H)."""
    reference_liftoff: float
    """Lift-off of the reference measurement (m)."""
    alpha0: float
    """Characteristic spatial frequency (1/m)."""
    sigma: float
    """Plate conductivity (S/m)."""
    reference_mode: ReferenceMode = ReferenceMode.LOW_FREQUENCY_PLATEAU
    """Plateau the amplitude was taken from."""

    def __post_init__(self):
        """Validate."""
        for name in ("delta_L_m", "alpha0", "sigma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(name, f"must be positive, got {value!r}")
        if not (math.isfinite(self.reference_liftoff) and self.reference_liftoff >= 0):
            raise ValidationError(
                "reference_liftoff", f"must be non-negative, got {self.reference_liftoff!r}"
            )
        try:
            object.__setattr__(self, "reference_mode", ReferenceMode(self.reference_mode))
        except ValueError:
            raise ValidationError(
                "reference_mode", f"unknown mode {self.reference_mode!r}"
            ) from None


@dataclass(frozen=True)
class CompensationResult:
    """Compensated estimates and every intermediate that produced them."""

    omega0: float
    """Compensated zero-crossing angular frequency (rad/s)."""
    mu_r_est: float
    """Relative permeability from the compensated crossing."""
    liftoff_est: float
    """Lift-off increase above the reference lift-off (m)."""
    amplitude_ratio: float
    """ΔL₀/ΔLm."""
    alpha0_used: float
    """Characteristic spatial frequency of the calibration (1/m)."""
    omega1_measured: float
    """Measured zero-crossing angular frequency (rad/s)."""
    mu_r_uncompensated: float
    """Relative permeability from the measured crossing."""
    alpha0_revised: float
    """Characteristic spatial frequency shifted to the estimated lift-off (1/m)."""
    reference_liftoff: float = 0.0
    """Lift-off of the calibration (m)."""

    @property
    def absolute_liftoff(self) -> float:
        """Estimated lift-off above the plate (m)."""
        return self.reference_liftoff + self.liftoff_est

    @property
    def zero_crossing_hz(self) -> float:
        """Compensated zero-crossing frequency (Hz)."""
        return self.omega0 / (2 * math.pi)


def _check_ratio(ratio: float):
    if not math.isfinite(ratio) or ratio <= RATIO_BOUND:
        raise RatioOutOfDomain(ratio)


def approx_zero_crossing(alpha0: Union[Alpha0, float], plate: PlateProperties) -> float:
    """First-order zero-crossing angular frequency μrα₀²/(μ₀σ) (rad/s)."""
    alpha0 = float(alpha0)
    if alpha0 <= 0:
        raise ValueError(f"alpha0 must be positive, got {alpha0!r}")
    if plate.mu_r < MIN_MU_R_APPROX:
        logger.warning(
            f"mu_r = {plate.mu_r:g} is below {MIN_MU_R_APPROX:g};"
            " the first-order zero crossing is inaccurate"
        )
    return plate.mu_r * alpha0**2 / (MU0 * plate.sigma)


def effective_alpha0(omega1: float, plate: PlateProperties) -> float:
    """Spatial frequency that places the first-order crossing at *omega1* (1/m)."""
    if not omega1 > 0:
        raise ValueError(f"omega1 must be positive, got {omega1!r}")
    return math.sqrt(MU0 * plate.sigma * omega1 / plate.mu_r)


def compensate_zero_crossing(omega1: float, ratio: float) -> float:
    """Zero-crossing angular frequency moved back to the reference lift-off (rad/s).

    Raises:
        RatioOutOfDomain: If *ratio* is at or below e^{-π²/4}.
    """
    if not omega1 > 0:
        raise ValueError(f"omega1 must be positive, got {omega1!r}")
    _check_ratio(ratio)
    denominator = 1 + 4 * math.log(ratio) / _PI2
    if denominator <= 0:
        raise RatioOutOfDomain(ratio)
    return omega1 / denominator


def estimate_permeability(omega0: float, cal: ReferenceCalibration) -> float:
    """μr = μ₀σω₀/α₀²."""
    if not omega0 > 0:
        raise ValueError(f"omega0 must be positive, got {omega0!r}")
    return MU0 * cal.sigma * omega0 / cal.alpha0**2


def estimate_liftoff(ratio: float, alpha0: Union[Alpha0, float]) -> float:
    """Lift-off increase (m) implied by an amplitude ratio.

    Always the smaller root of the quadratic, so α₀l lies in [0, π²/4].

    Raises:
        NegativeLiftoff: If *ratio* exceeds one.
        RatioOutOfDomain: If *ratio* is at or below e^{-π²/4}.
    """
    alpha0 = float(alpha0)
    if ratio > 1:
        raise NegativeLiftoff(ratio)
    _check_ratio(ratio)
    # Conjugate form of the smaller root; exact zero at ratio 1.
    s = abs(math.log(ratio))
    root = math.sqrt(max(_PI2**2 - 4 * _PI2 * s, 0.0))
    return _PI2 * s / (alpha0 * (_PI2 + root))


def revised_alpha0(alpha0: Union[Alpha0, float], extra_liftoff: float) -> float:
    """Peak of the e^{-2αl}·sin²(απ/2α₀) kernel: α₀ − 4α₀²l/π² (1/m)."""
    alpha0 = float(alpha0)
    if extra_liftoff < 0:
        raise ValueError(f"extra lift-off must be non-negative, got {extra_liftoff!r}")
    if alpha0 * extra_liftoff > MAX_ALPHA0_LIFTOFF:
        logger.warning(
            f"alpha0*l = {alpha0 * extra_liftoff:.3g} exceeds {MAX_ALPHA0_LIFTOFF};"
            " the revised spatial frequency is inaccurate"
        )
    return alpha0 - 4 * alpha0**2 * extra_liftoff / _PI2


def sinusoid_curves(
    geom: CoilGeometry,
    points: int = SINUSOID_POINTS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Peak-normalized kernel and sin² surrogate on [0, 2α₀].

    Returns:
        Tuple of (alpha, kernel, surrogate) arrays.
    """
    alpha0 = find_alpha0(geom).value
    alpha = np.linspace(0.0, 2 * alpha0, points)
    kernel = log_axis_kernel(alpha, geom) / log_axis_kernel(alpha0, geom)
    surrogate = np.sin(alpha * math.pi / (2 * alpha0)) ** 2
    return alpha, kernel, surrogate


def sinusoid_bessel_check(geom: CoilGeometry, points: int = SINUSOID_POINTS) -> float:
    """Relative area difference between the normalized kernel and its sin² surrogate."""
    alpha, kernel, surrogate = sinusoid_curves(geom, points)
    kernel_area = scipy.integrate.simpson(kernel, x=alpha)
    surrogate_area = scipy.integrate.simpson(surrogate, x=alpha)
    discrepancy = abs(kernel_area - surrogate_area) / kernel_area
    logger.debug(f"Sinusoid areas: kernel {kernel_area:.6g}, surrogate {surrogate_area:.6g}")
    return float(discrepancy)


def run_compensation(
    features: SpectralFeatures,
    cal: ReferenceCalibration,
) -> CompensationResult:
    """Compensated crossing, permeability and lift-off for one spectrum.

    Raises:
        ModeMismatch: If features and calibration use different plateaus.
        NegativeLiftoff: If the amplitude grew relative to the reference.
        RatioOutOfDomain: If the amplitude ratio is at or below e^{-π²/4}.
    """
    if features.reference_mode is not cal.reference_mode:
        raise ModeMismatch(
            "features and calibration use different plateau modes",
            pair=(features.reference_mode.value, cal.reference_mode.value),
        )
    ratio = features.plateau_amplitude / cal.delta_L_m
    liftoff = estimate_liftoff(ratio, cal.alpha0)
    omega1 = features.omega1
    omega0 = compensate_zero_crossing(omega1, ratio)
    result = CompensationResult(
        omega0=omega0,
        mu_r_est=estimate_permeability(omega0, cal),
        liftoff_est=liftoff,
        amplitude_ratio=ratio,
        alpha0_used=cal.alpha0,
        omega1_measured=omega1,
        mu_r_uncompensated=estimate_permeability(omega1, cal),
        alpha0_revised=revised_alpha0(cal.alpha0, liftoff),
        reference_liftoff=cal.reference_liftoff,
    )
    logger.debug(f"Compensation: {result}")
    return result


def build_calibration(
    reference: InductanceSpectrum,
    geom: CoilGeometry,
    sigma: float,
    options: Optional[FeatureOptions] = None,
    mu_r: Optional[float] = None,
) -> ReferenceCalibration:
    """Calibration from a spectrum measured at the reference lift-off *geom.l0*.

    Without *mu_r*, α₀ is the peak of the coil's kernel. With the permeability of the
    reference plate known, α₀ is chosen so that the reference crossing reproduces it.
    """
    options = options or FeatureOptions()
    features = extract_features(reference, options)
    if mu_r is None:
        alpha0 = find_alpha0(geom).value
    else:
        alpha0 = effective_alpha0(features.omega1, PlateProperties(sigma=sigma, mu_r=mu_r))
    logger.info(
        f"Calibrated at {geom.l0 * 1e3:g} mm: dLm = {features.plateau_amplitude:.6g} H,"
        f" alpha0 = {alpha0:.6g} 1/m"
    )
    return ReferenceCalibration(
        delta_L_m=features.plateau_amplitude,
        reference_liftoff=geom.l0,
        alpha0=alpha0,
        sigma=sigma,
        reference_mode=options.reference_mode,
    )


@dataclass(frozen=True)
class LadderRow:
    """One lift-off of a simulated lift-off ladder."""

    liftoff: float
    """Lift-off (m)."""
    actual_mu_r: float
    uncompensated_mu_r: float
    compensated_mu_r: float
    features: SpectralFeatures
    result: CompensationResult

    @property
    def uncompensated_error(self) -> float:
        """Relative error of the uncompensated estimate."""
        return abs(self.uncompensated_mu_r - self.actual_mu_r) / self.actual_mu_r

    @property
    def compensated_error(self) -> float:
        """Relative error of the compensated estimate."""
        return abs(self.compensated_mu_r - self.actual_mu_r) / self.actual_mu_r


def run_ladder(
    geom: CoilGeometry,
    plate: PlateProperties,
    liftoffs: Sequence[float],
    grid: np.ndarray,
    options: Optional[FeatureOptions] = None,
    alpha0_source: Alpha0Source = Alpha0Source.GEOMETRY,
) -> list[LadderRow]:
    """Simulate, extract and compensate every lift-off against the lowest one.

    Args:
        geom: Coil; its own lift-off is ignored.
        plate: Plate of known permeability.
        liftoffs: Lift-offs (m); rows come back sorted by lift-off.
        grid: Frequency grid (Hz).
        options: Feature options.
        alpha0_source: Where the calibration takes α₀ from.
    """
    options = options or FeatureOptions()
    alpha0_source = Alpha0Source(alpha0_source)
    liftoffs = sorted(float(l) for l in liftoffs)
    if not liftoffs:
        raise ValueError("no lift-offs given")
    spectra = []
    for liftoff in liftoffs:
        logger.info(f"Simulating lift-off {liftoff * 1e3:g} mm")
        spectra.append(simulate_spectrum(geom.with_liftoff(liftoff), plate, grid))
    reference_geom = geom.with_liftoff(liftoffs[0])
    known_mu_r = plate.mu_r if alpha0_source is Alpha0Source.REFERENCE else None
    cal = build_calibration(spectra[0], reference_geom, plate.sigma, options, mu_r=known_mu_r)
    rows = []
    for liftoff, spectrum in zip(liftoffs, spectra):
        features = extract_features(spectrum, options)
        result = run_compensation(features, cal)
        rows.append(LadderRow(
            liftoff=liftoff,
            actual_mu_r=plate.mu_r,
            uncompensated_mu_r=result.mu_r_uncompensated,
            compensated_mu_r=result.mu_r_est,
            features=features,
            result=result,
        ))
    return rows


def calibrate_permeability_by_fit(
    spec: InductanceSpectrum,
    geom: CoilGeometry,
    sigma: float,
    options: Optional[FeatureOptions] = None,
    bracket: tuple[float, float] = FIT_BRACKET,
    rtol: float = FIT_RTOL,
) -> float:
    """Least-squares μr of the forward model against a measured spectrum.

    The objective Σ|ΔL_model − ΔL_measured|² is scanned on a logarithmic grid over
    *bracket* and its minimum is refined by golden-section search. Points above the
    cutoff or below the noise floor of *options* are ignored.

    Raises:
        ValueError: If the usable grid spans less than two decades.
        FitDiverged: If the scan finds the minimum on the bracket edge or more than one
            local minimum.
    """
    options = options or FeatureOptions()
    truncated = spec.truncated(options.cutoff_hz)
    keep = ~noise_mask(truncated, options.noise_floor)
    freqs = truncated.frequencies[keep]
    measured = truncated.values[keep]
    if len(freqs) < 2 or math.log10(freqs[-1] / freqs[0]) < FIT_MIN_DECADES:
        raise ValueError(
            f"fit needs at least {FIT_MIN_DECADES:g} decades of usable spectrum"
        )
    density = (len(freqs) - 1) / math.log10(freqs[-1] / freqs[0])
    if density < FIT_MIN_DENSITY:
        logger.warning(
            f"fitting {len(freqs)} points at {density:.2g} per decade; the fit may be biased"
        )

    def objective(mu_r: float) -> float:
        model = simulate_spectrum(geom, PlateProperties(sigma=sigma, mu_r=mu_r), freqs)
        return float(np.sum(np.abs(model.values - measured) ** 2))

    scan = np.geomspace(*bracket, FIT_SCAN_POINTS)
    values = np.array([objective(m) for m in scan])
    best = int(np.argmin(values))
    if best in (0, len(scan) - 1):
        raise FitDiverged(
            f"fit objective is smallest at the bracket edge (mu_r = {scan[best]:g})"
        )
    interior = values[1:-1]
    minima = np.nonzero((interior < values[:-2]) & (interior <= values[2:]))[0] + 1
    if len(minima) > 1:
        raise FitDiverged(
            "fit objective has local minima near mu_r = "
            + ", ".join(f"{scan[i]:.4g}" for i in minima)
        )
    fit_bracket = tuple(float(m) for m in scan[best - 1:best + 2])
    logger.debug(f"Fitting mu_r in bracket {fit_bracket}")
    result = scipy.optimize.minimize_scalar(
        objective, bracket=fit_bracket, method="golden", tol=rtol
    )
    mu_r = float(result.x)
    logger.info(f"Fitted mu_r = {mu_r:.6g} over {len(freqs)} points")
    return mu_r
