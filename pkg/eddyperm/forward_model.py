"""Dodd–Deeds forward model of a coaxial coil pair above a magnetic plate.

All lengths are in metres, frequencies in hertz and angular frequencies in rad/s. The
inductance change is

    ΔL(ω) = K ∫ P²(α)/α⁶ · A(α) · φ(α, ω) dα

where only the reflection coefficient φ depends on the plate. The plate-independent
part P²A/α⁶ is evaluated once per geometry and cached.
"""

from typing import Callable, Optional, Sequence, Union
from dataclasses import dataclass, field, replace
from loguru import logger
import functools
import math
import numpy as np
import scipy.optimize
import scipy.special
from .errors import NoZeroCrossing, NonConvergence, NonUnimodal, ValidationError


MU0 = 4e-7 * math.pi
"""Permeability of free space (H/m)."""
GL_ORDER = 16
QUAD_RTOL = 1e-8
TRUNCATION_LEVEL = 1e-12
LOWER_ALPHA = 1e-12
"""Lower integration limit, in units of 1/r2."""
START_PANELS = 16
MAX_REFINEMENTS = 10
ALPHA0_GRID_POINTS = 512
ALPHA0_WINDOW = (1e-2, 1e3)
"""Search window for the characteristic spatial frequency, in units of 1/r2."""
ALPHA0_RTOL = 1e-6
UNIMODAL_MARGIN = 0.01
_TRUNCATION_GRID = (1e-2, 1e4, 2048)
_CHUNK_ELEMENTS = 2_000_000
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class CoilGeometry:
    """Coaxial transmitter/receiver pair. Defaults are the reference sensor."""

    r1: float = 11.4e-3
    """Inner radius (m)."""
    r2: float = 12.0e-3
    """Outer radius (m)."""
    l0: float = 0.8e-3
    """Lift-off above the plate (m)."""
    h: float = 1.5e-3
    """Coil height (m)."""
    g: float = 1.0e-3
    """Gap between transmitter and receiver (m)."""
    n_turns: int = 20
    """Turns per coil."""

    def __post_init__(self):
        """Validate the geometry."""
        for name in ("r1", "r2", "l0", "h", "g"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValidationError(name, f"must be finite, got {value!r}")
        if not 0 < self.r1 < self.r2:
            raise ValidationError("r1", f"radii must satisfy 0 < r1 < r2 ({self.r1!r}, {self.r2!r})")
        if self.h <= 0:
            raise ValidationError("h", f"must be positive, got {self.h!r}")
        if self.g < 0:
            raise ValidationError("g", f"must be non-negative, got {self.g!r}")
        if self.l0 < 0:
            raise ValidationError("l0", f"must be non-negative, got {self.l0!r}")
        if isinstance(self.n_turns, bool) or int(self.n_turns) != self.n_turns or self.n_turns < 1:
            raise ValidationError("n_turns", f"must be a positive integer, got {self.n_turns!r}")

    def with_liftoff(self, l0: float) -> "CoilGeometry":
        """Same coil at another lift-off."""
        return replace(self, l0=l0)

    def scaled(self, factor: float) -> "CoilGeometry":
        """Same coil with all five lengths multiplied by *factor*."""
        return replace(
            self,
            r1=self.r1 * factor,
            r2=self.r2 * factor,
            l0=self.l0 * factor,
            h=self.h * factor,
            g=self.g * factor,
        )


@dataclass(frozen=True)
class PlateProperties:
    """Electromagnetic properties of the plate under test."""

    sigma: float = 6.624e6
    """Conductivity (S/m)."""
    mu_r: float = 125.2
    """Relative permeability."""

    def __post_init__(self):
        """Validate the plate."""
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError("sigma", f"must be positive, got {self.sigma!r}")
        if not (math.isfinite(self.mu_r) and self.mu_r >= 1):
            raise ValidationError("mu_r", f"must be at least 1, got {self.mu_r!r}")


@dataclass(frozen=True)
class Alpha0:
    """Characteristic spatial frequency of a coil (1/m)."""

    value: float

    def __post_init__(self):
        """Validate the value."""
        if not (math.isfinite(self.value) and self.value > 0):
            raise ValidationError("alpha0", f"must be positive, got {self.value!r}")

    def __float__(self) -> float:
        """The spatial frequency in 1/m."""
        return self.value


@dataclass(frozen=True, eq=False)
class InductanceSpectrum:
    """Complex inductance change ΔL (H) sampled on a strictly increasing grid (Hz)."""

    frequencies: np.ndarray = field(default_factory=lambda: np.empty(0))
    values: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))

    def __post_init__(self):
        """Validate and freeze the arrays."""
        frequencies = validate_grid(self.frequencies)
        values = np.array(self.values, dtype=complex).reshape(-1)
        if values.shape != frequencies.shape:
            raise ValueError(
                f"{len(values)} values for {len(frequencies)} frequencies"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("inductance values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        """Number of points."""
        return len(self.frequencies)

    @property
    def points(self) -> list[tuple[float, complex]]:
        """The spectrum as (frequency, ΔL) pairs."""
        return [(float(f), complex(v)) for f, v in zip(self.frequencies, self.values)]

    @property
    def omegas(self) -> np.ndarray:
        """Angular frequencies (rad/s)."""
        return 2 * math.pi * self.frequencies

    def truncated(self, max_hz: float) -> "InductanceSpectrum":
        """Points at or below *max_hz*."""
        keep = self.frequencies <= max_hz
        return InductanceSpectrum(self.frequencies[keep], self.values[keep])

    def scaled(self, factor: float) -> "InductanceSpectrum":
        """Spectrum with every value multiplied by *factor*."""
        return InductanceSpectrum(self.frequencies, self.values * factor)


def validate_grid(frequencies: ArrayLike) -> np.ndarray:
    """Return *frequencies* as a read-only array after checking the grid invariants.

    Raises:
        ValueError: If the grid is not one-dimensional, finite, positive and strictly
            increasing.
    """
    grid = np.array(frequencies, dtype=float).reshape(-1)
    if not np.all(np.isfinite(grid)):
        raise ValueError("frequencies must be finite")
    if np.any(grid <= 0):
        raise ValueError("frequencies must be positive")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("frequencies must be strictly increasing")
    grid.setflags(write=False)
    return grid


def frequency_grid(
    start_hz: float = 1.0,
    stop_hz: float = 1e6,
    points_per_decade: int = 40,
) -> np.ndarray:
    """Logarithmic grid f_k = start·10^(k/points_per_decade) for all f_k ≤ stop.

    1 Hz to 1 MHz at 40 points per decade gives 241 points.
    """
    if not 0 < start_hz < stop_hz:
        raise ValueError(f"need 0 < start < stop, got {start_hz!r}, {stop_hz!r}")
    if points_per_decade < 1:
        raise ValueError(f"points_per_decade must be positive, got {points_per_decade!r}")
    decades = math.log10(stop_hz / start_hz)
    count = int(math.floor(decades * points_per_decade + 1e-9)) + 1
    return validate_grid(start_hz * 10.0 ** (np.arange(count) / points_per_decade))


# Kernel pieces
def phi_kernel(alpha: ArrayLike, omega: ArrayLike, plate: PlateProperties):
    """Plate reflection coefficient φ(α, ω) = (μrα − α₁)/(μrα + α₁).

    With α₁ = sqrt(α² + jωσμrμ₀) on the principal branch. Broadcasts over *alpha* and
    *omega*; scalar inputs give a Python complex.
    """
    alpha = np.asarray(alpha, dtype=float)
    omega = np.asarray(omega, dtype=float)
    alpha1 = np.sqrt(alpha**2 + 1j * omega * plate.sigma * plate.mu_r * MU0)
    mu_alpha = plate.mu_r * alpha
    phi = (mu_alpha - alpha1) / (mu_alpha + alpha1)
    return complex(phi) if phi.ndim == 0 else phi


def xj1_integral(lo: ArrayLike, hi: ArrayLike) -> np.ndarray:
    """∫ x J₁(x) dx from *lo* to *hi*, elementwise.

    Composite Gauss–Legendre with panels no wider than π in x.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    width = hi - lo
    panels = max(1, int(math.ceil(float(np.max(np.abs(width), initial=0.0)) / math.pi)))
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = (edges[1:] - edges[:-1]) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    t = (mid[:, None] + half[:, None] * _GL_NODES).ravel()
    w = (half[:, None] * _GL_WEIGHTS).ravel()
    x = lo[..., None] + width[..., None] * t
    return width * np.sum(w * x * scipy.special.j1(x), axis=-1)


def p_integral(alpha: ArrayLike, geom: CoilGeometry):
    """P(α) = ∫ x J₁(x) dx between αr1 and αr2."""
    alpha = np.asarray(alpha, dtype=float)
    result = xj1_integral(alpha * geom.r1, alpha * geom.r2)
    return float(result) if result.ndim == 0 else result


def a_factor(alpha: ArrayLike, geom: CoilGeometry):
    """A(α) = e^{−α(2l0+h+g)}·(e^{−2αh} + 1)."""
    alpha = np.asarray(alpha, dtype=float)
    result = np.exp(-alpha * (2 * geom.l0 + geom.h + geom.g)) * (np.exp(-2 * alpha * geom.h) + 1)
    return float(result) if result.ndim == 0 else result


def k_factor(geom: CoilGeometry) -> float:
    """K = πμ₀N²/(h²(r1 − r2)²)."""
    return math.pi * MU0 * geom.n_turns**2 / (geom.h**2 * (geom.r1 - geom.r2) ** 2)


def plate_independent_kernel(alpha: ArrayLike, geom: CoilGeometry):
    """P²(α)A(α)/α⁶, including its finite limit at α = 0."""
    alpha = np.asarray(alpha, dtype=float)
    positive = alpha > 0
    safe = np.where(positive, alpha, 1.0)
    p_ratio = np.where(
        positive,
        xj1_integral(safe * geom.r1, safe * geom.r2) / safe**3,
        (geom.r2**3 - geom.r1**3) / 6,
    )
    result = p_ratio**2 * a_factor(alpha, geom)
    return float(result) if result.ndim == 0 else result


def log_axis_kernel(alpha: ArrayLike, geom: CoilGeometry):
    """α·P²(α)A(α)/α⁶: the plate-independent kernel per unit ln α.

    This is the density whose peak defines the characteristic spatial frequency.
    """
    alpha = np.asarray(alpha, dtype=float)
    result = alpha * plate_independent_kernel(alpha, geom)
    return float(result) if result.ndim == 0 else result


# Quadrature
@functools.lru_cache(maxsize=128)
def truncation_alpha(geom: CoilGeometry) -> float:
    """Spatial frequency beyond which the kernel stays below 1e-12 of its peak."""
    lo, hi, count = _TRUNCATION_GRID
    grid = np.geomspace(lo / geom.r2, hi / geom.r2, count)
    kernel = plate_independent_kernel(grid, geom)
    peak = max(float(np.max(kernel)), plate_independent_kernel(0.0, geom))
    significant = np.nonzero(kernel >= TRUNCATION_LEVEL * peak)[0]
    index = int(significant[-1]) + 1 if len(significant) else 1
    if index >= count:
        logger.warning(f"Kernel of {geom} still significant at {grid[-1]:.4g} 1/m")
        index = count - 1
    return float(grid[index])


@functools.lru_cache(maxsize=128)
def _quadrature_nodes(geom: CoilGeometry, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes α and weights (dα·kernel) for *panels* Gauss–Legendre panels in ln α."""
    u_lo = math.log(LOWER_ALPHA / geom.r2)
    u_hi = math.log(truncation_alpha(geom))
    edges = np.linspace(u_lo, u_hi, panels + 1)
    half = (edges[1:] - edges[:-1]) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    alpha = np.exp((mid[:, None] + half[:, None] * _GL_NODES).ravel())
    weights = (half[:, None] * _GL_WEIGHTS).ravel() * alpha
    weighted = weights * plate_independent_kernel(alpha, geom)
    alpha.setflags(write=False)
    weighted.setflags(write=False)
    return alpha, weighted


def _head_alpha(geom: CoilGeometry) -> float:
    return LOWER_ALPHA / geom.r2


def _refine(
    geom: CoilGeometry,
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray],
    frequencies: np.ndarray,
    max_refinements: int,
) -> np.ndarray:
    """Double the panel count until *evaluate* agrees with its previous level.

    *max_refinements* counts doublings; zero allows a single evaluation, which can never
    be confirmed and therefore always raises.
    """
    previous: Optional[np.ndarray] = None
    relative: Optional[np.ndarray] = None
    panels = START_PANELS
    for _ in range(max_refinements + 1):
        alpha, weighted = _quadrature_nodes(geom, panels)
        current = evaluate(alpha, weighted)
        if previous is not None:
            scale = np.maximum(np.abs(current), np.finfo(float).tiny)
            relative = np.abs(current - previous) / scale
            if np.all(relative <= QUAD_RTOL):
                logger.debug(f"Quadrature converged with {panels} panels")
                return current
        previous = current
        panels *= 2
    worst = None
    if len(frequencies):
        worst = float(frequencies[int(np.argmax(relative)) if relative is not None else 0])
    raise NonConvergence(
        f"quadrature did not reach rtol {QUAD_RTOL} within {max_refinements} refinements",
        frequency=worst,
    )


def _static_phi(plate: PlateProperties) -> float:
    return (plate.mu_r - 1) / (plate.mu_r + 1)


def delta_L0_magnitude(geom: CoilGeometry, max_refinements: int = MAX_REFINEMENTS) -> float:
    """ΔL₀ = K ∫ P²(α)A(α)/α⁶ dα, the plate-independent signal magnitude (H)."""
    head = plate_independent_kernel(0.0, geom) * _head_alpha(geom)

    def evaluate(alpha, weighted):
        return np.array([weighted.sum() + head])

    integral = _refine(geom, evaluate, np.empty(0), max_refinements)
    return float(k_factor(geom) * integral[0])


def _delta_l_batch(
    geom: CoilGeometry,
    plate: PlateProperties,
    frequencies: np.ndarray,
    max_refinements: int = MAX_REFINEMENTS,
) -> np.ndarray:
    """ΔL at every frequency of *frequencies* (Hz), vectorized over the batch."""
    frequencies = np.asarray(frequencies, dtype=float).reshape(-1)
    result = np.empty(len(frequencies), dtype=complex)
    static = frequencies == 0
    if np.any(static):
        result[static] = _static_phi(plate) * delta_L0_magnitude(geom, max_refinements)
    dynamic = ~static
    if not np.any(dynamic):
        return result
    omegas = 2 * math.pi * frequencies[dynamic]
    head_alpha = _head_alpha(geom)
    head = plate_independent_kernel(0.0, geom) * head_alpha
    head_phi = phi_kernel(np.full(len(omegas), head_alpha / 2), omegas, plate)

    def evaluate(alpha, weighted):
        rows = max(1, _CHUNK_ELEMENTS // len(alpha))
        integral = np.empty(len(omegas), dtype=complex)
        for start in range(0, len(omegas), rows):
            chunk = omegas[start:start + rows]
            phi = phi_kernel(alpha[None, :], chunk[:, None], plate)
            integral[start:start + rows] = phi @ weighted
        return integral + head * head_phi

    integral = _refine(geom, evaluate, frequencies[dynamic], max_refinements)
    result[dynamic] = k_factor(geom) * integral
    return result


def delta_L(
    geom: CoilGeometry,
    plate: PlateProperties,
    freq: float,
    max_refinements: int = MAX_REFINEMENTS,
) -> complex:
    """Inductance change ΔL (H) at *freq* Hz.

    `freq = 0` returns the static limit ((μr−1)/(μr+1))·ΔL₀ without quadrature.

    Raises:
        NonConvergence: If adaptive refinement exceeds *max_refinements* doublings.
    """
    if not (math.isfinite(freq) and freq >= 0):
        raise ValueError(f"frequency must be non-negative, got {freq!r}")
    return complex(_delta_l_batch(geom, plate, np.array([freq]), max_refinements)[0])


def simulate_spectrum(
    geom: CoilGeometry,
    plate: PlateProperties,
    grid: ArrayLike,
    max_refinements: int = MAX_REFINEMENTS,
) -> InductanceSpectrum:
    """Evaluate ΔL on every frequency of *grid*.

    Points are independent; they are computed together as one vectorized batch.

    Raises:
        NonConvergence: With the worst offending frequency attached.
    """
    frequencies = validate_grid(grid)
    logger.debug(f"Simulating {len(frequencies)} points for {geom} above {plate}")
    if not len(frequencies):
        return InductanceSpectrum()
    values = _delta_l_batch(geom, plate, frequencies, max_refinements)
    return InductanceSpectrum(frequencies, values)


def crossing_frequency(
    geom: CoilGeometry,
    plate: PlateProperties,
    lo_hz: float = 1.0,
    hi_hz: float = 1e6,
    xtol: float = 1e-12,
) -> float:
    """Frequency (Hz) where Re ΔL of the forward model changes sign.

    Brent's method in log-frequency on [lo_hz, hi_hz].

    Raises:
        NoZeroCrossing: If Re ΔL has the same sign at both ends.
    """
    def real_part(log_f):
        return delta_L(geom, plate, 10.0**log_f).real

    a, b = math.log10(lo_hz), math.log10(hi_hz)
    if real_part(a) * real_part(b) > 0:
        raise NoZeroCrossing(f"Re(dL) does not change sign between {lo_hz} and {hi_hz} Hz")
    return 10.0 ** scipy.optimize.brentq(real_part, a, b, xtol=xtol)


# Characteristic spatial frequency
def find_alpha0(geom: CoilGeometry) -> Alpha0:
    """Characteristic spatial frequency α₀ of *geom* at its configured lift-off.

    The plate-independent kernel P²A/α⁶ is largest at α → 0 on a linear axis, so α₀ is
    taken as the peak of the kernel per unit ln α (`log_axis_kernel`). A 512-point
    logarithmic scan over [1e-2/r2, 1e3/r2] brackets the peak and golden-section search
    refines it to a relative tolerance of 1e-6.

    Raises:
        NonUnimodal: If the scan finds another local maximum within 1% of the peak, or
            the peak sits on the edge of the scan window.
    """
    lo, hi = ALPHA0_WINDOW
    grid = np.geomspace(lo / geom.r2, hi / geom.r2, ALPHA0_GRID_POINTS)
    values = log_axis_kernel(grid, geom)
    peak_index = int(np.argmax(values))
    peak = values[peak_index]
    if peak_index in (0, len(grid) - 1):
        raise NonUnimodal(
            f"kernel peak at the edge of the search window ({grid[peak_index]:.4g} 1/m)"
        )
    interior = values[1:-1]
    maxima = np.nonzero((interior > values[:-2]) & (interior >= values[2:]))[0] + 1
    rivals = [
        int(i) for i in maxima
        if i != peak_index and values[i] >= (1 - UNIMODAL_MARGIN) * peak
    ]
    if rivals:
        raise NonUnimodal(
            f"kernel has {len(rivals) + 1} peaks within {UNIMODAL_MARGIN:.0%} of its maximum"
            f" (at {', '.join(f'{grid[i]:.4g}' for i in [peak_index, *rivals])} 1/m)"
        )
    bracket = tuple(float(a) for a in grid[peak_index - 1:peak_index + 2])
    logger.debug(f"Refining alpha0 in bracket {bracket}")
    result = scipy.optimize.minimize_scalar(
        lambda a: -log_axis_kernel(a, geom),
        bracket=bracket,
        method="golden",
        tol=ALPHA0_RTOL,
    )
    return Alpha0(float(result.x))
