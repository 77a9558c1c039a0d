"""Parsing and serialization.

Sweeps and spectra are CSV files with a header row naming their columns:

- impedance sweeps: `freq_hz,re_z_ohm,im_z_ohm`
- inductance spectra: `freq_hz,re_dL_H,im_dL_H`

Run configuration is TOML (lengths in millimetres, see `defaults.toml`), calibrations and
reports are JSON. Every writer is deterministic and every parser inverts its writer.
"""

from typing import Any, Optional, Sequence, Union
from dataclasses import asdict, dataclass, field
import csv
import json
import math
import pathlib
import re
import arrow
import numpy as np
import tomli
import tomli_w
from . import __version__, util
from .compensation import CompensationResult, LadderRow, ReferenceCalibration
from .errors import (
    DuplicateFrequency,
    ParseError,
    SchemaError,
    ValidationError,
)
from .features import (
    DEFAULT_BAND_DECADES,
    DEFAULT_CUTOFF_HZ,
    FeatureOptions,
    ImpedanceSweep,
    ReferenceMode,
    SpectralFeatures,
    noise_mask,
)
from .forward_model import (
    CoilGeometry,
    InductanceSpectrum,
    PlateProperties,
    frequency_grid,
)


DEFAULTS_FILE = pathlib.Path(__file__).parent / "defaults.toml"
SPECTRUM_COLUMNS = ("freq_hz", "re_dL_H", "im_dL_H")
SWEEP_COLUMNS = ("freq_hz", "re_z_ohm", "im_z_ohm")
PLOT_COLUMNS = (*SPECTRUM_COLUMNS, "masked")
NUMBER_PATTERN = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?", re.ASCII)
"""Plain decimal or scientific notation; no underscores, hex, inf or nan."""
MIN_POINTS_PER_DECADE = 4

PUBLISHED_TABLE: dict[float, tuple[float, float]] = {
    0.8: (120.179393, 120.179393),
    2.3: (98.6480926, 119.101695),
    2.8: (89.1353189, 118.210084),
    3.3: (82.2564103, 117.333333),
    3.8: (76.104979, 115.942384),
    4.3: (72.5428571, 116.286711),
    4.8: (69.8668867, 116.800415),
    5.3: (68.6025918, 117.259734),
}
"""Published permeability estimates (uncompensated, compensated) by lift-off in mm, for
`PUBLISHED_PLATE` under `PUBLISHED_GEOMETRY`."""
PUBLISHED_GEOMETRY = CoilGeometry(
    r1=11.4e-3, r2=12.0e-3, l0=0.8e-3, h=1.5e-3, g=1.0e-3, n_turns=20
)
PUBLISHED_PLATE = PlateProperties(sigma=6.624e6, mu_r=125.2)


def published_table_for(
    geometry: CoilGeometry,
    plate: PlateProperties,
) -> dict[float, tuple[float, float]]:
    """`PUBLISHED_TABLE` when *geometry* and *plate* are the published setup, else empty."""
    if geometry == PUBLISHED_GEOMETRY and plate == PUBLISHED_PLATE:
        return PUBLISHED_TABLE
    return {}


# Sweeps and spectra
def _fmt(value: float) -> str:
    return f"{value:.17g}"


def parse_sweep_csv(
    text: str,
    is_air_reference: bool = False,
) -> Union[ImpedanceSweep, InductanceSpectrum]:
    """Parse a sweep or spectrum CSV; the header decides which.

    Rows may come in any order and are sorted by frequency. Blank lines are skipped. A
    file with only a header is a valid empty sweep.

    Raises:
        SchemaError: If the header does not match one of the two schemas.
        ParseError: If a row is malformed, naming its line.
        DuplicateFrequency: If a frequency appears twice.
    """
    rows = [
        (number, row)
        for number, row in enumerate(csv.reader(text.lstrip("\ufeff").splitlines()), 1)
        if any(cell.strip() for cell in row)
    ]
    if not rows:
        raise SchemaError("missing header row")
    header = [cell.strip() for cell in rows[0][1]]
    columns = _match_schema(header)
    index = [header.index(name) for name in columns]
    freqs, values, lines = [], [], []
    for number, row in rows[1:]:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=number)
        parsed = []
        for name, i in zip(columns, index):
            cell = row[i].strip()
            if not NUMBER_PATTERN.fullmatch(cell):
                raise ParseError(f"{name}: {cell!r} is not a number", line=number)
            value = float(cell)
            if not math.isfinite(value):
                raise ParseError(f"{name}: {cell!r} is not finite", line=number)
            parsed.append(value)
        if parsed[0] <= 0:
            raise ParseError(f"freq_hz: {parsed[0]!r} is not positive", line=number)
        freqs.append(parsed[0])
        values.append(complex(parsed[1], parsed[2]))
        lines.append(number)
    order = sorted(range(len(freqs)), key=lambda i: (freqs[i], lines[i]))
    for previous, current in zip(order, order[1:]):
        if freqs[previous] == freqs[current]:
            raise DuplicateFrequency(freqs[current], line=lines[current])
    frequencies = np.array([freqs[i] for i in order], dtype=float)
    data = np.array([values[i] for i in order], dtype=complex)
    if columns == SWEEP_COLUMNS:
        return ImpedanceSweep(frequencies, data, is_air_reference=is_air_reference)
    return InductanceSpectrum(frequencies, data)


def _match_schema(header: list[str]) -> tuple[str, ...]:
    for name in header:
        if header.count(name) > 1:
            raise SchemaError(f"column {name!r} appears more than once", column=name)
    schema = SWEEP_COLUMNS if "re_z_ohm" in header or "im_z_ohm" in header else SPECTRUM_COLUMNS
    for name in schema:
        if name not in header:
            raise SchemaError(f"missing column {name!r}", column=name)
    for name in header:
        if name not in schema:
            raise SchemaError(f"unexpected column {name!r}", column=name)
    return schema


def write_spectrum_csv(spec: InductanceSpectrum) -> str:
    """Inductance schema with 17 significant digits."""
    lines = [",".join(SPECTRUM_COLUMNS)]
    for f, v in zip(spec.frequencies, spec.values):
        lines.append(f"{_fmt(f)},{_fmt(v.real)},{_fmt(v.imag)}")
    return "\n".join(lines) + "\n"


def write_sweep_csv(sweep: ImpedanceSweep) -> str:
    """Impedance schema with 17 significant digits."""
    lines = [",".join(SWEEP_COLUMNS)]
    for f, z in zip(sweep.frequencies, sweep.impedances):
        lines.append(f"{_fmt(f)},{_fmt(z.real)},{_fmt(z.imag)}")
    return "\n".join(lines) + "\n"


def write_plot_csv(spec: InductanceSpectrum, options: Optional[FeatureOptions] = None) -> str:
    """Spectrum with a 0/1 column flagging the points feature extraction ignores."""
    options = options or FeatureOptions()
    masked = noise_mask(spec, options.noise_floor) | (spec.frequencies > options.cutoff_hz)
    lines = [",".join(PLOT_COLUMNS)]
    for f, v, m in zip(spec.frequencies, spec.values, masked):
        lines.append(f"{_fmt(f)},{_fmt(v.real)},{_fmt(v.imag)},{int(m)}")
    return "\n".join(lines) + "\n"


def write_ladder_csv(
    rows: Sequence[LadderRow],
    published_table: Optional[dict[float, tuple[float, float]]] = None,
) -> str:
    """Permeability estimates per lift-off, with published values when given."""
    columns = [
        "liftoff_mm",
        "actual_mu_r",
        "uncompensated_mu_r",
        "compensated_mu_r",
        "uncompensated_error",
        "compensated_error",
    ]
    if published_table is not None:
        columns += ["published_uncompensated_mu_r", "published_compensated_mu_r"]
    lines = [",".join(columns)]
    for row in rows:
        liftoff_mm = util.shift_decimal(row.liftoff, 3)
        cells = [
            repr(liftoff_mm),
            _fmt(row.actual_mu_r),
            _fmt(row.uncompensated_mu_r),
            _fmt(row.compensated_mu_r),
            _fmt(row.uncompensated_error),
            _fmt(row.compensated_error),
        ]
        if published_table is not None:
            expected = published_table.get(liftoff_mm)
            cells += [_fmt(v) for v in expected] if expected else ["", ""]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_curves_csv(alpha: np.ndarray, kernel: np.ndarray, surrogate: np.ndarray) -> str:
    """Normalized kernel and sinusoid surrogate against α."""
    lines = ["alpha_per_m,kernel,surrogate"]
    for a, k, s in zip(alpha, kernel, surrogate):
        lines.append(f"{_fmt(a)},{_fmt(k)},{_fmt(s)}")
    return "\n".join(lines) + "\n"


# Configuration
@dataclass(frozen=True)
class GridSpec:
    """Logarithmic frequency grid."""

    start_hz: float = 1.0
    stop_hz: float = 1e6
    points_per_decade: int = 40

    def __post_init__(self):
        """Validate."""
        if not (math.isfinite(self.start_hz) and self.start_hz > 0):
            raise ValidationError("start_hz", f"must be positive, got {self.start_hz!r}")
        if not (math.isfinite(self.stop_hz) and self.stop_hz > self.start_hz):
            raise ValidationError(
                "stop_hz", f"must exceed start_hz ({self.start_hz!r}), got {self.stop_hz!r}"
            )
        if self.points_per_decade < MIN_POINTS_PER_DECADE:
            raise ValidationError(
                "points_per_decade",
                f"must be at least {MIN_POINTS_PER_DECADE}, got {self.points_per_decade!r}",
            )

    def frequencies(self) -> np.ndarray:
        """The grid (Hz)."""
        return frequency_grid(self.start_hz, self.stop_hz, self.points_per_decade)


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs besides its input files."""

    geometry: CoilGeometry = field(default_factory=CoilGeometry)
    plate: Optional[PlateProperties] = field(default_factory=PlateProperties)
    grid: GridSpec = field(default_factory=GridSpec)
    reference_mode: Optional[ReferenceMode] = None
    """Plateau mode; chosen per data source when unset."""
    cutoff_hz: float = DEFAULT_CUTOFF_HZ
    noise_floor: Optional[float] = None
    """Noise floor (H); derived from the air sweep, or zero, when unset."""
    band_decades: float = DEFAULT_BAND_DECADES
    calibration: Optional[ReferenceCalibration] = None

    def feature_options(
        self,
        simulated: bool = True,
        air_noise_floor: Optional[float] = None,
    ) -> FeatureOptions:
        """Feature options for simulated data or for measured data with an air sweep.

        Simulated data default to the low-frequency plateau, measured data to the
        high-frequency one.
        """
        if self.reference_mode is not None:
            mode = self.reference_mode
        elif simulated:
            mode = ReferenceMode.LOW_FREQUENCY_PLATEAU
        else:
            mode = ReferenceMode.HIGH_FREQUENCY_PLATEAU
        if self.noise_floor is not None:
            noise_floor = self.noise_floor
        else:
            noise_floor = air_noise_floor or 0.0
        return FeatureOptions(
            reference_mode=mode,
            cutoff_hz=self.cutoff_hz,
            noise_floor=noise_floor,
            band_decades=self.band_decades,
        )


# Config keys to domain field names, per table.
GEOMETRY_KEYS = dict(
    r1_mm="r1", r2_mm="r2", l0_mm="l0", h_mm="h", g_mm="g", turns="n_turns",
)
PLATE_KEYS = dict(sigma_s_per_m="sigma", mu_r="mu_r")
GRID_KEYS = dict(
    start_hz="start_hz", stop_hz="stop_hz", points_per_decade="points_per_decade",
)
FEATURE_KEYS = dict(
    reference_mode="reference_mode",
    cutoff_hz="cutoff_hz",
    noise_floor_h="noise_floor",
    band_decades="band_decades",
)
CALIBRATION_KEYS = dict(
    delta_l_m_h="delta_L_m",
    reference_liftoff_mm="reference_liftoff",
    alpha0_per_m="alpha0",
    sigma_s_per_m="sigma",
    reference_mode="reference_mode",
)
TABLES = dict(
    geometry=GEOMETRY_KEYS,
    plate=PLATE_KEYS,
    grid=GRID_KEYS,
    features=FEATURE_KEYS,
    calibration=CALIBRATION_KEYS,
)


def _number(table: str, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{table}.{key}", f"must be a number, got {value!r}")
    return float(value)


def _integer(table: str, key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{table}.{key}", f"must be an integer, got {value!r}")
    return value


def _string(table: str, key: str, value: Any) -> str:
    if not isinstance(value, str):
        raise ValidationError(f"{table}.{key}", f"must be a string, got {value!r}")
    return value


def _nested(error: ValidationError, table: str, keys: dict[str, str]) -> ValidationError:
    """Re-home a domain validation error under its config key."""
    domain_to_key = {v: k for k, v in keys.items()}
    key = domain_to_key.get(error.field, error.field)
    return ValidationError(key, error.constraint).within(table)


def _check_keys(table: str, values: dict, keys: dict[str, str]):
    for key in values:
        if key not in keys:
            raise ValidationError(f"{table}.{key}", "unknown key")


def _mm(table: str, key: str, value: Any) -> float:
    return util.shift_decimal(_number(table, key, value), -3)


def _geometry_from_table(values: dict) -> CoilGeometry:
    _check_keys("geometry", values, GEOMETRY_KEYS)
    kwargs = {
        GEOMETRY_KEYS[k]: _integer("geometry", k, v) if k == "turns" else _mm("geometry", k, v)
        for k, v in values.items()
    }
    try:
        return CoilGeometry(**kwargs)
    except ValidationError as e:
        raise _nested(e, "geometry", GEOMETRY_KEYS) from None


def _plate_from_table(values: dict) -> PlateProperties:
    _check_keys("plate", values, PLATE_KEYS)
    kwargs = {PLATE_KEYS[k]: _number("plate", k, v) for k, v in values.items()}
    try:
        return PlateProperties(**kwargs)
    except ValidationError as e:
        raise _nested(e, "plate", PLATE_KEYS) from None


def _grid_from_table(values: dict) -> GridSpec:
    _check_keys("grid", values, GRID_KEYS)
    kwargs = {
        k: _integer("grid", k, v) if k == "points_per_decade" else _number("grid", k, v)
        for k, v in values.items()
    }
    try:
        return GridSpec(**kwargs)
    except ValidationError as e:
        raise e.within("grid") from None


def _reference_mode(table: str, value: Any) -> ReferenceMode:
    value = _string(table, "reference_mode", value)
    try:
        return ReferenceMode(value)
    except ValueError:
        modes = ", ".join(repr(m.value) for m in ReferenceMode)
        raise ValidationError(
            f"{table}.reference_mode", f"must be one of {modes}, got {value!r}"
        ) from None


def _features_from_table(values: dict) -> dict:
    _check_keys("features", values, FEATURE_KEYS)
    kwargs = {}
    for k, v in values.items():
        if k == "reference_mode":
            kwargs["reference_mode"] = _reference_mode("features", v)
        else:
            kwargs[FEATURE_KEYS[k]] = _number("features", k, v)
    probe = {k: v for k, v in kwargs.items() if v is not None}
    try:
        FeatureOptions(**probe)
    except ValidationError as e:
        raise _nested(e, "features", FEATURE_KEYS) from None
    return kwargs


def _calibration_from_table(values: dict, table: str = "calibration") -> ReferenceCalibration:
    _check_keys(table, values, CALIBRATION_KEYS)
    for key in ("delta_l_m_h", "reference_liftoff_mm", "alpha0_per_m", "sigma_s_per_m"):
        if key not in values:
            raise ValidationError(f"{table}.{key}", "is required")
    kwargs = {}
    for k, v in values.items():
        if k == "reference_mode":
            kwargs["reference_mode"] = _reference_mode(table, v)
        elif k == "reference_liftoff_mm":
            kwargs["reference_liftoff"] = _mm(table, k, v)
        else:
            kwargs[CALIBRATION_KEYS[k]] = _number(table, k, v)
    try:
        return ReferenceCalibration(**kwargs)
    except ValidationError as e:
        raise _nested(e, table, CALIBRATION_KEYS) from None


def calibration_document(cal: ReferenceCalibration) -> dict:
    """Calibration under the keys of the `[calibration]` table."""
    return dict(
        delta_l_m_h=cal.delta_L_m,
        reference_liftoff_mm=util.shift_decimal(cal.reference_liftoff, 3),
        alpha0_per_m=cal.alpha0,
        sigma_s_per_m=cal.sigma,
        reference_mode=cal.reference_mode.value,
    )


def default_config_tables() -> dict:
    """The packaged default tables."""
    return util.toml_load(DEFAULTS_FILE)


def parse_config(text: str) -> RunConfig:
    """Parse a TOML run configuration, filling gaps from the packaged defaults.

    Raises:
        ParseError: If *text* is not TOML.
        ValidationError: Naming the dotted field of any unknown key, wrong type or
            violated constraint.
    """
    try:
        document = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ParseError(f"invalid TOML: {e}") from None
    tables = default_config_tables()
    for name, values in document.items():
        if name not in TABLES:
            raise ValidationError(name, "unknown table")
        if not isinstance(values, dict):
            raise ValidationError(name, "must be a table")
        tables[name] = {**tables.get(name, {}), **values}
    features = _features_from_table(tables.get("features", {}))
    return RunConfig(
        geometry=_geometry_from_table(tables.get("geometry", {})),
        plate=_plate_from_table(tables["plate"]) if "plate" in tables else None,
        grid=_grid_from_table(tables.get("grid", {})),
        calibration=(
            _calibration_from_table(tables["calibration"])
            if "calibration" in tables else None
        ),
        **features,
    )


def load_config(file: Optional[pathlib.Path] = None) -> RunConfig:
    """Parse the config file at *file*, or the defaults when None."""
    if file is None:
        return parse_config("")
    return parse_config(util.file_load(file))


def write_config(config: RunConfig) -> str:
    """TOML document that `parse_config` turns back into *config*."""
    g = config.geometry
    document = dict(
        geometry=dict(
            r1_mm=util.shift_decimal(g.r1, 3),
            r2_mm=util.shift_decimal(g.r2, 3),
            l0_mm=util.shift_decimal(g.l0, 3),
            h_mm=util.shift_decimal(g.h, 3),
            g_mm=util.shift_decimal(g.g, 3),
            turns=g.n_turns,
        ),
    )
    if config.plate is not None:
        document["plate"] = dict(
            sigma_s_per_m=config.plate.sigma,
            mu_r=config.plate.mu_r,
        )
    document["grid"] = dict(
        start_hz=float(config.grid.start_hz),
        stop_hz=float(config.grid.stop_hz),
        points_per_decade=config.grid.points_per_decade,
    )
    features = dict(
        cutoff_hz=float(config.cutoff_hz),
        band_decades=float(config.band_decades),
    )
    if config.reference_mode is not None:
        features["reference_mode"] = ReferenceMode(config.reference_mode).value
    if config.noise_floor is not None:
        features["noise_floor_h"] = float(config.noise_floor)
    document["features"] = features
    if config.calibration is not None:
        document["calibration"] = calibration_document(config.calibration)
    return tomli_w.dumps(document)


# Calibration
def write_calibration(cal: ReferenceCalibration) -> str:
    """Calibration as a JSON document with the keys of the `[calibration]` table."""
    return json.dumps(calibration_document(cal), indent=4, sort_keys=True) + "\n"


def _json_load(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", line=e.lineno) from None


def parse_calibration(text: str) -> ReferenceCalibration:
    """Inverse of `write_calibration`.

    Raises:
        ParseError: If *text* is not a JSON object.
        ValidationError: On unknown, missing or invalid keys.
    """
    document = _json_load(text)
    if not isinstance(document, dict):
        raise ParseError("calibration must be a JSON object")
    return _calibration_from_table(document)


# Reports
@dataclass(frozen=True)
class Report:
    """Audit record of one compensation run."""

    inputs: dict
    """Echo of the inputs (paths, calibration, options)."""
    features: SpectralFeatures
    result: CompensationResult
    version: str = __version__
    timestamp: str = ""
    """ISO 8601 time of the run."""


def make_report(inputs: dict, features: SpectralFeatures, result: CompensationResult) -> Report:
    """Report stamped with the current time and package version."""
    return Report(
        inputs=inputs,
        features=features,
        result=result,
        version=__version__,
        timestamp=arrow.utcnow().isoformat(),
    )


def features_document(features: SpectralFeatures) -> dict:
    """Features as plain JSON types."""
    return dict(
        zero_crossing_hz=features.zero_crossing_hz,
        plateau_amplitude=features.plateau_amplitude,
        reference_mode=features.reference_mode.value,
        crossing_bracket=list(features.crossing_bracket),
    )


def write_report(report: Report) -> str:
    """Report as indented JSON with every intermediate of the compensation."""
    document = dict(
        version=report.version,
        timestamp=report.timestamp,
        inputs=report.inputs,
        features=features_document(report.features),
        result=asdict(report.result),
        derived=dict(
            absolute_liftoff=report.result.absolute_liftoff,
            zero_crossing_hz=report.result.zero_crossing_hz,
        ),
    )
    return json.dumps(document, indent=4, sort_keys=True) + "\n"


def parse_report(text: str) -> Report:
    """Inverse of `write_report`.

    Raises:
        ParseError: If *text* is not a report document.
    """
    document = _json_load(text)
    if not isinstance(document, dict):
        raise ParseError("report must be a JSON object")
    for key in ("version", "timestamp", "inputs", "features", "result"):
        if key not in document:
            raise ParseError(f"report is missing {key!r}")
    try:
        f = document["features"]
        features = SpectralFeatures(
            zero_crossing_hz=f["zero_crossing_hz"],
            plateau_amplitude=f["plateau_amplitude"],
            reference_mode=ReferenceMode(f["reference_mode"]),
            crossing_bracket=tuple(f["crossing_bracket"]),
        )
        result = CompensationResult(**document["result"])
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed report: {e!r}") from None
    return Report(
        inputs=document["inputs"],
        features=features,
        result=result,
        version=document["version"],
        timestamp=document["timestamp"],
    )
