"""Command line interface.

Standard output carries data only. Errors go to standard error as
`error: <ErrorClass>: <message>` and set the exit status:

| Status | Errors |
| ------ | ------ |
| 0 | success |
| 2 | usage, `ValidationError`, missing or unreadable file |
| 3 | `ParseError`, `SchemaError`, `DuplicateFrequency` |
| 4 | `NoZeroCrossing` |
| 5 | `MultipleCrossings`, `InsufficientPlateau`, `GridMismatch`, `ModeMismatch` |
| 6 | `RatioOutOfDomain`, `NegativeLiftoff` |
| 7 | `NonConvergence`, `NonUnimodal`, `FitDiverged` |
| 8 | `ToleranceFailure` |

Log verbosity is set by the `EDDYPERM_LOG_LEVEL` environment variable (default
`WARNING`).
"""

from typing import Optional
from dataclasses import replace
from loguru import logger
import argparse
import json
import os
import pathlib
import sys
from . import __version__, util
from . import io
from .compensation import (
    Alpha0Source,
    build_calibration,
    calibrate_permeability_by_fit,
    run_compensation,
    run_ladder,
    sinusoid_bessel_check,
    sinusoid_curves,
)
from .errors import EddyPermError, ToleranceFailure, ValidationError
from .features import (
    FeatureOptions,
    ImpedanceSweep,
    ReferenceMode,
    extract_features,
    impedance_to_inductance,
    noise_floor_from_air,
)
from .forward_model import InductanceSpectrum, PlateProperties, simulate_spectrum


LOG_LEVEL_ENV = "EDDYPERM_LOG_LEVEL"
DEFAULT_LOG_LEVEL = "WARNING"
LADDER_MM = (0.8, 2.3, 2.8, 3.3, 3.8, 4.3, 4.8, 5.3)
USAGE_EXIT_CODE = 2


def main(argv: Optional[list[str]] = None) -> int:
    """Run the command line with *argv* and return the exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else USAGE_EXIT_CODE
    _configure_logging()
    try:
        return args.func(args)
    except EddyPermError as e:
        _error(e.name, str(e))
        return e.exit_code
    except OSError as e:
        _error(type(e).__name__, f"{e.filename}: {e.strerror}")
        return USAGE_EXIT_CODE
    except ValueError as e:
        _error(type(e).__name__, str(e))
        return USAGE_EXIT_CODE


def _error(name: str, message: str):
    print(f"error: {name}: {message}", file=sys.stderr)


def _configure_logging():
    level = os.environ.get(LOG_LEVEL_ENV, DEFAULT_LOG_LEVEL).upper()
    logger.remove()
    try:
        logger.add(sys.stderr, level=level)
    except ValueError:
        logger.add(sys.stderr, level=DEFAULT_LOG_LEVEL)
        logger.warning(f"Unknown log level {level!r} in {LOG_LEVEL_ENV}")


def _emit(text: str, output: Optional[pathlib.Path]):
    """Write *text* to *output*, or to standard output when None."""
    if output is None:
        sys.stdout.write(text)
    else:
        util.file_dump(output, text)
        logger.info(f"Wrote {output}")


# Argument parsing
def _liftoffs(value: str) -> list[float]:
    try:
        values = [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {value!r}")
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"lift-offs must be non-negative: {value!r}")
    return values


def _add_config_args(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=pathlib.Path, help="TOML run configuration")
    parser.add_argument("--mu-r", type=float, help="plate relative permeability")
    parser.add_argument("--sigma", type=float, help="plate conductivity (S/m)")


def _add_grid_args(parser: argparse.ArgumentParser):
    parser.add_argument("--start", type=float, help="first frequency (Hz)")
    parser.add_argument("--stop", type=float, help="last frequency (Hz)")
    parser.add_argument("--points-per-decade", type=int, help="grid density")


def _add_feature_args(parser: argparse.ArgumentParser, air: bool = True):
    if air:
        parser.add_argument(
            "--air", type=pathlib.Path,
            help="air reference impedance sweep; the input is then an impedance sweep",
        )
    parser.add_argument(
        "--reference-mode", choices=[m.value for m in ReferenceMode],
        help="plateau for the amplitude feature (default: low for spectra, high with --air)",
    )
    parser.add_argument("--cutoff-hz", type=float, help="ignore points above (Hz)")
    parser.add_argument("--noise-floor", type=float, help="ignore |dL| below (H)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eddyperm",
        description="Lift-off compensated permeability from eddy-current spectra.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("simulate", help="simulate inductance spectra")
    _add_config_args(p)
    _add_grid_args(p)
    p.add_argument("--liftoffs", type=_liftoffs, help="lift-offs in mm, comma separated")
    p.add_argument("--output", type=pathlib.Path, default=pathlib.Path("."),
                   help="output folder")
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser("features", help="extract spectral features")
    p.add_argument("spectrum", type=pathlib.Path)
    _add_config_args(p)
    _add_feature_args(p)
    p.add_argument("--plot", type=pathlib.Path, help="write plot data CSV")
    p.set_defaults(func=cmd_features)

    p = commands.add_parser("calibrate", help="measure a reference calibration")
    p.add_argument("spectrum", type=pathlib.Path)
    _add_config_args(p)
    _add_feature_args(p)
    p.add_argument("--reference-liftoff", type=float,
                   help="lift-off of the reference spectrum in mm (default: config l0)")
    p.add_argument("--known-mu-r", type=float,
                   help="known permeability of the reference plate")
    p.add_argument("--output", type=pathlib.Path, help="calibration JSON file")
    p.set_defaults(func=cmd_calibrate)

    p = commands.add_parser("compensate", help="compensated permeability and lift-off")
    p.add_argument("spectrum", type=pathlib.Path)
    p.add_argument("--calibration", type=pathlib.Path,
                   help="calibration JSON (default: [calibration] of the config)")
    _add_config_args(p)
    _add_feature_args(p)
    p.add_argument("--output", type=pathlib.Path, help="report JSON file")
    p.add_argument("--plot", type=pathlib.Path, help="write plot data CSV")
    p.set_defaults(func=cmd_compensate)

    p = commands.add_parser("fit", help="least-squares permeability fit")
    p.add_argument("spectrum", type=pathlib.Path)
    _add_config_args(p)
    _add_feature_args(p)
    p.set_defaults(func=cmd_fit)

    p = commands.add_parser("table2", help="permeability estimates over a lift-off ladder")
    _add_config_args(p)
    _add_grid_args(p)
    _add_feature_args(p, air=False)
    p.add_argument("--liftoffs", type=_liftoffs, default=list(LADDER_MM),
                   help="lift-offs in mm, comma separated")
    p.add_argument("--alpha0-source", choices=[s.value for s in Alpha0Source],
                   default=Alpha0Source.REFERENCE.value,
                   help="calibrate alpha0 from the reference crossing or the coil kernel")
    p.add_argument("--tolerance", type=float, default=0.03,
                   help="relative tolerance against the published estimates")
    p.add_argument("--error-bound", type=float, default=0.075,
                   help="bound on the compensated relative error")
    p.add_argument("--spread-ratio", type=float, default=0.15,
                   help="bound on compensated over uncompensated spread")
    p.add_argument("--output", type=pathlib.Path, help="table CSV file")
    p.set_defaults(func=cmd_table2)

    p = commands.add_parser("validate-approx", help="check the sinusoid approximation")
    p.add_argument("--config", type=pathlib.Path, help="TOML run configuration")
    p.add_argument("--max-discrepancy", type=float, default=0.05)
    p.add_argument("--curves", type=pathlib.Path, help="write the normalized curves CSV")
    p.set_defaults(func=cmd_validate_approx)
    return parser


# Shared loading
def _load_config(args: argparse.Namespace) -> io.RunConfig:
    config = io.load_config(args.config)
    plate = config.plate or PlateProperties()
    if getattr(args, "mu_r", None) is not None:
        plate = replace(plate, mu_r=args.mu_r)
    if getattr(args, "sigma", None) is not None:
        plate = replace(plate, sigma=args.sigma)
    grid = config.grid
    if getattr(args, "start", None) is not None:
        grid = replace(grid, start_hz=args.start)
    if getattr(args, "stop", None) is not None:
        grid = replace(grid, stop_hz=args.stop)
    if getattr(args, "points_per_decade", None) is not None:
        grid = replace(grid, points_per_decade=args.points_per_decade)
    overrides = {}
    if getattr(args, "reference_mode", None) is not None:
        overrides["reference_mode"] = ReferenceMode(args.reference_mode)
    if getattr(args, "cutoff_hz", None) is not None:
        overrides["cutoff_hz"] = args.cutoff_hz
    if getattr(args, "noise_floor", None) is not None:
        overrides["noise_floor"] = args.noise_floor
    return replace(config, plate=plate, grid=grid, **overrides)


def _load_spectrum(
    args: argparse.Namespace,
    config: io.RunConfig,
) -> tuple[InductanceSpectrum, FeatureOptions]:
    """The input spectrum and the feature options that fit its source."""
    data = io.parse_sweep_csv(util.file_load(args.spectrum))
    air_path = getattr(args, "air", None)
    if air_path is None:
        if isinstance(data, ImpedanceSweep):
            raise ValidationError("air", "an impedance sweep needs an air reference (--air)")
        return data, config.feature_options(simulated=True)
    air = io.parse_sweep_csv(util.file_load(air_path), is_air_reference=True)
    if not isinstance(data, ImpedanceSweep) or not isinstance(air, ImpedanceSweep):
        raise ValidationError("air", "--air needs impedance sweeps for both inputs")
    spectrum = impedance_to_inductance(data, air)
    floor = noise_floor_from_air(air, config.band_decades)
    return spectrum, config.feature_options(simulated=False, air_noise_floor=floor)


def _dump_json(document: dict) -> str:
    return json.dumps(document, indent=4, sort_keys=True) + "\n"


# Commands
def cmd_simulate(args: argparse.Namespace) -> int:
    """Write one spectrum CSV per lift-off into the output folder."""
    config = _load_config(args)
    liftoffs_mm = args.liftoffs or [util.shift_decimal(config.geometry.l0, 3)]
    grid = config.grid.frequencies()
    for liftoff_mm in liftoffs_mm:
        geom = config.geometry.with_liftoff(util.shift_decimal(liftoff_mm, -3))
        spectrum = simulate_spectrum(geom, config.plate, grid)
        path = args.output / f"spectrum_{liftoff_mm!r}mm.csv"
        util.file_dump(path, io.write_spectrum_csv(spectrum))
        print(path)
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    """Print the features of a spectrum as JSON."""
    config = _load_config(args)
    spectrum, options = _load_spectrum(args, config)
    if args.plot:
        util.file_dump(args.plot, io.write_plot_csv(spectrum, options))
    features = extract_features(spectrum, options)
    sys.stdout.write(_dump_json(io.features_document(features)))
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    """Write the calibration of a reference spectrum."""
    config = _load_config(args)
    spectrum, options = _load_spectrum(args, config)
    geom = config.geometry
    if args.reference_liftoff is not None:
        geom = geom.with_liftoff(util.shift_decimal(args.reference_liftoff, -3))
    cal = build_calibration(
        spectrum, geom, config.plate.sigma, options, mu_r=args.known_mu_r,
    )
    _emit(io.write_calibration(cal), args.output)
    return 0


def cmd_compensate(args: argparse.Namespace) -> int:
    """Write the compensation report of a spectrum."""
    config = _load_config(args)
    if args.calibration is not None:
        cal = io.parse_calibration(util.file_load(args.calibration))
    elif config.calibration is not None:
        cal = config.calibration
    else:
        raise ValidationError("calibration", "needs --calibration or a [calibration] table")
    spectrum, options = _load_spectrum(args, config)
    if config.reference_mode is None:
        options = replace(options, reference_mode=cal.reference_mode)
    if args.plot:
        util.file_dump(args.plot, io.write_plot_csv(spectrum, options))
    features = extract_features(spectrum, options)
    result = run_compensation(features, cal)
    inputs = dict(
        spectrum=str(args.spectrum),
        air=str(args.air) if args.air else None,
        calibration=io.calibration_document(cal),
        options=dict(
            reference_mode=options.reference_mode.value,
            cutoff_hz=options.cutoff_hz,
            noise_floor_h=options.noise_floor,
            band_decades=options.band_decades,
        ),
    )
    report = io.make_report(inputs, features, result)
    _emit(io.write_report(report), args.output)
    print(
        f"mu_r = {result.mu_r_est:.6g} (uncompensated {result.mu_r_uncompensated:.6g}),"
        f" f0 = {result.zero_crossing_hz:.6g} Hz,"
        f" extra lift-off = {result.liftoff_est * 1e3:.4g} mm",
        file=sys.stderr,
    )
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    """Print the least-squares permeability of a spectrum."""
    config = _load_config(args)
    spectrum, options = _load_spectrum(args, config)
    mu_r = calibrate_permeability_by_fit(spectrum, config.geometry, config.plate.sigma, options)
    sys.stdout.write(_dump_json(dict(mu_r=mu_r, sigma_s_per_m=config.plate.sigma)))
    return 0


def cmd_table2(args: argparse.Namespace) -> int:
    """Permeability estimates over a simulated lift-off ladder, checked against bounds.

    Rows are compared with the published estimates only for the published coil and plate.
    """
    config = _load_config(args)
    liftoffs = [util.shift_decimal(mm, -3) for mm in args.liftoffs]
    rows = run_ladder(
        config.geometry,
        config.plate,
        liftoffs,
        config.grid.frequencies(),
        config.feature_options(simulated=True),
        Alpha0Source(args.alpha0_source),
    )
    published = io.published_table_for(config.geometry, config.plate)
    _emit(io.write_ladder_csv(rows, published), args.output)
    failures = []
    for row in rows:
        liftoff_mm = util.shift_decimal(row.liftoff, 3)
        if row.compensated_error > args.error_bound:
            failures.append(
                f"{liftoff_mm:g} mm: compensated error {row.compensated_error:.2%}"
                f" exceeds {args.error_bound:.2%}"
            )
        expected = published.get(liftoff_mm)
        if expected is None:
            continue
        for label, ours, theirs in zip(
            ("uncompensated", "compensated"),
            (row.uncompensated_mu_r, row.compensated_mu_r),
            expected,
        ):
            deviation = abs(ours - theirs) / theirs
            if deviation > args.tolerance:
                failures.append(
                    f"{liftoff_mm:g} mm: {label} {ours:.6g} deviates {deviation:.2%}"
                    f" from published {theirs:.6g}"
                )
    if len(rows) > 1:
        compensated = [r.compensated_mu_r for r in rows]
        uncompensated = [r.uncompensated_mu_r for r in rows]
        spread = max(compensated) - min(compensated)
        reference_spread = max(uncompensated) - min(uncompensated)
        if spread > args.spread_ratio * reference_spread:
            failures.append(
                f"compensated spread {spread:.4g} exceeds {args.spread_ratio:g} x"
                f" uncompensated spread {reference_spread:.4g}"
            )
    for failure in failures:
        print(f"FAIL {failure}", file=sys.stderr)
    if failures:
        raise ToleranceFailure(f"{len(failures)} checks failed over {len(rows)} lift-offs")
    print(f"PASS {len(rows)} lift-offs", file=sys.stderr)
    return 0


def cmd_validate_approx(args: argparse.Namespace) -> int:
    """Print the area discrepancy of the sinusoid approximation."""
    config = io.load_config(args.config)
    discrepancy = sinusoid_bessel_check(config.geometry)
    if args.curves:
        util.file_dump(args.curves, io.write_curves_csv(*sinusoid_curves(config.geometry)))
    sys.stdout.write(_dump_json(dict(discrepancy=discrepancy)))
    if discrepancy > args.max_discrepancy:
        raise ToleranceFailure(
            f"discrepancy {discrepancy:.4f} exceeds {args.max_discrepancy:g}"
        )
    return 0
