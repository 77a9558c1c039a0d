import json
import math
import arrow
import numpy as np
import pytest
from eddyperm import io, util
from eddyperm.compensation import CompensationResult, LadderRow, ReferenceCalibration
from eddyperm.errors import (
    DuplicateFrequency,
    ParseError,
    SchemaError,
    ValidationError,
)
from eddyperm.features import (
    FeatureOptions,
    ImpedanceSweep,
    ReferenceMode,
    SpectralFeatures,
)
from eddyperm.forward_model import CoilGeometry, InductanceSpectrum, PlateProperties


HIGH = ReferenceMode.HIGH_FREQUENCY_PLATEAU
HEADER = "freq_hz,re_dL_H,im_dL_H\n"


def _calibration() -> ReferenceCalibration:
    return ReferenceCalibration(
        delta_L_m=6.0356e-4,
        reference_liftoff=0.8e-3,
        alpha0=49.52,
        sigma=6.624e6,
        reference_mode=HIGH,
    )


def _features() -> SpectralFeatures:
    return SpectralFeatures(
        zero_crossing_hz=4151.2,
        plateau_amplitude=3.1e-4,
        reference_mode=HIGH,
        crossing_bracket=(3981.07, 4216.97),
    )


def _result() -> CompensationResult:
    return CompensationResult(
        omega0=2 * math.pi * 4700.0,
        mu_r_est=110.5,
        liftoff_est=1.2e-3,
        amplitude_ratio=0.71,
        alpha0_used=49.52,
        omega1_measured=2 * math.pi * 4151.2,
        mu_r_uncompensated=97.6,
        alpha0_revised=48.1,
        reference_liftoff=0.8e-3,
    )


# Sweeps and spectra
def test_parse_spectrum_sorts_rows():
    spec = io.parse_sweep_csv(HEADER + "10,1,2\n1,3,4\n")
    assert isinstance(spec, InductanceSpectrum)
    assert spec.frequencies.tolist() == [1.0, 10.0]
    assert spec.values.tolist() == [3 + 4j, 1 + 2j]


def test_parse_impedance_sweep():
    text = "freq_hz,re_z_ohm,im_z_ohm\n1e3,0.5,0.25\n2e3,0.75,0.5\n"
    sweep = io.parse_sweep_csv(text, is_air_reference=True)
    assert isinstance(sweep, ImpedanceSweep)
    assert sweep.is_air_reference
    assert sweep.points == [(1e3, 0.5 + 0.25j), (2e3, 0.75 + 0.5j)]


def test_parse_reordered_columns_bom_and_blank_lines():
    text = "\ufeffim_dL_H, freq_hz ,re_dL_H\n\n2,10,1\n\n4,1,3\n"
    spec = io.parse_sweep_csv(text)
    assert spec.points == [(1.0, 3 + 4j), (10.0, 1 + 2j)]


def test_header_only_is_empty():
    assert len(io.parse_sweep_csv(HEADER)) == 0
    assert len(io.parse_sweep_csv("freq_hz,re_z_ohm,im_z_ohm\n")) == 0


@pytest.mark.parametrize("text, column", [
    ("freq_hz,re_dL_H\n1,2\n", "im_dL_H"),
    ("freq_hz,re_dL_H,im_dL_H,extra\n1,2,3,4\n", "extra"),
    ("freq_hz,re_dL_H,im_dL_H,re_dL_H\n1,2,3,4\n", "re_dL_H"),
    ("freq_hz,re_z_ohm,im_dL_H\n1,2,3\n", "im_z_ohm"),
])
def test_schema_errors(text, column):
    with pytest.raises(SchemaError) as info:
        io.parse_sweep_csv(text)
    assert info.value.column == column
    assert info.value.line == 1
    assert info.value.exit_code == 3


def test_missing_header():
    with pytest.raises(SchemaError):
        io.parse_sweep_csv("")


@pytest.mark.parametrize("row", [
    "1,2", "1,abc,3", "1,nan,3", "1,inf,3", "1,1e999,3", "0,1,2", "-5,1,2", "1,2,3,4",
    "1_000,1,0", "1,1_5,0", "0x10,1,2", "1,2j,3",
])
def test_malformed_rows(row):
    with pytest.raises(ParseError) as info:
        io.parse_sweep_csv(HEADER + "0.5,1,1\n" + row + "\n")
    assert info.value.line == 3


def test_number_notations():
    spec = io.parse_sweep_csv(HEADER + "+1.5E3,.5,-2e-7\n5.,0,3\n")
    np.testing.assert_array_equal(spec.frequencies, [5.0, 1500.0])
    assert spec.values[1] == complex(0.5, -2e-7)


def test_duplicate_frequency():
    with pytest.raises(DuplicateFrequency) as info:
        io.parse_sweep_csv(HEADER + "10,1,2\n1,3,4\n10,5,6\n")
    assert info.value.frequency == 10.0
    assert info.value.line == 4


def test_spectrum_csv_round_trip(reference_spectrum):
    text = io.write_spectrum_csv(reference_spectrum)
    assert len(text.splitlines()) == 242
    assert text == io.write_spectrum_csv(reference_spectrum)
    parsed = io.parse_sweep_csv(text)
    np.testing.assert_array_equal(parsed.frequencies, reference_spectrum.frequencies)
    np.testing.assert_array_equal(parsed.values, reference_spectrum.values)


def test_sweep_csv_layout():
    sweep = ImpedanceSweep(np.array([1e3]), np.array([0.1 + 0.2j]))
    assert io.write_sweep_csv(sweep).splitlines() == [
        "freq_hz,re_z_ohm,im_z_ohm",
        "1000,0.10000000000000001,0.20000000000000001",
    ]


def test_plot_csv_flags_ignored_points():
    spec = InductanceSpectrum(np.array([1.0, 10.0, 1e6]), np.array([1e-12, -1e-6, -1e-6]))
    lines = io.write_plot_csv(spec, FeatureOptions(noise_floor=1e-9)).splitlines()
    assert lines[0] == ",".join(io.PLOT_COLUMNS)
    assert [line.rsplit(",", 1)[1] for line in lines[1:]] == ["1", "0", "1"]


def test_curves_csv():
    text = io.write_curves_csv(np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([0.0, 0.5]))
    assert text.splitlines() == ["alpha_per_m,kernel,surrogate", "0,0,0", "1,1,0.5"]


def test_ladder_csv():
    rows = [
        LadderRow(2.3e-3, 125.2, 98.5, 104.1, _features(), _result()),
        LadderRow(1e-3, 125.2, 110.0, 115.0, _features(), _result()),
    ]
    lines = io.write_ladder_csv(rows, io.PUBLISHED_TABLE).splitlines()
    assert lines[0].split(",")[-2:] == ["published_uncompensated_mu_r", "published_compensated_mu_r"]
    first = lines[1].split(",")
    assert first[0] == "2.3"
    assert float(first[4]) == pytest.approx((125.2 - 98.5) / 125.2)
    assert [float(v) for v in first[-2:]] == list(io.PUBLISHED_TABLE[2.3])
    assert lines[2].endswith(",,")
    plain = io.write_ladder_csv(rows).splitlines()
    assert len(plain[0].split(",")) == 6


def test_published_table():
    assert sorted(io.PUBLISHED_TABLE) == [0.8, 2.3, 2.8, 3.3, 3.8, 4.3, 4.8, 5.3]
    uncompensated, compensated = io.PUBLISHED_TABLE[0.8]
    assert uncompensated == compensated
    for mm, (u, c) in io.PUBLISHED_TABLE.items():
        assert u <= c < 125.2


def test_published_table_only_for_published_setup():
    assert io.published_table_for(CoilGeometry(), PlateProperties()) is io.PUBLISHED_TABLE
    others = [
        (CoilGeometry(h=2e-3), PlateProperties()),
        (CoilGeometry(l0=2.3e-3), PlateProperties()),
        (CoilGeometry(n_turns=40), PlateProperties()),
        (CoilGeometry(), PlateProperties(sigma=5e6)),
        (CoilGeometry(), PlateProperties(mu_r=200.0)),
    ]
    for geometry, plate in others:
        assert io.published_table_for(geometry, plate) == {}


# Configuration
def test_defaults_match_domain_defaults():
    assert io.load_config() == io.RunConfig()
    assert io.parse_config("") == io.RunConfig()


def test_partial_config():
    config = io.parse_config("[geometry]\nl0_mm = 2.3\n\n[plate]\nmu_r = 80\n")
    assert config.geometry == CoilGeometry(l0=2.3e-3)
    assert config.plate == PlateProperties(mu_r=80.0)
    assert config.grid == io.GridSpec()


def test_config_file(tmp_path):
    path = tmp_path / "run.toml"
    util.file_dump(path, '[features]\nreference_mode = "high"\nnoise_floor_h = 1e-9\n')
    config = io.load_config(path)
    assert config.reference_mode is HIGH
    assert config.noise_floor == 1e-9


@pytest.mark.parametrize("text, field", [
    ("[geometry]\nr1_mm = 12.5\n", "geometry.r1_mm"),
    ("[geometry]\nturns = 2.5\n", "geometry.turns"),
    ("[geometry]\nh_mm = \"thick\"\n", "geometry.h_mm"),
    ("[geometry]\nradius_mm = 3\n", "geometry.radius_mm"),
    ("[plate]\nmu_r = 0.5\n", "plate.mu_r"),
    ("[plate]\nsigma_s_per_m = true\n", "plate.sigma_s_per_m"),
    ("[grid]\npoints_per_decade = 2\n", "grid.points_per_decade"),
    ("[grid]\nstart_hz = 10.0\nstop_hz = 5.0\n", "grid.stop_hz"),
    ("[features]\nreference_mode = \"mid\"\n", "features.reference_mode"),
    ("[features]\nnoise_floor_h = -1e-9\n", "features.noise_floor_h"),
    ("[calibration]\nalpha0_per_m = 50.0\n", "calibration.delta_l_m_h"),
    ("[bogus]\nx = 1\n", "bogus"),
    ("geometry = 3\n", "geometry"),
])
def test_invalid_config(text, field):
    with pytest.raises(ValidationError) as info:
        io.parse_config(text)
    assert info.value.field == field
    assert info.value.exit_code == 2


def test_config_not_toml():
    with pytest.raises(ParseError):
        io.parse_config("[geometry\nr1_mm = 1\n")


def test_config_round_trip():
    config = io.RunConfig(
        geometry=CoilGeometry(l0=2.3e-3, n_turns=35),
        plate=PlateProperties(sigma=1.45e6, mu_r=80.0),
        grid=io.GridSpec(start_hz=210.0, stop_hz=1e6, points_per_decade=20),
        reference_mode=HIGH,
        cutoff_hz=300e3,
        noise_floor=1e-9,
        band_decades=0.25,
        calibration=_calibration(),
    )
    assert io.parse_config(io.write_config(config)) == config


def test_grid_spec():
    assert len(io.GridSpec().frequencies()) == 241
    with pytest.raises(ValidationError):
        io.GridSpec(start_hz=0.0)


def test_feature_options_by_source():
    config = io.RunConfig()
    simulated = config.feature_options()
    assert simulated.reference_mode is ReferenceMode.LOW_FREQUENCY_PLATEAU
    assert simulated.noise_floor == 0.0
    measured = config.feature_options(simulated=False, air_noise_floor=2e-9)
    assert measured.reference_mode is HIGH
    assert measured.noise_floor == 2e-9
    fixed = io.RunConfig(reference_mode=ReferenceMode.LOW_FREQUENCY_PLATEAU, noise_floor=0.0)
    options = fixed.feature_options(simulated=False, air_noise_floor=2e-9)
    assert options.reference_mode is ReferenceMode.LOW_FREQUENCY_PLATEAU
    assert options.noise_floor == 0.0


# Calibration and reports
def test_calibration_round_trip():
    cal = _calibration()
    text = io.write_calibration(cal)
    assert json.loads(text)["reference_liftoff_mm"] == 0.8
    assert io.parse_calibration(text) == cal


def test_calibration_in_config():
    text = "[calibration]\n" + "".join(
        f"{k} = {json.dumps(v)}\n" for k, v in io.calibration_document(_calibration()).items()
    )
    assert io.parse_config(text).calibration == _calibration()


@pytest.mark.parametrize("text, error", [
    ("{", ParseError),
    ("[1, 2]", ParseError),
    ('{"delta_l_m_h": 1e-4}', ValidationError),
    (
        '{"delta_l_m_h": -1e-4, "reference_liftoff_mm": 0.8, "alpha0_per_m": 50,'
        ' "sigma_s_per_m": 6.6e6}',
        ValidationError,
    ),
])
def test_invalid_calibration(text, error):
    with pytest.raises(error):
        io.parse_calibration(text)


def test_report_round_trip():
    report = io.make_report(dict(spectrum="sample.csv", air=None), _features(), _result())
    assert report.version == "0.1.0"
    arrow.get(report.timestamp)
    text = io.write_report(report)
    document = json.loads(text)
    assert document["derived"]["absolute_liftoff"] == pytest.approx(2.0e-3)
    assert document["derived"]["zero_crossing_hz"] == pytest.approx(4700.0)
    assert document["features"]["reference_mode"] == "high"
    assert io.parse_report(text) == report


@pytest.mark.parametrize("text", ["[]", '{"version": "0.1.0"}', "not json"])
def test_invalid_report(text):
    with pytest.raises(ParseError):
        io.parse_report(text)


# Helpers
def test_shift_decimal():
    assert util.shift_decimal(11.4, -3) == 11.4e-3
    assert util.shift_decimal(11.4e-3, 3) == 11.4
    assert util.shift_decimal(0.0023, 3) == 2.3


def test_file_dump_creates_folders(tmp_path):
    path = tmp_path / "a" / "b" / "c.txt"
    util.file_dump(path, "x\n")
    util.file_dump(path, "y\n", clear=False)
    assert util.file_load(path) == "x\ny\n"
