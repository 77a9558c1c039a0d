import json
from loguru import logger
import pytest
from eddyperm import io, util
from eddyperm.cli import main


COARSE = ["--points-per-decade", "10"]


@pytest.fixture(autouse=True)
def _reset_logging():
    yield
    logger.remove()


def _simulate(tmp_path, *extra):
    return main(["simulate", "--output", str(tmp_path), *COARSE, *extra])


def test_simulate_writes_one_file_per_liftoff(tmp_path, capsys):
    liftoffs = "0.8,2.3,2.8,3.3,3.8,4.3,4.8,5.3"
    assert _simulate(tmp_path, "--liftoffs", liftoffs) == 0
    files = sorted(p.name for p in tmp_path.glob("spectrum_*mm.csv"))
    assert len(files) == 8
    assert "spectrum_0.8mm.csv" in files
    printed = capsys.readouterr().out.split()
    assert len(printed) == 8
    spectrum = io.parse_sweep_csv(util.file_load(tmp_path / "spectrum_5.3mm.csv"))
    assert len(spectrum) == 61


def test_simulate_default_grid(tmp_path):
    assert main(["simulate", "--output", str(tmp_path)]) == 0
    spectrum = io.parse_sweep_csv(util.file_load(tmp_path / "spectrum_0.8mm.csv"))
    assert len(spectrum) == 241


def test_missing_config(tmp_path, capsys):
    missing = tmp_path / "nowhere.toml"
    assert main(["simulate", "--config", str(missing), "--output", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error: FileNotFoundError")
    assert "nowhere.toml" in err


def test_invalid_config(tmp_path, capsys):
    config = tmp_path / "run.toml"
    util.file_dump(config, "[geometry]\nr1_mm = 13.0\n")
    assert main(["simulate", "--config", str(config), "--output", str(tmp_path)]) == 2
    assert "error: ValidationError: geometry.r1_mm" in capsys.readouterr().err


def test_features_of_simulated_spectrum(tmp_path, capsys):
    _simulate(tmp_path)
    capsys.readouterr()
    assert main(["features", str(tmp_path / "spectrum_0.8mm.csv")]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["reference_mode"] == "low"
    assert document["zero_crossing_hz"] == pytest.approx(5637, rel=2e-2)
    lo, hi = document["crossing_bracket"]
    assert lo < document["zero_crossing_hz"] < hi


def test_features_without_crossing(tmp_path, capsys):
    _simulate(tmp_path, "--mu-r", "1")
    capsys.readouterr()
    assert main(["features", str(tmp_path / "spectrum_0.8mm.csv")]) == 4
    assert capsys.readouterr().err.startswith("error: NoZeroCrossing:")


def test_features_of_measured_sweeps(fixtures_dir, tmp_path, capsys):
    plot = tmp_path / "plot.csv"
    code = main([
        "features", str(fixtures_dir / "measured_sample.csv"),
        "--air", str(fixtures_dir / "air_reference.csv"),
        "--plot", str(plot),
    ])
    assert code == 0
    document = json.loads(capsys.readouterr().out)
    assert document["reference_mode"] == "high"
    assert document["zero_crossing_hz"] == pytest.approx(4151, rel=1e-2)
    lines = util.file_load(plot).splitlines()
    assert lines[0] == "freq_hz,re_dL_H,im_dL_H,masked"
    assert len(lines) == 149
    assert lines[-1].endswith(",1")


def test_impedance_sweep_needs_air(fixtures_dir, capsys):
    assert main(["features", str(fixtures_dir / "measured_sample.csv")]) == 2
    assert "error: ValidationError: air" in capsys.readouterr().err


def test_malformed_spectrum(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    util.file_dump(path, "freq_hz,re_dL_H,im_dL_H\n1,2,3\n10,abc,3\n")
    assert main(["features", str(path)]) == 3
    assert "line 3" in capsys.readouterr().err


def test_calibrate_and_compensate(tmp_path, capsys):
    _simulate(tmp_path, "--liftoffs", "0.8,2.3")
    cal_path = tmp_path / "cal.json"
    report_path = tmp_path / "report.json"
    assert main([
        "calibrate", str(tmp_path / "spectrum_0.8mm.csv"),
        "--known-mu-r", "125.2", "--output", str(cal_path),
    ]) == 0
    cal = io.parse_calibration(util.file_load(cal_path))
    assert cal.reference_liftoff == 0.8e-3
    capsys.readouterr()
    assert main([
        "compensate", str(tmp_path / "spectrum_2.3mm.csv"),
        "--calibration", str(cal_path), "--output", str(report_path),
    ]) == 0
    assert "mu_r = " in capsys.readouterr().err
    report = io.parse_report(util.file_load(report_path))
    assert report.result.mu_r_est > report.result.mu_r_uncompensated
    assert report.result.absolute_liftoff > 0.8e-3
    assert report.inputs["spectrum"].endswith("spectrum_2.3mm.csv")
    assert report.inputs["calibration"] == io.calibration_document(cal)


def test_compensate_at_reference(tmp_path, capsys):
    _simulate(tmp_path)
    spectrum = str(tmp_path / "spectrum_0.8mm.csv")
    cal_path = tmp_path / "cal.json"
    main(["calibrate", spectrum, "--known-mu-r", "125.2", "--output", str(cal_path)])
    capsys.readouterr()
    assert main(["compensate", spectrum, "--calibration", str(cal_path)]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["result"]["mu_r_est"] == pytest.approx(125.2, rel=1e-9)
    assert document["result"]["liftoff_est"] == 0.0


def test_compensate_out_of_domain(tmp_path, capsys):
    _simulate(tmp_path)
    spectrum = str(tmp_path / "spectrum_0.8mm.csv")
    cal_path = tmp_path / "cal.json"
    main(["calibrate", spectrum, "--output", str(cal_path)])
    document = json.loads(util.file_load(cal_path))
    document["delta_l_m_h"] = 1.0
    util.file_dump(cal_path, json.dumps(document))
    capsys.readouterr()
    assert main(["compensate", spectrum, "--calibration", str(cal_path)]) == 6
    assert capsys.readouterr().err.startswith("error: RatioOutOfDomain:")


def test_compensate_needs_calibration(tmp_path, capsys):
    _simulate(tmp_path)
    assert main(["compensate", str(tmp_path / "spectrum_0.8mm.csv")]) == 2
    assert "error: ValidationError: calibration" in capsys.readouterr().err


def test_fit(tmp_path, capsys):
    _simulate(tmp_path, "--start", "10", "--stop", "1e5")
    capsys.readouterr()
    assert main(["fit", str(tmp_path / "spectrum_0.8mm.csv")]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["mu_r"] == pytest.approx(125.2, rel=1e-3)


def test_table2_reference_row(tmp_path, capsys):
    args = ["table2", "--liftoffs", "0.8", *COARSE]
    assert main(args) == 8
    captured = capsys.readouterr()
    assert "FAIL 0.8 mm: uncompensated 125.2" in captured.err
    lines = captured.out.splitlines()
    assert lines[0].startswith("liftoff_mm,actual_mu_r")
    assert lines[0].endswith("published_uncompensated_mu_r,published_compensated_mu_r")
    assert lines[1].startswith("0.8,125.2,")
    output = tmp_path / "ladder.csv"
    assert main([*args, "--tolerance", "0.05", "--output", str(output)]) == 0
    assert "PASS 1 lift-offs" in capsys.readouterr().err
    assert util.file_load(output).splitlines()[1].startswith("0.8,125.2,")


def test_table2_custom_plate_not_graded_against_published(tmp_path, capsys):
    config = tmp_path / "plate.toml"
    util.file_dump(config, "[plate]\nsigma_s_per_m = 5e6\n")
    assert main(["table2", "--liftoffs", "0.8", "--config", str(config), *COARSE]) == 0
    captured = capsys.readouterr()
    assert "published" not in captured.err
    assert captured.out.splitlines()[1].endswith(",,")


def test_table2_without_crossing(capsys):
    assert main(["table2", "--liftoffs", "0.8", "--mu-r", "1", *COARSE]) == 4
    assert "NoZeroCrossing" in capsys.readouterr().err


def test_validate_approx(tmp_path, capsys):
    assert main(["validate-approx"]) == 8
    captured = capsys.readouterr()
    discrepancy = json.loads(captured.out)["discrepancy"]
    assert 0.30 <= discrepancy <= 0.36
    assert "error: ToleranceFailure" in captured.err
    curves = tmp_path / "curves.csv"
    assert main(["validate-approx", "--max-discrepancy", "0.5", "--curves", str(curves)]) == 0
    lines = util.file_load(curves).splitlines()
    assert lines[0] == "alpha_per_m,kernel,surrogate"
    assert len(lines) == 4002


def test_validate_approx_scale_invariant(tmp_path, capsys):
    main(["validate-approx", "--max-discrepancy", "1"])
    base = json.loads(capsys.readouterr().out)["discrepancy"]
    config = tmp_path / "double.toml"
    util.file_dump(
        config,
        "[geometry]\nr1_mm = 22.8\nr2_mm = 24.0\nl0_mm = 1.6\nh_mm = 3.0\ng_mm = 2.0\n",
    )
    assert main(["validate-approx", "--max-discrepancy", "1", "--config", str(config)]) == 0
    doubled = json.loads(capsys.readouterr().out)["discrepancy"]
    assert doubled == pytest.approx(base, rel=1e-4)


@pytest.mark.parametrize("argv", [[], ["bogus"], ["features"], ["simulate", "--liftoffs", "x"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "eddyperm 0.1.0" in capsys.readouterr().out


def test_log_level(tmp_path, capsys, monkeypatch):
    _simulate(tmp_path)
    capsys.readouterr()
    monkeypatch.setenv("EDDYPERM_LOG_LEVEL", "debug")
    assert main(["features", str(tmp_path / "spectrum_0.8mm.csv")]) == 0
    assert "Zero crossing at" in capsys.readouterr().err
    monkeypatch.setenv("EDDYPERM_LOG_LEVEL", "error")
    assert main(["features", str(tmp_path / "spectrum_0.8mm.csv")]) == 0
    assert "Zero crossing at" not in capsys.readouterr().err
