import pytest

from grating_interferometer.config.run_config import DEFAULT_RUN_CONFIG, parse_run_config
from grating_interferometer.core.experiments import ExperimentRunner, energy_tag
from grating_interferometer.errors import SamplingViolation
from grating_interferometer.storage.csv_sink import read_config_echo, read_table

pytestmark = pytest.mark.integration


def test_energy_tag():
    assert energy_tag(10e3) == "10keV"
    assert energy_tag(2.5e3) == "2.5keV"


def test_output_directory_precedence(fast_config, test_settings, tmp_path):
    config = fast_config()
    assert ExperimentRunner(config, tmp_path / "cli", test_settings).out_dir == tmp_path / "cli"
    assert str(ExperimentRunner(config, None, test_settings).out_dir) == "ignored-by-tests"
    bare = config.with_overrides(output={"directory": None})
    assert ExperimentRunner(bare, None, test_settings).out_dir == tmp_path / "fallback"


def test_validate_writes_plan(fast_config, test_settings, tmp_path):
    result = ExperimentRunner(fast_config(), tmp_path, test_settings).validate()
    assert result.certified
    metadata, table = read_table(tmp_path / "sampling_plan.csv")
    assert len(table) == 4
    assert table["certified"].all()
    assert metadata["command"] == "validate"
    assert metadata["seed"] == "7"
    assert float(metadata["electrons_in_flight"]) < 1e-5
    assert (tmp_path / "sampling_plan.run.json").exists()


def test_validate_reports_forced_coarse_grid(fast_config, test_settings, tmp_path):
    config = fast_config().with_overrides(sampling={"dx": 50e-9})
    result = ExperimentRunner(config, tmp_path, test_settings).validate()
    assert not result.certified
    _, table = read_table(tmp_path / "sampling_plan.csv")
    assert not table["certified"].any()


def test_quantum_scan_refuses_coarse_grid(fast_config, test_settings, tmp_path):
    config = fast_config("quantum").with_overrides(sampling={"dx": 50e-9})
    with pytest.raises(SamplingViolation):
        ExperimentRunner(config, tmp_path, test_settings).scan()


def test_classical_scan_tables(fast_config, test_settings, tmp_path):
    config = fast_config()
    result = ExperimentRunner(config, tmp_path, test_settings).scan()
    names = sorted(p.name for p in result.paths)
    assert names == ["scan_classical_10keV.csv", "scan_summary.csv"]
    metadata, table = read_table(tmp_path / "scan_classical_10keV.csv")
    assert len(table) == 11
    assert metadata["engine"] == "classical"
    assert "as-built" in metadata["model"]
    assert read_config_echo(tmp_path / "scan_summary.csv") == config.to_yaml()
    _, summary = read_table(tmp_path / "scan_summary.csv")
    assert summary["engine"].tolist() == ["classical"]
    assert summary["port"].tolist() == [1]


def test_scan_with_noise_and_drift_is_seeded(fast_config, test_settings, tmp_path):
    config = fast_config().with_overrides(
        noise={"enabled": True, "rate": 1e4},
        drift={"enabled": True, "model": "gaussian"},
        scan={"detector_position": 0.0},
    )
    first = tmp_path / "first"
    second = tmp_path / "second"
    ExperimentRunner(config, first, test_settings).scan()
    ExperimentRunner(config, second, test_settings).scan()
    assert (first / "scan_classical_10keV.csv").read_bytes() == (second / "scan_classical_10keV.csv").read_bytes()
    _, table = read_table(first / "scan_classical_10keV.csv")
    assert (table["flux"] == table["flux"].round()).all()
    metadata, _ = read_table(first / "scan_summary.csv")
    assert float(metadata["drift_gaussian_factor"]) == pytest.approx(0.454, abs=1e-3)


def test_moire_command(fast_config, test_settings, tmp_path):
    result = ExperimentRunner(fast_config(), tmp_path, test_settings).moire()
    metadata, table = read_table(tmp_path / "moire_map.csv")
    assert len(table) == 5
    assert float(metadata["open_grating_flux"]) == pytest.approx(float(metadata["two_slit_acceptance"]), rel=0.1)
    assert (tmp_path / "moire_scan.csv").exists()
    assert len(result.summary) == 5
    assert table["bright"].astype(bool).any()
    assert float(metadata["min_relative_flux"]) == 0.5


def test_talbot_command(fast_config, test_settings, tmp_path):
    ExperimentRunner(fast_config(), tmp_path, test_settings).talbot()
    _, report = read_table(tmp_path / "talbot_report.csv")
    assert report["nearest_integer_multiple"].tolist() == [31]
    metadata, carpet = read_table(tmp_path / "talbot_carpet.csv")
    assert len(carpet) == 8 * 40 * 8
    assert float(metadata["last_slice_period_m"]) == pytest.approx(100e-9)


def test_pattern_command(fast_config, test_settings, tmp_path):
    config = fast_config("quantum").with_overrides(coherence={"n_source_points": 1})
    result = ExperimentRunner(config, tmp_path, test_settings).pattern()
    metadata, table = read_table(tmp_path / "pattern_10keV.csv")
    assert float(metadata["dx_m"]) == pytest.approx(5e-9)
    assert len(table) % 2 == 0
    assert float(metadata["port_1_m"]) == pytest.approx(36e-6, rel=0.1)
    assert float(metadata["port_2_m"]) == pytest.approx(-36e-6, rel=0.1)
    assert list(result.summary.columns) == ["energy_eV", "port_0_m", "port_1_m", "port_2_m"]


def test_contrast_map_both_engines(fast_config, test_settings, tmp_path):
    ExperimentRunner(fast_config("both"), tmp_path, test_settings).contrast_map()
    metadata, table = read_table(tmp_path / "contrast_map.csv")
    assert len(table) == 5
    assert table["contrast_quantum"].between(0, 1).all()
    assert table["contrast_classical"].between(0, 1).all()
    assert "zero_order_dip" in metadata
    bright = table["bright_classical"].astype(bool)
    assert bright[table["position_m"].abs() < 1e-9].all()
    assert float(metadata["max_contrast_classical"]) == pytest.approx(table.loc[bright, "contrast_classical"].max())
    assert float(metadata["classical_min_relative_flux"]) == 0.5


def test_png_output(fast_config, test_settings, tmp_path):
    config = fast_config().with_overrides(output={"formats": ("csv", "png")})
    result = ExperimentRunner(config, tmp_path, test_settings).moire()
    assert (tmp_path / "moire_scan.png") in result.paths


def test_default_file_parses():
    config = parse_run_config(DEFAULT_RUN_CONFIG.read_text(encoding="utf-8"))
    assert config.beam.sweep() == [6e3, 8e3, 10e3]
