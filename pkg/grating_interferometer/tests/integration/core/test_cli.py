import pytest
from typer.testing import CliRunner

from grating_interferometer.cli import ExitCode, app
from grating_interferometer.storage.csv_sink import read_table

pytestmark = pytest.mark.integration

runner = CliRunner()


@pytest.fixture
def config_path(tmp_path, fast_config_text):
    path = tmp_path / "run.yaml"
    path.write_text(fast_config_text(), encoding="utf-8")
    return path


def invoke(command, config, out, *extra):
    return runner.invoke(app, [command, "--config", str(config), "--out", str(out), *extra])


def test_validate_succeeds(config_path, tmp_path):
    result = invoke("validate", config_path, tmp_path / "out")
    assert result.exit_code == ExitCode.OK, result.output
    assert "grating3->detector" in result.output
    assert (tmp_path / "out" / "sampling_plan.csv").exists()


def test_validate_fails_on_coarse_grid(config_path, tmp_path):
    config_path.write_text(config_path.read_text() + "sampling:\n  dx: 50 nm\n", encoding="utf-8")
    result = invoke("validate", config_path, tmp_path / "out")
    assert result.exit_code == ExitCode.SAMPLING_ERROR


def test_quantum_command_fails_on_coarse_grid(tmp_path, fast_config_text):
    path = tmp_path / "run.yaml"
    path.write_text(fast_config_text("quantum") + "sampling:\n  dx: 50 nm\n", encoding="utf-8")
    result = invoke("pattern", path, tmp_path / "out")
    assert result.exit_code == ExitCode.SAMPLING_ERROR


@pytest.mark.parametrize(
    "text",
    ["", "# nothing here\n", "beam:\n  energy: 10\n", "geometry:\n  grating_pitch: 100 nm\n", "- 1\n- 2\n"],
    ids=["empty", "comments", "bare-number", "unknown-key", "not-a-mapping"],
)
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text, encoding="utf-8")
    result = invoke("validate", path, tmp_path / "out")
    assert result.exit_code == ExitCode.CONFIG_ERROR
    assert not (tmp_path / "out").exists()


def test_missing_config_file(tmp_path):
    result = invoke("validate", tmp_path / "missing.yaml", tmp_path / "out")
    assert result.exit_code == ExitCode.CONFIG_ERROR


def test_unwritable_output_directory(config_path, tmp_path):
    blocker = tmp_path / "not-a-directory"
    blocker.write_text("occupied", encoding="utf-8")
    result = invoke("validate", config_path, blocker)
    assert result.exit_code == ExitCode.IO_ERROR


def test_reruns_are_byte_identical(config_path, tmp_path):
    for name in ("first", "second"):
        result = invoke("scan", config_path, tmp_path / name)
        assert result.exit_code == ExitCode.OK, result.output
    tables = sorted(p.name for p in (tmp_path / "first").glob("*.csv"))
    assert tables
    for name in tables:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()
    assert (tmp_path / "first" / "scan_summary.run.json").exists()


def test_seed_override_is_recorded(config_path, tmp_path):
    result = invoke("moire", config_path, tmp_path / "out", "--seed", "11")
    assert result.exit_code == ExitCode.OK, result.output
    metadata, _ = read_table(tmp_path / "out" / "moire_map.csv")
    assert metadata["seed"] == "11"


def test_talbot_command(config_path, tmp_path):
    result = invoke("talbot", config_path, tmp_path / "out", "--loglevel", "WARNING")
    assert result.exit_code == ExitCode.OK, result.output
    assert (tmp_path / "out" / "talbot_carpet.csv").exists()
