import logging

import pytest

from grating_interferometer.config.settings import PACKAGE_ROOT_DIR, Settings, get_settings
from grating_interferometer.utils.logging_utils import setup_logging


@pytest.mark.unit
def test_defaults_point_at_packaged_files(monkeypatch):
    monkeypatch.delenv("INTERFEROMETER_WORKERS", raising=False)
    settings = Settings(_env_file=None)
    assert settings.DEFAULT_CONFIG_PATH == PACKAGE_ROOT_DIR / "config" / "default_run.yaml"
    assert settings.DEFAULT_CONFIG_PATH.exists()
    assert settings.LOGGING_CONFIG_PATH.exists()
    assert settings.WORKERS == 0


@pytest.mark.unit
def test_environment_prefix_is_read(monkeypatch):
    monkeypatch.setenv("INTERFEROMETER_WORKERS", "3")
    monkeypatch.setenv("INTERFEROMETER_LOG_LEVEL", "DEBUG")
    settings = Settings(_env_file=None)
    assert settings.WORKERS == 3
    assert settings.LOG_LEVEL == "DEBUG"


@pytest.mark.unit
def test_get_settings_is_cached():
    assert get_settings() is get_settings()


@pytest.mark.unit
def test_setup_logging_overrides_root_level():
    setup_logging("warning")
    assert logging.getLogger().level == logging.WARNING
    setup_logging("debug")
    assert logging.getLogger().level == logging.DEBUG


@pytest.mark.unit
def test_setup_logging_missing_file_falls_back(tmp_path):
    setup_logging("INFO", tmp_path / "absent.yaml")
    assert logging.getLogger().handlers
