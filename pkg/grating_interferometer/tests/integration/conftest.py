"""Small, fast run configurations for end-to-end tests."""

from pathlib import Path
from typing import Callable

import pytest

from grating_interferometer.config.run_config import RunConfig, parse_run_config
from grating_interferometer.config.settings import Settings

FAST_RUN = """\
beam:
  energy: 10 keV
engine:
  kind: {kind}
coherence:
  n_source_points: 2
classical:
  n_source_samples: 41
  n_collimator_samples: 41
scan:
  shift_start: 0 nm
  shift_stop: 100 nm
  shift_step: 10 nm
  positions_start: -4 um
  positions_stop: 4 um
  positions_step: 2 um
talbot:
  n_planes: 8
output:
  directory: ignored-by-tests
  formats: [csv]
runtime:
  seed: 7
"""


@pytest.fixture
def fast_config_text() -> Callable[..., str]:
    def _text(kind: str = "classical") -> str:
        return FAST_RUN.format(kind=kind)

    return _text


@pytest.fixture
def fast_config(fast_config_text) -> Callable[..., RunConfig]:
    def _config(kind: str = "classical") -> RunConfig:
        return parse_run_config(fast_config_text(kind), "fast.yaml")

    return _config


@pytest.fixture
def test_settings(tmp_path: Path) -> Settings:
    return Settings(OUTPUT_DIR=tmp_path / "fallback", WORKERS=0)
