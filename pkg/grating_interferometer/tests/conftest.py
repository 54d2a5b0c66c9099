"""Shared fixtures for the interferometer test-suite."""

import textwrap
from pathlib import Path
from typing import Callable

import pytest

from grating_interferometer.models.specs import CoherenceSpec, GeometrySpec, RayBundleSpec

PERIOD = 100e-9


@pytest.fixture(scope="session")
def default_geometry() -> GeometrySpec:
    """The 10 keV apparatus with 100 nm gratings and a centred 5 um detector slit."""
    return GeometrySpec.from_distances()


@pytest.fixture(scope="session")
def symmetric_geometry() -> GeometrySpec:
    """Default apparatus with every grating's open bar centred on x = 0 (mirror symmetric)."""
    return GeometrySpec.from_distances(lateral_shifts=(-PERIOD / 4, -PERIOD / 4, -PERIOD / 4))


@pytest.fixture
def fast_coherence() -> CoherenceSpec:
    return CoherenceSpec(n_source_points=4)


@pytest.fixture
def coarse_bundle() -> RayBundleSpec:
    return RayBundleSpec(n_source_samples=101, n_collimator_samples=101)


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[str], Path]:
    """Write dedented YAML text to a config file and return its path."""

    def _write(text: str, name: str = "run.yaml") -> Path:
        path = tmp_path / name
        path.write_text(textwrap.dedent(text), encoding="utf-8")
        return path

    return _write
