import math

import pytest

from grating_interferometer.core.physics import (
    electron_speed,
    electrons_in_flight,
    mach_zehnder_criterion,
    talbot_length,
    wavelength_from_energy,
)
from grating_interferometer.errors import DomainError
from grating_interferometer.models.specs import GeometrySpec

pytestmark = pytest.mark.unit


def test_wavelength_at_10_kev():
    assert wavelength_from_energy(10e3) == pytest.approx(1.2205e-11, rel=1e-3)


def test_wavelength_is_relativistic():
    # the non-relativistic h / sqrt(2 m E) is about 0.5 % longer at 10 keV
    nonrelativistic = 6.62607015e-34 / math.sqrt(2 * 9.1093837e-31 * 10e3 * 1.602176634e-19)
    assert wavelength_from_energy(10e3) < nonrelativistic * 0.996


@pytest.mark.parametrize("energy", [0.0, -5.0, float("nan"), float("inf")])
def test_wavelength_rejects_non_positive_energy(energy):
    with pytest.raises(DomainError):
        wavelength_from_energy(energy)


def test_talbot_length_at_10_kev():
    length = talbot_length(100e-9, wavelength_from_energy(10e3))
    assert length == pytest.approx(0.82e-3, rel=0.01)
    assert 0.0254 / length == pytest.approx(31, abs=1)


def test_talbot_length_scales_inversely_with_wavelength():
    ratio = talbot_length(100e-9, wavelength_from_energy(2e3)) / talbot_length(
        100e-9, wavelength_from_energy(10e3)
    )
    assert ratio == pytest.approx(wavelength_from_energy(10e3) / wavelength_from_energy(2e3), rel=1e-12)


def test_talbot_length_rejects_zero_period():
    with pytest.raises(DomainError):
        talbot_length(0.0, 1e-11)


def test_mach_zehnder_criterion_default_geometry(default_geometry):
    report = mach_zehnder_criterion(default_geometry)
    assert report.order_separation_at_g2 == pytest.approx(3.1e-6, rel=0.02)
    assert 0.5 <= report.ratio <= 2.0


def test_electron_speed_below_light_speed():
    v = electron_speed(10e3)
    assert v == pytest.approx(5.85e7, rel=0.01)
    assert electron_speed(1e9) < 299792458.0


def test_single_electron_regime_at_200_per_second(default_geometry: GeometrySpec):
    in_flight = electrons_in_flight(200.0, default_geometry)
    assert in_flight == pytest.approx(200.0 * 0.5908 / electron_speed(10e3), rel=1e-9)
    assert in_flight < 1e-5


def test_electrons_in_flight_rejects_zero_rate(default_geometry):
    with pytest.raises(DomainError):
        electrons_in_flight(0.0, default_geometry)
