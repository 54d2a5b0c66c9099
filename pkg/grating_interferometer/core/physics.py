"""Relativistic electron optics formulas shared by both engines."""

import logging
import math
from functools import lru_cache
from typing import TYPE_CHECKING

from scipy import constants

from grating_interferometer.errors import DomainError, GeometryError
from grating_interferometer.models.results import MachZehnderReport

if TYPE_CHECKING:
    from grating_interferometer.models.specs import GeometrySpec

logger = logging.getLogger(__name__)

ELECTRON_REST_ENERGY_J = constants.m_e * constants.c**2
ELECTRON_REST_ENERGY_EV = ELECTRON_REST_ENERGY_J / constants.e


def _require_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


@lru_cache(maxsize=512)
def wavelength_from_energy(kinetic_energy: float) -> float:
    """
    Relativistic de Broglie wavelength of an electron.

    Args:
        kinetic_energy: Kinetic energy in electron-volts.

    Returns:
        Wavelength in metres, ``h c / sqrt(E (E + 2 m c^2))``.

    Raises:
        DomainError: If the energy is not positive.
    """
    _require_positive("kinetic_energy", kinetic_energy)
    energy = kinetic_energy * constants.e
    momentum_c = math.sqrt(energy * (energy + 2.0 * ELECTRON_REST_ENERGY_J))
    return constants.h * constants.c / momentum_c


def talbot_length(grating_period: float, wavelength: float) -> float:
    """Return the Talbot length d**2 / wavelength."""
    _require_positive("grating_period", grating_period)
    _require_positive("wavelength", wavelength)
    return grating_period * (grating_period / wavelength)


def order_separation(wavelength: float, period: float, distance: float) -> float:
    """Transverse separation of adjacent diffraction orders after ``distance``."""
    return (wavelength / period) * distance


def diffraction_limited_width(width: float, wavelength: float, distance: float) -> float:
    """Slit image width grown by single-slit diffraction: w + 2 lambda L / w."""
    return width + 2.0 * wavelength * distance / width


def footprint_half_width(
    distance_from_collimator: float,
    distance_from_grating1: float,
    *,
    source_to_collimator: float,
    source_width: float,
    collimator_width: float,
    wavelength: float,
    period: float,
    orders: int,
) -> float:
    """
    Half-width of the region a beam can occupy at a downstream plane.

    Sums the geometric shadow of the two collimation slits, the diffraction
    spread of the collimator, and the deflection of ``orders`` grating orders
    accumulated after the first grating.
    """
    geometric = collimator_width / 2.0 + distance_from_collimator * (
        (source_width + collimator_width) / (2.0 * source_to_collimator)
    )
    diffraction = wavelength * distance_from_collimator / collimator_width
    deflection = orders * order_separation(wavelength, period, max(distance_from_grating1, 0.0))
    return geometric + diffraction + deflection


def electron_speed(kinetic_energy: float) -> float:
    """Electron speed in m/s for a kinetic energy in electron-volts."""
    _require_positive("kinetic_energy", kinetic_energy)
    gamma = 1.0 + kinetic_energy / ELECTRON_REST_ENERGY_EV
    return constants.c * math.sqrt(1.0 - 1.0 / gamma**2)


def electrons_in_flight(count_rate: float, geometry: "GeometrySpec") -> float:
    """
    Mean number of electrons between source slit and detector.

    Args:
        count_rate: Detected electrons per second.
        geometry: Beamline whose total length sets the transit time.

    Returns:
        ``count_rate * transit_time``; values far below one mean single-electron
        operation.
    """
    _require_positive("count_rate", count_rate)
    transit = sum(geometry.leg_lengths) / electron_speed(geometry.beam.kinetic_energy)
    return count_rate * transit


def mach_zehnder_criterion(geometry: "GeometrySpec") -> MachZehnderReport:
    """
    Compare beam width with order separation at the second grating.

    A ratio near one marks the far-field (Mach-Zehnder) regime where the
    first-grating orders are separated by about their own width.
    """
    grating = geometry.gratings[0]
    period = getattr(grating, "period", None)
    if period is None:
        raise GeometryError("first grating element has no period")
    wavelength = geometry.beam.wavelength
    legs = geometry.leg_lengths
    separation = order_separation(wavelength, period, legs[2])
    width = diffraction_limited_width(geometry.collimator.width, wavelength, legs[1] + legs[2])
    report = MachZehnderReport(
        beam_width_at_g2=width,
        order_separation_at_g2=separation,
        ratio=separation / width,
    )
    logger.debug(
        f"Mach-Zehnder criterion: width={width:.4g} m, separation={separation:.4g} m, "
        f"ratio={report.ratio:.3f}"
    )
    return report
