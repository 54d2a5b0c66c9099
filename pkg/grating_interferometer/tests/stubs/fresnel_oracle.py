"""Closed-form Fresnel diffraction used as oracles for the propagators."""

import numpy as np
from scipy import special


def _fresnel_difference(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    s1, c1 = special.fresnel(t1)
    s2, c2 = special.fresnel(t2)
    return (c2 - c1) + 1j * (s2 - s1)


def plane_wave_slit(x: np.ndarray, width: float, wavelength: float, distance: float) -> np.ndarray:
    """Field behind a slit ``|x'| < width / 2`` lit by a unit plane wave."""
    scale = np.sqrt(2.0 / (wavelength * distance))
    t1 = scale * (-width / 2.0 - x)
    t2 = scale * (width / 2.0 - x)
    return _fresnel_difference(t1, t2) / np.sqrt(2j)


def point_source_slit(
    x: np.ndarray,
    source_x: float,
    source_distance: float,
    width: float,
    wavelength: float,
    distance: float,
) -> np.ndarray:
    """
    Field behind a slit lit by ``exp(i pi (x' - x_s)^2 / (lambda L0)) / sqrt(L0)``.
    """
    alpha = 1.0 / source_distance + 1.0 / distance
    centre = (source_x / source_distance + x / distance) / alpha
    scale = np.sqrt(2.0 * alpha / wavelength)
    t1 = scale * (-width / 2.0 - centre)
    t2 = scale * (width / 2.0 - centre)
    phase = np.exp(1j * np.pi * (x - source_x) ** 2 / (wavelength * (source_distance + distance)))
    amplitude = np.sqrt(wavelength / (2.0 * alpha)) / (
        np.sqrt(1j * wavelength * distance) * np.sqrt(source_distance)
    )
    return amplitude * phase * _fresnel_difference(t1, t2)
