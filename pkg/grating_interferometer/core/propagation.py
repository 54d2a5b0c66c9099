"""Paraxial Fresnel propagation of sampled scalar waves.

The spectral propagator multiplies the FFT of the field by the transfer
function ``exp(-i pi lambda L f^2)``; the global phase ``exp(i k L)`` is
dropped. The direct propagator evaluates the same kernel
``(i lambda L)^(-1/2) exp(i pi (x' - x)^2 / (lambda L))`` by quadrature and
serves as its reference.
"""

import logging
import math
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy import fft as sp_fft

from grating_interferometer.core.sampling import SamplingPlan, even_fast_length
from grating_interferometer.errors import DomainError, SamplingViolation
from grating_interferometer.models.results import WaveField
from grating_interferometer.models.specs import ApertureSpec, GratingSpec

logger = logging.getLogger(__name__)

DIRECT_CHUNK = 512


@lru_cache(maxsize=64)
def transfer_function(n_samples: int, dx: float, wavelength: float, distance: float) -> np.ndarray:
    """Fresnel transfer function on the FFT frequency grid (read-only array)."""
    freqs = sp_fft.fftfreq(n_samples, d=dx)
    kernel = np.exp(-1j * np.pi * wavelength * distance * freqs**2)
    kernel.flags.writeable = False
    return kernel


@lru_cache(maxsize=16)
def cosine_taper(n_samples: int, fraction: float) -> np.ndarray:
    """Window equal to 1 except for raised-cosine ramps over ``fraction`` of each edge."""
    window = np.ones(n_samples)
    ramp_len = int(round(fraction * n_samples))
    if ramp_len > 0:
        ramp = 0.5 * (1.0 - np.cos(np.pi * (np.arange(ramp_len) + 0.5) / ramp_len))
        window[:ramp_len] = ramp
        window[-ramp_len:] = ramp[::-1]
    window.flags.writeable = False
    return window


def guard_samples(field: WaveField, distance: float) -> int:
    """Samples the steepest representable ray moves sideways over ``distance``."""
    max_angle = field.wavelength / (2.0 * field.dx)
    return int(math.ceil(max_angle * distance / field.dx)) + 1


def _spectral(samples: np.ndarray, dx: float, wavelength: float, distance: float) -> np.ndarray:
    kernel = transfer_function(samples.size, dx, wavelength, distance)
    return sp_fft.ifft(sp_fft.fft(samples) * kernel)


def fresnel_propagate(
    field: WaveField,
    distance: float,
    plan: Optional[SamplingPlan] = None,
    leg: Optional[str] = None,
    *,
    guard: bool = False,
) -> WaveField:
    """
    Propagate a field by ``distance`` with the spectral Fresnel method.

    Args:
        field: Field at the upstream plane.
        distance: Propagation distance in metres.
        plan: When given, the leg must be certified by this plan.
        leg: Name of the leg being propagated (required with ``plan``).
        guard: Pad the field with zeros wide enough that nothing wraps around
            the periodic grid, then crop back. Energy leaving the window is lost.

    Returns:
        Field at the downstream plane on the same grid.

    Raises:
        DomainError: If ``distance`` is not positive.
        SamplingViolation: If ``plan`` does not certify ``leg``.
    """
    if not distance > 0:
        raise DomainError(f"propagation distance must be positive, got {distance}")
    if plan is not None:
        if leg is None:
            raise ValueError("a leg name is required when a sampling plan is given")
        plan.require(leg)
        if not math.isclose(field.dx, plan.dx, rel_tol=1e-12):
            raise SamplingViolation(leg, f"field dx={field.dx} differs from plan dx={plan.dx}")

    if not guard:
        return field.with_samples(_spectral(field.samples, field.dx, field.wavelength, distance))

    n = field.n_samples
    padded_n = even_fast_length(n + 2 * guard_samples(field, distance))
    offset = (padded_n - n) // 2
    padded = np.zeros(padded_n, dtype=complex)
    padded[offset : offset + n] = field.samples
    out = _spectral(padded, field.dx, field.wavelength, distance)
    return field.with_samples(out[offset : offset + n].copy())


def fresnel_propagate_direct(
    field: WaveField, distance: float, chunk_size: int = DIRECT_CHUNK
) -> WaveField:
    """
    Propagate by direct O(N^2) quadrature of the Fresnel kernel.

    Intended as a reference for grids up to a few thousand samples; rows of
    the kernel matrix are built ``chunk_size`` at a time.
    """
    if not distance > 0:
        raise DomainError(f"propagation distance must be positive, got {distance}")
    x = field.x
    scale = np.pi / (field.wavelength * distance)
    prefactor = field.dx / np.sqrt(1j * field.wavelength * distance)
    out = np.empty(field.n_samples, dtype=complex)
    for start in range(0, field.n_samples, chunk_size):
        stop = min(start + chunk_size, field.n_samples)
        separation = x[start:stop, None] - x[None, :]
        out[start:stop] = prefactor * (np.exp(1j * scale * separation**2) @ field.samples)
    return field.with_samples(out)


def apply_mask(field: WaveField, element: Union[GratingSpec, ApertureSpec]) -> WaveField:
    """Multiply the field by the binary transmission of a grating or slit."""
    return field.with_samples(field.samples * element.transmission(field.x))


def apodize(field: WaveField, fraction: float) -> WaveField:
    """Apply the cosine edge taper used as an absorbing boundary."""
    if fraction <= 0:
        return field
    return field.with_samples(field.samples * cosine_taper(field.n_samples, fraction))
