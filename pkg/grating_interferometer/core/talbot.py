"""Near-field diagnostics: Talbot carpets and the regime report."""

import logging
from typing import Any, Dict, Optional

import numpy as np

from grating_interferometer.core.physics import mach_zehnder_criterion, talbot_length
from grating_interferometer.core.propagation import apply_mask, fresnel_propagate
from grating_interferometer.errors import DomainError
from grating_interferometer.models.results import TalbotCarpet, WaveField, centered_grid
from grating_interferometer.models.specs import GeometrySpec, GratingSpec

logger = logging.getLogger(__name__)

# Relative tolerance for calling a fitted period "d" or "d/2".
PERIOD_MATCH_TOL = 0.05


def talbot_carpet(
    grating: GratingSpec,
    wavelength: float,
    z_max: float,
    n_planes: int,
    *,
    samples_per_period: int = 40,
    n_periods: int = 16,
) -> TalbotCarpet:
    """
    Plane-wave intensity behind one grating at ``n_planes`` slices in (0, z_max].

    The grid spans a whole number of periods and the mask covers all of it, so
    the periodic spectral propagator models an infinite grating.

    Args:
        grating: Grating illuminated by a unit plane wave.
        wavelength: Wavelength in metres.
        z_max: Farthest slice in metres.
        n_planes: Number of equally spaced slices.
        samples_per_period: Grid points per period (rounded up to even).
        n_periods: Periods spanned by the grid.
    """
    if n_planes < 1:
        raise DomainError(f"n_planes must be >= 1, got {n_planes}")
    if not z_max > 0:
        raise DomainError(f"z_max must be positive, got {z_max}")
    samples_per_period += samples_per_period % 2
    dx = grating.period / samples_per_period
    n_samples = samples_per_period * n_periods
    unwindowed = grating.model_copy(update={"n_periods_window": n_periods + 2})
    x = centered_grid(n_samples, dx)
    field = apply_mask(
        WaveField(samples=np.ones(n_samples, dtype=complex), x_min=float(x[0]), dx=dx, wavelength=wavelength),
        unwindowed,
    )
    z = z_max * np.arange(1, n_planes + 1) / n_planes
    intensity = np.empty((n_planes, n_samples))
    for i, distance in enumerate(z):
        intensity[i] = fresnel_propagate(field, float(distance)).intensity()
    length = talbot_length(grating.period, wavelength)
    logger.info(
        f"Talbot carpet: {n_planes} planes to {z_max:.4g} m "
        f"({z_max / length:.2f} Talbot lengths of {length:.4g} m)"
    )
    return TalbotCarpet(z=z, x_min=float(x[0]), dx=dx, intensity=intensity, talbot_length=length)


def dominant_period(values: np.ndarray, dx: float) -> float:
    """Spatial period of the strongest non-DC Fourier component."""
    spectrum = np.abs(np.fft.rfft(values - np.mean(values)))
    k = int(np.argmax(spectrum[1:])) + 1
    return values.size * dx / k


def regime_report(geometry: GeometrySpec, fitted_period: Optional[float] = None) -> Dict[str, Any]:
    """
    Compare the grating spacing with the Talbot length and classify a fitted period.

    Near-field (Talbot-Lau) fringes repeat with the grating period d; the
    far-field three-grating interferometer and the classical Moire shadow
    repeat with d/2 under a middle-grating scan.
    """
    period = geometry.grating_period
    wavelength = geometry.beam.wavelength
    length = talbot_length(period, wavelength)
    spacing = geometry.leg_lengths[2]
    ratio = spacing / length
    nearest = int(round(ratio))
    mz = mach_zehnder_criterion(geometry)
    report: Dict[str, Any] = {
        "energy_eV": geometry.beam.kinetic_energy,
        "wavelength_m": wavelength,
        "grating_period_m": period,
        "talbot_length_m": length,
        "grating_spacing_m": spacing,
        "spacing_over_talbot": ratio,
        "nearest_integer_multiple": nearest,
        "integer_mismatch": ratio - nearest,
        "near_field_period_m": period,
        "far_field_period_m": period / 2.0,
        "mz_beam_width_at_g2_m": mz.beam_width_at_g2,
        "mz_order_separation_at_g2_m": mz.order_separation_at_g2,
        "mz_ratio": mz.ratio,
    }
    if fitted_period is not None:
        report["fitted_period_m"] = fitted_period
        if abs(fitted_period - period / 2.0) <= PERIOD_MATCH_TOL * period / 2.0:
            report["verdict"] = "period d/2: Mach-Zehnder or Moire, not Talbot-Lau"
        elif abs(fitted_period - period) <= PERIOD_MATCH_TOL * period:
            report["verdict"] = "period d: consistent with Talbot-Lau self-imaging"
        else:
            report["verdict"] = "period matches neither d nor d/2"
    return report
