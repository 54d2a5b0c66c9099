"""Classical engine: straight-line rays through the same beamline (Moire deflectometer).

Each ray is fixed by its crossing points with the source slit and the
collimator slit. Rays carry no wavelength; a grating transmits a ray when its
transverse position falls in an open bar.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from grating_interferometer.core.fringe_analysis import (
    MIN_RELATIVE_FLUX,
    best_bright_index,
    default_period_bounds,
    fit_fringes,
)
from grating_interferometer.errors import GeometryError
from grating_interferometer.models.results import FringeFit, FringeScan
from grating_interferometer.models.specs import (
    LEG_NAMES,
    ApertureSpec,
    GeometrySpec,
    RayBundleSpec,
)

logger = logging.getLogger(__name__)

MODEL_NOTE = "as-built: three gratings plus detector slit"


def _trapezoid_nodes(lo: float, hi: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes = np.linspace(lo, hi, n)
    weights = np.full(n, (hi - lo) / (n - 1))
    weights[[0, -1]] *= 0.5
    return nodes, weights


@dataclass(frozen=True)
class RayBundle:
    """Sampled rays: collimator crossing, slope, and quadrature weight."""

    x_collimator: np.ndarray
    slope: np.ndarray
    weight: np.ndarray
    monte_carlo: bool

    @property
    def n_rays(self) -> int:
        return int(self.weight.size)

    @classmethod
    def sample(cls, geometry: GeometrySpec, bundle: RayBundleSpec) -> "RayBundle":
        source_to_collimator = geometry.leg_lengths[0]
        if not source_to_collimator > 0:
            raise GeometryError("source and collimator planes coincide")
        s_lo, s_hi = geometry.source.bounds
        c_lo, c_hi = geometry.collimator.bounds
        if bundle.quadrature == "monte-carlo":
            rng = np.random.default_rng(bundle.seed)
            n = bundle.n_source_samples * bundle.n_collimator_samples
            xs = rng.uniform(s_lo, s_hi, n)
            xc = rng.uniform(c_lo, c_hi, n)
            weight = np.full(n, 1.0 / n)
        else:
            s_nodes, s_weights = _trapezoid_nodes(s_lo, s_hi, bundle.n_source_samples)
            c_nodes, c_weights = _trapezoid_nodes(c_lo, c_hi, bundle.n_collimator_samples)
            xs, xc = (a.ravel() for a in np.meshgrid(s_nodes, c_nodes, indexing="ij"))
            weight = np.outer(s_weights, c_weights).ravel()
            weight = weight / weight.sum()
        return cls(
            x_collimator=xc,
            slope=(xc - xs) / source_to_collimator,
            weight=weight,
            monte_carlo=bundle.quadrature == "monte-carlo",
        )

    def positions(self, distance_from_collimator: float) -> np.ndarray:
        return self.x_collimator + self.slope * distance_from_collimator


class MoireDeflectometer:
    """Ray acceptance through the gratings and detector slit of one geometry."""

    def __init__(self, geometry: GeometrySpec, bundle: Optional[RayBundleSpec] = None):
        for leg, length in zip(LEG_NAMES, geometry.leg_lengths):
            if not length > 0:
                raise GeometryError(f"leg {leg} has non-positive length {length}")
        self.geometry = geometry
        self.bundle_spec = bundle or RayBundleSpec()
        self.rays = RayBundle.sample(geometry, self.bundle_spec)
        self._z = [geometry.distance_from("collimator", p) for p in ("grating1", "grating2", "grating3")]
        self._z_detector = geometry.distance_from("collimator", "detector")
        self._x_detector = self.rays.positions(self._z_detector)
        self._fixed = (
            geometry.gratings[0].transmission(self.rays.positions(self._z[0]))
            * geometry.gratings[2].transmission(self.rays.positions(self._z[2]))
        )
        self._x_middle = self.rays.positions(self._z[1])

    def grating_acceptance(self, middle_shift: Optional[float] = None) -> np.ndarray:
        middle = self.geometry.gratings[1]
        if middle_shift is not None:
            middle = middle.with_offset(middle_shift)
        return self._fixed * middle.transmission(self._x_middle)

    def fluxes(self, acceptance: np.ndarray, slits: Sequence[ApertureSpec]) -> np.ndarray:
        weighted = self.rays.weight * acceptance
        return np.array([float(np.sum(weighted * slit.transmission(self._x_detector))) for slit in slits])

    def standard_error(self, flux: float) -> float:
        """Binomial standard error of a Monte Carlo flux estimate (0 for the grid)."""
        if not self.rays.monte_carlo:
            return 0.0
        return math.sqrt(max(flux * (1.0 - flux), 0.0) / self.rays.n_rays)

    def scan(self, shifts: Sequence[float], slits: Sequence[ApertureSpec]) -> List[FringeScan]:
        shifts = np.asarray(shifts, dtype=float)
        table = np.array([self.fluxes(self.grating_acceptance(float(s)), slits) for s in shifts]).T
        return [
            FringeScan(
                shifts=shifts.copy(),
                fluxes=table[i],
                metadata={
                    "engine": "classical",
                    "model": MODEL_NOTE,
                    "detector_center_m": slit.center,
                    "detector_width_m": slit.width,
                    "quadrature": self.bundle_spec.quadrature,
                    "n_rays": self.rays.n_rays,
                },
            )
            for i, slit in enumerate(slits)
        ]


def moire_flux(geometry: GeometrySpec, bundle: RayBundleSpec, detector_slit: ApertureSpec) -> float:
    """Fraction of collimated rays that pass all three gratings and the detector slit."""
    engine = MoireDeflectometer(geometry, bundle)
    return float(engine.fluxes(engine.grating_acceptance(), [detector_slit])[0])


def moire_scan(
    geometry: GeometrySpec,
    bundle: RayBundleSpec,
    shifts: Sequence[float],
    detector_slit: ApertureSpec,
) -> FringeScan:
    return MoireDeflectometer(geometry, bundle).scan(shifts, [detector_slit])[0]


def default_shifts(period: float, n_periods: float = 1.5, samples_per_period: int = 20) -> np.ndarray:
    """Shifts covering ``n_periods`` grating periods in steps of period / 20."""
    step = period / samples_per_period
    return np.arange(int(round(n_periods * samples_per_period)) + 1) * step


def moire_fits(
    geometry: GeometrySpec,
    bundle: RayBundleSpec,
    detector_positions: Sequence[float],
    shifts: Optional[Sequence[float]] = None,
    period_bounds: Optional[Tuple[float, float]] = None,
) -> List[Tuple[float, FringeFit]]:
    """Fitted fringes for a detector slit centred at each position."""
    period = geometry.grating_period
    shifts = default_shifts(period) if shifts is None else shifts
    bounds = period_bounds or default_period_bounds(period)
    slits = [geometry.detector_slit.with_offset(float(p)) for p in detector_positions]
    scans = MoireDeflectometer(geometry, bundle).scan(shifts, slits)
    return [(float(p), fit_fringes(scan, bounds)) for p, scan in zip(detector_positions, scans)]


def moire_contrast_map(
    geometry: GeometrySpec,
    bundle: RayBundleSpec,
    detector_positions: Sequence[float],
    shifts: Optional[Sequence[float]] = None,
    period_bounds: Optional[Tuple[float, float]] = None,
) -> List[Tuple[float, float]]:
    """Fitted Moire contrast for a detector slit centred at each position."""
    fits = moire_fits(geometry, bundle, detector_positions, shifts, period_bounds)
    return [(position, fit.contrast) for position, fit in fits]


def moire_max_contrast(
    fits: Sequence[Tuple[float, FringeFit]], min_relative_flux: float = MIN_RELATIVE_FLUX
) -> Tuple[float, Optional[float]]:
    """
    Largest fitted contrast over bright detector positions and where it occurs.

    Straight rays leave a hard penumbra at the beam edge. A slit there passes
    the few rays of a narrow phase-space corner and sees nearly full Moire
    modulation on almost no flux, so positions below ``min_relative_flux`` of
    the brightest one are excluded.
    """
    best = best_bright_index([fit for _, fit in fits], min_relative_flux)
    if best is None:
        return 0.0, None
    position, fit = fits[best]
    return fit.contrast, position


def converge_bundle(
    geometry: GeometrySpec,
    bundle: RayBundleSpec,
    detector_positions: Sequence[float],
    shifts: Optional[Sequence[float]] = None,
    *,
    tolerance: float = 1e-3,
    max_samples: int = 2001,
    min_relative_flux: float = MIN_RELATIVE_FLUX,
) -> Tuple[RayBundleSpec, List[Tuple[float, float]]]:
    """
    Refine the ray grid until the bright-position maximum contrast changes by < ``tolerance``.

    Returns:
        The converged bundle and its contrast map.
    """
    fits = moire_fits(geometry, bundle, detector_positions, shifts)
    current, _ = moire_max_contrast(fits, min_relative_flux)
    while bundle.doubled().n_source_samples <= max_samples:
        finer_bundle = bundle.doubled()
        finer_fits = moire_fits(geometry, finer_bundle, detector_positions, shifts)
        finer, _ = moire_max_contrast(finer_fits, min_relative_flux)
        change = abs(finer - current)
        logger.info(
            f"ray grid {bundle.n_source_samples} -> {finer_bundle.n_source_samples}: "
            f"max contrast change {change:.2e}"
        )
        bundle, fits, current = finer_bundle, finer_fits, finer
        if change < tolerance:
            return bundle, [(position, fit.contrast) for position, fit in fits]
    logger.warning(f"classical contrast not converged at {bundle.n_source_samples} samples per slit")
    return bundle, [(position, fit.contrast) for position, fit in fits]


def two_slit_acceptance(geometry: GeometrySpec, detector_slit: ApertureSpec) -> float:
    """
    Closed-form fraction of source-collimator rays landing in ``detector_slit``.

    The landing position ``(1 + r) x_c - r x_s`` with ``r = L_cd / L_sc`` is a
    sum of two uniform variables, whose distribution is trapezoidal.
    """
    l_sc = geometry.leg_lengths[0]
    if not l_sc > 0:
        raise GeometryError("source and collimator planes coincide")
    r = geometry.distance_from("collimator", "detector") / l_sc
    a = (1.0 + r) * geometry.collimator.width
    b = r * geometry.source.width
    mean = (1.0 + r) * geometry.collimator.center - r * geometry.source.center

    def ramp_sq(u: float) -> float:
        return 0.5 * max(u, 0.0) ** 2

    def cdf(t: float) -> float:
        return (
            ramp_sq(t + (a + b) / 2)
            - ramp_sq(t + (a - b) / 2)
            - ramp_sq(t - (a - b) / 2)
            + ramp_sq(t - (a + b) / 2)
        ) / (a * b)

    lo, hi = detector_slit.bounds
    return cdf(hi - mean) - cdf(lo - mean)
