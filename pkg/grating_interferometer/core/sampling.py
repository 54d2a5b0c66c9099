"""Grid selection and Nyquist certification for the Fresnel legs."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sp_fft

from grating_interferometer.errors import DomainError, SamplingViolation
from grating_interferometer.models.results import WaveField, centered_grid
from grating_interferometer.models.specs import LEG_NAMES, PLANE_NAMES, GeometrySpec, GratingSpec

logger = logging.getLogger(__name__)

DEFAULT_DX = 5e-9
MIN_SAMPLES_PER_PERIOD = 20
DEFAULT_DETECTOR_HALF_WIDTH = 120e-6
DEFAULT_TAPER_FRACTION = 0.05

# The source->collimator leg is launched analytically, never propagated on the grid.
PROPAGATED_LEGS = LEG_NAMES[1:]


def even_fast_length(n: int) -> int:
    """Smallest even FFT-friendly length >= n."""
    m = sp_fft.next_fast_len(max(int(n), 2))
    while m % 2:
        m = sp_fft.next_fast_len(m + 1)
    return m


def nyquist_dx_limit(wavelength: float, distance: float, window_width: float) -> float:
    """Largest dx that resolves the kernel chirp across ``window_width``: lambda L / (2 X)."""
    return wavelength * distance / (2.0 * window_width)


@dataclass(frozen=True)
class LegCertificate:
    name: str
    length: float
    window_half_width: float
    dx_limit: float
    dx: float

    @property
    def certified(self) -> bool:
        return self.dx <= self.dx_limit

    @property
    def margin(self) -> float:
        return self.dx_limit / self.dx


@dataclass(frozen=True)
class SamplingPlan:
    """
    Fixed transverse grid shared by every plane, with per-leg certificates.

    Attributes:
        dx: Grid spacing in metres.
        n_samples: Number of grid points (always even).
        wavelengths: Wavelengths the certificates were evaluated for.
        window_half_width: Region-of-interest half-width per plane name.
        legs: One certificate per propagated leg, worst case over wavelengths.
        samples_per_period: Grid points per grating period.
        taper_fraction: Fraction of the window at each edge that is apodised.
    """

    dx: float
    n_samples: int
    wavelengths: Tuple[float, ...]
    window_half_width: Mapping[str, float]
    legs: Tuple[LegCertificate, ...]
    samples_per_period: float
    taper_fraction: float = DEFAULT_TAPER_FRACTION

    @property
    def x(self) -> np.ndarray:
        return centered_grid(self.n_samples, self.dx)

    @property
    def x_min(self) -> float:
        return float(self.x[0])

    @property
    def half_width(self) -> float:
        return self.n_samples * self.dx / 2.0

    @property
    def resolves_gratings(self) -> bool:
        return self.samples_per_period >= MIN_SAMPLES_PER_PERIOD - 1e-9

    @property
    def certified(self) -> bool:
        return self.resolves_gratings and all(leg.certified for leg in self.legs)

    def leg(self, name: str) -> LegCertificate:
        for leg in self.legs:
            if leg.name == name:
                return leg
        raise KeyError(f"no leg named {name!r}; known legs: {[leg.name for leg in self.legs]}")

    def require(self, name: str) -> LegCertificate:
        """Return the certificate for ``name`` or raise ``SamplingViolation``."""
        leg = self.leg(name)
        if not self.resolves_gratings:
            raise SamplingViolation(
                name,
                f"{self.samples_per_period:.2f} samples per grating period "
                f"(need {MIN_SAMPLES_PER_PERIOD})",
            )
        if not leg.certified:
            raise SamplingViolation(
                name, f"dx={leg.dx:.3e} m exceeds the Nyquist limit {leg.dx_limit:.3e} m"
            )
        return leg

    def field(self, samples: np.ndarray, wavelength: float) -> WaveField:
        return WaveField(samples=samples, x_min=self.x_min, dx=self.dx, wavelength=wavelength)

    def report_rows(self) -> Iterable[Dict[str, object]]:
        for leg in self.legs:
            yield {
                "leg": leg.name,
                "length_m": leg.length,
                "window_half_width_m": leg.window_half_width,
                "dx_m": leg.dx,
                "dx_limit_m": leg.dx_limit,
                "margin": leg.margin,
                "certified": leg.certified and self.resolves_gratings,
            }


def _default_dx(period: float, limits: Sequence[float]) -> float:
    """Largest dx <= 5 nm dividing the period into an even number of cells."""
    target = min(DEFAULT_DX, period / MIN_SAMPLES_PER_PERIOD, *limits)
    cells = 2 * math.ceil(period / (2.0 * target))
    return period / cells


def build_sampling_plan(
    geometry: GeometrySpec,
    wavelengths: Optional[Sequence[float]] = None,
    *,
    dx: Optional[float] = None,
    detector_half_width: float = DEFAULT_DETECTOR_HALF_WIDTH,
    taper_fraction: float = DEFAULT_TAPER_FRACTION,
) -> SamplingPlan:
    """
    Choose the grid and certify each propagated leg.

    A leg of length L between planes with region half-widths W_a and W_b is
    certified when ``dx <= lambda L / (2 X)`` with ``X = 2 max(W_a, W_b)``,
    checked for every wavelength in ``wavelengths``.

    Args:
        geometry: Beamline to sample.
        wavelengths: Wavelengths to certify (defaults to the beam wavelength).
        dx: Forced grid spacing; chosen automatically when omitted.
        detector_half_width: Minimum half-width kept at the detector plane.
        taper_fraction: Fraction of the window apodised at each edge.

    Returns:
        The plan; uncertified legs are reported, not raised.
    """
    lams = tuple(wavelengths) if wavelengths else (geometry.beam.wavelength,)
    if dx is not None and not dx > 0:
        raise DomainError(f"dx must be positive, got {dx}")
    if not 0 <= taper_fraction < 0.5:
        raise DomainError(f"taper_fraction must lie in [0, 0.5), got {taper_fraction}")

    halves: Dict[str, float] = {}
    for plane in PLANE_NAMES[1:]:
        half = max(geometry.region_half_width(plane, lam) for lam in lams)
        if plane == "detector":
            half = max(half, detector_half_width)
        halves[plane] = half

    lengths = dict(zip(LEG_NAMES, geometry.leg_lengths))
    limits: Dict[str, float] = {}
    for name in PROPAGATED_LEGS:
        start, end = name.split("->")
        window = 2.0 * max(halves[start], halves[end])
        limits[name] = min(nyquist_dx_limit(lam, lengths[name], window) for lam in lams)

    periods = [g.period for g in geometry.gratings if isinstance(g, GratingSpec)]
    period = min(periods) if periods else MIN_SAMPLES_PER_PERIOD * DEFAULT_DX
    if dx is None:
        dx = _default_dx(period, list(limits.values()))
        if abs(period / dx - round(period / dx)) > 1e-9:
            logger.warning(f"grating period {period} is not a multiple of dx={dx}")

    grid_half = halves["detector"] / (1.0 - taper_fraction)
    n_samples = even_fast_length(math.ceil(2.0 * grid_half / dx))

    legs = tuple(
        LegCertificate(
            name=name,
            length=lengths[name],
            window_half_width=max(halves[name.split("->")[0]], halves[name.split("->")[1]]),
            dx_limit=limits[name],
            dx=dx,
        )
        for name in PROPAGATED_LEGS
    )
    plan = SamplingPlan(
        dx=dx,
        n_samples=n_samples,
        wavelengths=lams,
        window_half_width=halves,
        legs=legs,
        samples_per_period=period / dx,
        taper_fraction=taper_fraction,
    )
    for leg in legs:
        logger.debug(
            f"leg {leg.name}: L={leg.length:.4g} m, W={leg.window_half_width:.3e} m, "
            f"dx_limit={leg.dx_limit:.3e} m, certified={leg.certified}"
        )
    logger.info(
        f"Sampling plan: dx={dx:.3e} m, N={n_samples}, "
        f"window=+/-{plan.half_width * 1e6:.1f} um, certified={plan.certified}"
    )
    return plan
