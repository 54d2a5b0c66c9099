"""Fringe fitting, contrast maps, drift and counting-noise models, port finding."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize

from grating_interferometer.core.sampling import SamplingPlan
from grating_interferometer.core.wave_engine import QuantumBeamline
from grating_interferometer.errors import DomainError, FitError
from grating_interferometer.models.results import FringeFit, FringeScan, IntensityProfile
from grating_interferometer.models.specs import ApertureSpec, CoherenceSpec, GeometrySpec

logger = logging.getLogger(__name__)

PERIOD_GRID_STEP = 0.5e-9
MIN_SAMPLES = 8
# half maximum: the detector slit sits inside the beam core
MIN_RELATIVE_FLUX = 0.5


def default_period_bounds(grating_period: float) -> Tuple[float, float]:
    return grating_period / 4.0, 2.0 * grating_period


def _least_squares(x: np.ndarray, y: np.ndarray, period: float) -> Tuple[np.ndarray, float]:
    """Offset/cos/sin coefficients and residual sum of squares at a fixed period."""
    omega = 2.0 * np.pi / period
    design = np.column_stack((np.ones_like(x), np.cos(omega * x), np.sin(omega * x)))
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - design @ coef
    return coef, float(residual @ residual)


def _check_scan(x: np.ndarray, lower: float) -> None:
    if x.size < MIN_SAMPLES:
        raise FitError(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    span = abs(float(x[-1] - x[0]))
    if span < 1.5 * lower:
        raise FitError(
            f"scan span {span:.3e} m is shorter than 1.5 periods of the lower bound {lower:.3e} m"
        )
    step = float(np.max(np.abs(np.diff(x))))
    if step > lower / 2.0:
        logger.warning(
            f"scan step {step:.3e} m undersamples periods down to {lower:.3e} m; "
            "short candidate periods can alias onto the true one"
        )


def fit_fringes(scan: FringeScan, period_bounds: Tuple[float, float]) -> FringeFit:
    """
    Fit ``A + B cos(2 pi x / p + phi)`` to a fringe scan.

    The period is searched on a 0.5 nm grid over ``period_bounds`` with a
    linear least-squares solve at each candidate, then refined by golden-section
    search on the residual. Ties go to the smaller period.

    Args:
        scan: Fluxes versus middle-grating shift.
        period_bounds: Inclusive (lower, upper) period range in metres.

    Returns:
        The best fit; a constant scan gives contrast 0 with ``phase_defined`` False.

    Raises:
        FitError: Fewer than 8 samples or a span under 1.5 lower-bound periods.
            A step larger than half the lower bound is only logged.
    """
    lower, upper = period_bounds
    if not 0 < lower < upper:
        raise FitError(f"invalid period bounds {period_bounds}")
    x = np.asarray(scan.shifts, dtype=float)
    y = np.asarray(scan.fluxes, dtype=float)
    _check_scan(x, lower)

    mean = float(np.mean(y))
    if np.ptp(y) <= 1e-12 * max(abs(mean), np.finfo(float).tiny):
        return FringeFit(
            offset=mean,
            amplitude=0.0,
            period=lower,
            phase=0.0,
            contrast=0.0,
            residual_rms=float(np.std(y)),
            converged=True,
            phase_defined=False,
        )

    n_grid = int(math.floor((upper - lower) / PERIOD_GRID_STEP + 1e-9)) + 1
    grid = lower + PERIOD_GRID_STEP * np.arange(n_grid)
    if grid[-1] < upper:
        grid = np.append(grid, upper)
    sse = np.array([_least_squares(x, y, p)[1] for p in grid])
    best = int(np.argmin(sse))
    period, converged = float(grid[best]), True

    if 0 < best < grid.size - 1:
        try:
            result = optimize.minimize_scalar(
                lambda p: _least_squares(x, y, p)[1],
                bracket=(grid[best - 1], grid[best], grid[best + 1]),
                method="golden",
                options={"xtol": 1e-10},
            )
            if lower <= result.x <= upper and result.fun <= sse[best]:
                period = float(result.x)
                converged = bool(result.success)
        except ValueError as e:
            logger.debug(f"golden-section refinement skipped: {e}")
    else:
        logger.warning(f"best period {period:.4e} m lies on the search boundary")
        converged = False

    (offset, a, b), residual = _least_squares(x, y, period)
    amplitude = math.hypot(a, b)
    phase = math.atan2(-b, a)
    if offset > 0:
        contrast = min(max(amplitude / offset, 0.0), 1.0)
    else:
        contrast, converged = 0.0, False
    return FringeFit(
        offset=float(offset),
        amplitude=amplitude,
        period=period,
        phase=phase,
        contrast=contrast,
        residual_rms=math.sqrt(residual / x.size),
        converged=converged,
    )


def fringe_phase(shifts: Sequence[float], fluxes: Sequence[float], period: float) -> float:
    """Phase ``phi`` of the ``cos(2 pi x / period + phi)`` component at a fixed period."""
    (_, a, b), _ = _least_squares(np.asarray(shifts, dtype=float), np.asarray(fluxes, dtype=float), period)
    return math.atan2(-b, a)


def bright_mask(fits: Sequence[FringeFit], min_relative_flux: float = MIN_RELATIVE_FLUX) -> np.ndarray:
    """
    True where a fit's mean flux reaches ``min_relative_flux`` of the brightest fit.

    A slit that only clips the penumbra of the beam collects a vanishing share
    of the flux; contrast fitted there is kept out of maxima.
    """
    means = np.array([fit.offset for fit in fits], dtype=float)
    if means.size == 0 or not np.max(means) > 0:
        return np.zeros(means.size, dtype=bool)
    return means >= min_relative_flux * np.max(means)


def best_bright_index(fits: Sequence[FringeFit], min_relative_flux: float = MIN_RELATIVE_FLUX) -> Optional[int]:
    """Index of the largest contrast among bright fits; None when no fit carries flux."""
    mask = bright_mask(fits, min_relative_flux)
    if not np.any(mask):
        return None
    contrast = np.where(mask, [fit.contrast for fit in fits], -np.inf)
    return int(np.argmax(contrast))


def contrast_vs_detector(
    geometry: GeometrySpec,
    coherence: CoherenceSpec,
    detector_positions: Sequence[float],
    shifts: Sequence[float],
    period_bounds: Optional[Tuple[float, float]] = None,
    plan: Optional[SamplingPlan] = None,
    *,
    workers: int = 1,
    progress: bool = False,
) -> List[Tuple[float, FringeFit]]:
    """Quantum fringe fit for a detector slit centred at each position (one scan)."""
    bounds = period_bounds or default_period_bounds(geometry.grating_period)
    slits = [geometry.detector_slit.with_offset(float(p)) for p in detector_positions]
    beamline = QuantumBeamline(geometry, coherence, plan, workers=workers, progress=progress)
    scans = beamline.scan(shifts, slits)
    return [(float(p), fit_fringes(scan, bounds)) for p, scan in zip(detector_positions, scans)]


@dataclass(frozen=True)
class PhaseRates:
    """Fringe-phase change per metre of static offset of each grating (rad/m)."""

    grating1: float
    grating2: float
    grating3: float
    period: float

    def normalized(self) -> Tuple[float, float, float]:
        """Rates relative to the first grating's; ideally (1, -2, 1)."""
        return (1.0, self.grating2 / self.grating1, self.grating3 / self.grating1)


def phase_rates(
    geometry: GeometrySpec,
    coherence: CoherenceSpec,
    detector_slit: ApertureSpec,
    shifts: Sequence[float],
    offset: float,
    period_bounds: Optional[Tuple[float, float]] = None,
    plan: Optional[SamplingPlan] = None,
    *,
    workers: int = 1,
) -> PhaseRates:
    """
    Fringe-phase rates for small static offsets of each grating.

    The unperturbed middle-grating scan is fitted once and every phase is read
    at that period, so period jitter between fits does not leak into the
    phases. Each rate is a central difference over ``+offset`` and ``-offset``;
    a static offset of the middle grating is the same scan shifted by it.
    Scans spanning a whole number of grating periods keep the grating-period
    harmonics orthogonal to the fringe.

    Raises:
        DomainError: If ``offset`` is not below a quarter of the fitted period.
    """
    bounds = period_bounds or default_period_bounds(geometry.grating_period)
    shifts = np.asarray(shifts, dtype=float)
    beamline = QuantumBeamline(geometry, coherence, plan, workers=workers)
    [base] = beamline.scan(shifts, [detector_slit])
    period = fit_fringes(base, bounds).period
    if not 0 < offset < period / 4.0:
        raise DomainError(f"offset {offset:.3e} m must lie in (0, {period / 4.0:.3e}) m")

    def offset_phase(index: int, sign: float) -> float:
        if index == 1:
            [scan] = beamline.scan(shifts + sign * offset, [detector_slit])
        else:
            current = geometry.gratings[index].lateral_shift
            moved = geometry.with_grating_shift(index, current + sign * offset)
            [scan] = QuantumBeamline(moved, coherence, beamline.plan, workers=workers).scan(
                shifts, [detector_slit]
            )
        return fringe_phase(shifts, scan.fluxes, period)

    rates = []
    for index in range(3):
        change = math.remainder(offset_phase(index, 1.0) - offset_phase(index, -1.0), 2.0 * math.pi)
        rates.append(change / (2.0 * offset))
    logger.info(
        f"Phase rates at period {period * 1e9:.3f} nm: "
        + ", ".join(f"{r * 1e-6:.4f} rad/um" for r in rates)
    )
    return PhaseRates(grating1=rates[0], grating2=rates[1], grating3=rates[2], period=period)


@dataclass(frozen=True)
class LinearDrift:
    """
    Uniform drift of ``total`` metres during each scan point.

    The factor is ``sinc(total / period)``. It is negative between one and two
    periods of drift (and in every other odd interval): averaging over such a
    ramp reverses the fringe, so the phase flips by pi.
    """

    total: float

    def contrast_factor(self, period: float) -> float:
        return float(np.sinc(self.total / period))


@dataclass(frozen=True)
class GaussianJitter:
    """Gaussian position jitter with standard deviation ``sigma`` metres."""

    sigma: float

    def contrast_factor(self, period: float) -> float:
        return math.exp(-2.0 * math.pi**2 * self.sigma**2 / period**2)


DriftModel = Union[LinearDrift, GaussianJitter]


def apply_drift(scan: FringeScan, drift_model: DriftModel, ideal_fit: FringeFit) -> FringeScan:
    """
    Reduce the fitted fringe amplitude by the drift model's contrast factor.

    Only the oscillating part of the fitted sinusoid is rescaled; the residual
    of the data around the fit is kept. Fluxes are clipped at zero. A negative
    factor (linear drift beyond one period) yields a phase-reversed fringe.
    """
    factor = drift_model.contrast_factor(ideal_fit.period)
    if factor < 0:
        logger.warning(
            f"drift {drift_model!r} exceeds the fringe period {ideal_fit.period:.3e} m; "
            f"contrast factor {factor:.3f} reverses the fringe phase"
        )
    lost = (1.0 - factor) * ideal_fit.amplitude
    oscillation = np.cos(2.0 * np.pi * scan.shifts / ideal_fit.period + ideal_fit.phase)
    fluxes = np.clip(scan.fluxes - lost * oscillation, 0.0, None)
    return scan.with_fluxes(fluxes, drift_model=repr(drift_model), drift_contrast_factor=factor)


def drift_report(period: float, amount: float) -> Dict[str, float]:
    """Contrast factors of both drift models for the same drift length."""
    return {
        "period_m": period,
        "drift_m": amount,
        "linear_factor": LinearDrift(amount).contrast_factor(period),
        "gaussian_factor": GaussianJitter(amount).contrast_factor(period),
    }


def apply_poisson_noise(
    scan: FringeScan, rate: float, dwell: float, seed: int, sweeps: int = 1
) -> FringeScan:
    """
    Replace fluxes by Poisson counts summed over ``sweeps`` independent sweeps.

    The mean count per point per sweep is ``rate * dwell`` scaled by the flux
    relative to the scan's mean flux.
    """
    if not (rate > 0 and dwell > 0):
        raise DomainError(f"rate and dwell must be positive, got {rate}, {dwell}")
    if sweeps < 1:
        raise DomainError(f"sweeps must be >= 1, got {sweeps}")
    mean_flux = float(np.mean(scan.fluxes))
    if not mean_flux > 0:
        raise DomainError("cannot add counting noise to a scan with zero mean flux")
    expected = np.asarray(scan.fluxes, dtype=float) / mean_flux * rate * dwell
    rng = np.random.default_rng(seed)
    counts = np.zeros(expected.size, dtype=np.int64)
    for _ in range(sweeps):
        counts += rng.poisson(expected)
    return scan.with_fluxes(counts, counts=True, rate=rate, dwell=dwell, sweeps=sweeps, seed=seed)


def slit_flux_curve(profile: IntensityProfile, width: float) -> np.ndarray:
    """Flux a slit of ``width`` would collect when centred on each grid point."""
    x = profile.x
    cumulative = integrate.cumulative_trapezoid(profile.values, x, initial=0.0)
    return np.interp(x + width / 2.0, x, cumulative) - np.interp(x - width / 2.0, x, cumulative)


def beam_axis_at_detector(geometry: GeometrySpec) -> float:
    """Detector-plane crossing of the line through both collimation slit centres."""
    lever = geometry.distance_from("collimator", "detector") / geometry.leg_lengths[0]
    centre_c, centre_s = geometry.collimator.center, geometry.source.center
    return centre_c + (centre_c - centre_s) * lever


def port_estimates(geometry: GeometrySpec) -> Dict[str, float]:
    """
    Geometric detector-plane positions of the zero order and ports 1 and 2.

    The ports are where the two closing arms recombine. Their combined path is
    displaced like a single first-order kink at the middle grating, so the
    lever arm is grating 2 to detector (about 36 um at 10 keV). The first
    order of grating 1 alone lands further out (about 39 um) and falls in the
    same half-spacing search window.
    """
    wavelength = geometry.beam.wavelength
    spacing = wavelength / geometry.grating_period * geometry.distance_from("grating2", "detector")
    axis = beam_axis_at_detector(geometry)
    return {"0": axis, "1": axis + spacing, "2": axis - spacing}


def find_output_ports(profile: IntensityProfile, geometry: GeometrySpec) -> Dict[str, float]:
    """
    Locate the zero order and the two interferometer output ports.

    Port 1 is the +1 order group, port 2 the -1 group. Each is the position of
    largest slit flux within half an order spacing of its geometric estimate.
    """
    estimates = port_estimates(geometry)
    spacing = estimates["1"] - estimates["0"]
    curve = slit_flux_curve(profile, geometry.detector_slit.width)
    x = profile.x
    ports = {}
    for name, estimate in estimates.items():
        near = np.abs(x - estimate) <= spacing / 2.0
        if not np.any(near):
            raise DomainError(f"port {name} estimate {estimate:.3e} m lies outside the pattern")
        idx = np.flatnonzero(near)
        ports[name] = float(x[idx[np.argmax(curve[idx])]])
    logger.info(
        "Output ports: " + ", ".join(f"{k}={v * 1e6:.2f} um" for k, v in ports.items())
    )
    return ports
