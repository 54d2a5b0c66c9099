"""Quantum engine: Fresnel propagation of point-source waves through the beamline.

Partial coherence is modelled by an incoherent, fixed-order sum over point
emitters spread uniformly across the source slit (and optionally over
Gauss-Hermite energy samples). Fields at the second grating do not depend on
its lateral shift, so they are cached per emitter for middle-grating scans.
"""

import logging
import math
import threading
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate

from grating_interferometer.core.propagation import apodize, apply_mask, fresnel_propagate
from grating_interferometer.core.sampling import SamplingPlan, build_sampling_plan
from grating_interferometer.core.physics import wavelength_from_energy
from grating_interferometer.errors import DetectorWindowError, DomainError, NumericError, SamplingViolation
from grating_interferometer.models.results import FringeScan, IntensityProfile, WaveField
from grating_interferometer.models.specs import (
    LEG_NAMES,
    ApertureSpec,
    BeamElement,
    CoherenceSpec,
    GeometrySpec,
)
from grating_interferometer.utils.parallel import ordered_map

logger = logging.getLogger(__name__)

_, LEG_C1, LEG_12, LEG_23, LEG_3D = LEG_NAMES


@dataclass(frozen=True)
class Emitter:
    """One incoherent contribution: a point on the source slit at one energy."""

    source_x: float
    wavelength: float
    weight: float


def source_points(source: ApertureSpec, n_points: int) -> np.ndarray:
    """Midpoints of ``n_points`` equal cells spanning the source slit."""
    cells = (np.arange(n_points) + 0.5) / n_points - 0.5
    return source.center + source.width * cells


def energy_samples(kinetic_energy: float, sigma: float, n_samples: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite energies and normalised weights for a Gaussian spread."""
    if n_samples == 1 or sigma == 0:
        return np.array([kinetic_energy]), np.array([1.0])
    nodes, weights = hermegauss(n_samples)
    energies = kinetic_energy + sigma * nodes
    if np.any(energies <= 0):
        raise DomainError(f"energy spread sigma={sigma} eV yields non-positive sample energies")
    return energies, weights / weights.sum()


def build_emitters(geometry: GeometrySpec, coherence: CoherenceSpec) -> List[Emitter]:
    """Emitters in the fixed summation order: energy-major, then source position."""
    beam = geometry.beam
    energies, e_weights = energy_samples(
        beam.kinetic_energy, beam.energy_spread_sigma, coherence.n_energy_samples
    )
    xs = source_points(geometry.source, coherence.n_source_points)
    return [
        Emitter(float(x), wavelength_from_energy(float(energy)), float(e_weight) / xs.size)
        for energy, e_weight in zip(energies, e_weights)
        for x in xs
    ]


class QuantumBeamline:
    """
    Propagates emitters through collimator, gratings and detector planes.

    Args:
        geometry: Beamline description.
        coherence: Emitter sampling; defaults to ``CoherenceSpec()``.
        plan: Sampling plan; built for all emitter wavelengths when omitted.
        workers: Threads used to evaluate emitters.
        progress: Show a tqdm progress bar over emitters.
    """

    def __init__(
        self,
        geometry: GeometrySpec,
        coherence: Optional[CoherenceSpec] = None,
        plan: Optional[SamplingPlan] = None,
        *,
        workers: int = 1,
        progress: bool = False,
    ):
        self.geometry = geometry
        self.coherence = coherence or CoherenceSpec()
        self.emitters = build_emitters(geometry, self.coherence)
        wavelengths = sorted({e.wavelength for e in self.emitters})
        self.plan = plan or build_sampling_plan(geometry, wavelengths)
        self.workers = workers
        self.progress = progress
        self._legs = dict(zip(LEG_NAMES, geometry.leg_lengths))
        self._upstream: Dict[Tuple[float, float], WaveField] = {}
        self._lock = threading.Lock()

    # -- single emitter -------------------------------------------------

    def launch(self, source_x: float, wavelength: float) -> WaveField:
        """Paraxial spherical wave from ``source_x`` cut by the collimator slit."""
        source = self.geometry.source
        lo, hi = source.bounds
        if not lo <= source_x <= hi:
            raise DomainError(f"source_x={source_x} lies outside the source slit [{lo}, {hi}]")
        if not any(math.isclose(wavelength, lam, rel_tol=1e-12) for lam in self.plan.wavelengths):
            raise SamplingViolation(LEG_C1, f"plan was not built for wavelength {wavelength:.6e} m")
        x = self.plan.x
        distance = self._legs[LEG_NAMES[0]]
        samples = np.zeros(x.size, dtype=complex)
        inside = self.geometry.collimator.transmission(x) > 0
        phase = np.pi * (x[inside] - source_x) ** 2 / (wavelength * distance)
        samples[inside] = np.exp(1j * phase) / math.sqrt(distance)
        return self.plan.field(samples, wavelength)

    def _leg(self, field: WaveField, name: str) -> WaveField:
        field = apodize(field, self.plan.taper_fraction)
        return fresnel_propagate(field, self._legs[name], self.plan, name, guard=True)

    def field_before_grating2(self, source_x: float, wavelength: float) -> WaveField:
        key = (source_x, wavelength)
        cached = self._upstream.get(key)
        if cached is not None:
            return cached
        field = self.launch(source_x, wavelength)
        field = self._leg(field, LEG_C1)
        field = apply_mask(field, self.geometry.gratings[0])
        field = self._leg(field, LEG_12)
        with self._lock:
            self._upstream[key] = field
        return field

    def detector_field(
        self, source_x: float, wavelength: float, middle: Optional[BeamElement] = None
    ) -> WaveField:
        """Field at the detector plane; ``middle`` overrides the second grating."""
        field = self.field_before_grating2(source_x, wavelength)
        field = apply_mask(field, middle if middle is not None else self.geometry.gratings[1])
        field = self._leg(field, LEG_23)
        field = apply_mask(field, self.geometry.gratings[2])
        return self._leg(field, LEG_3D)

    def point_intensity(
        self, source_x: float, wavelength: float, middle: Optional[BeamElement] = None
    ) -> np.ndarray:
        return self.detector_field(source_x, wavelength, middle).intensity()

    # -- incoherent sums ------------------------------------------------

    def pattern(self, middle: Optional[BeamElement] = None) -> IntensityProfile:
        """Normalised incoherent detector pattern (trapezoid total equals 1)."""
        intensities = ordered_map(
            lambda e: self.point_intensity(e.source_x, e.wavelength, middle),
            self.emitters,
            workers=self.workers,
            progress=self.progress,
            desc="emitters",
        )
        total = np.zeros(self.plan.n_samples)
        for emitter, intensity in zip(self.emitters, intensities):
            total += emitter.weight * intensity
        if not np.all(np.isfinite(total)):
            raise NumericError("detector pattern contains non-finite values")
        profile = IntensityProfile(x_min=self.plan.x_min, dx=self.plan.dx, values=total)
        try:
            return profile.normalized()
        except DomainError as e:
            raise NumericError("no probability reaches the detector plane") from e

    def scan(self, shifts: Sequence[float], slits: Sequence[ApertureSpec]) -> List[FringeScan]:
        """Detector fluxes through each slit while the middle grating is displaced."""
        shifts = np.asarray(shifts, dtype=float)
        steps = shifts / self.plan.dx
        if np.any(np.abs(steps - np.round(steps)) > 1e-6):
            logger.warning(
                f"middle-grating shifts are not multiples of dx={self.plan.dx:.3e} m; "
                "mask edges snap to the grid"
            )
        fluxes = np.zeros((len(slits), shifts.size))
        for j, shift in enumerate(shifts):
            middle = self.geometry.gratings[1].with_offset(float(shift))
            profile = self.pattern(middle)
            for i, slit in enumerate(slits):
                fluxes[i, j] = detector_flux(profile, slit)
            logger.debug(f"shift {shift * 1e9:.2f} nm: fluxes {fluxes[:, j]}")
        logger.info(
            f"Quantum scan finished: {shifts.size} shifts, {len(slits)} detector positions, "
            f"{len(self.emitters)} emitters"
        )
        return [
            FringeScan(
                shifts=shifts.copy(),
                fluxes=fluxes[i],
                metadata={
                    "engine": "quantum",
                    "energy_eV": self.geometry.beam.kinetic_energy,
                    "detector_center_m": slit.center,
                    "detector_width_m": slit.width,
                    "n_source_points": self.coherence.n_source_points,
                    "n_energy_samples": self.coherence.n_energy_samples,
                },
            )
            for i, slit in enumerate(slits)
        ]


def propagate_point_source(
    geometry: GeometrySpec, source_x: float, wavelength: float, plan: SamplingPlan
) -> IntensityProfile:
    """
    |psi|^2 at the detector plane for a single coherent point emitter.

    Raises:
        DomainError: If ``source_x`` lies outside the source slit.
        SamplingViolation: If ``plan`` does not certify a leg or the wavelength.
    """
    beamline = QuantumBeamline(geometry, CoherenceSpec(n_source_points=1), plan)
    values = beamline.point_intensity(source_x, wavelength)
    return IntensityProfile(x_min=plan.x_min, dx=plan.dx, values=values)


def detector_pattern(
    geometry: GeometrySpec,
    coherence: CoherenceSpec,
    plan: Optional[SamplingPlan] = None,
    *,
    workers: int = 1,
    progress: bool = False,
) -> IntensityProfile:
    """Incoherent detector-plane pattern normalised to unit total probability."""
    beamline = QuantumBeamline(geometry, coherence, plan, workers=workers, progress=progress)
    return beamline.pattern()


def detector_flux(profile: IntensityProfile, slit: ApertureSpec) -> float:
    """
    Trapezoid integral of the profile over the slit opening.

    The opening is clipped to the grid; end points are linearly interpolated.

    Raises:
        DetectorWindowError: If the slit centre lies outside the grid.
    """
    x = profile.x
    if not profile.x_min <= slit.center <= profile.x_max:
        raise DetectorWindowError(
            f"slit centre {slit.center} outside the detector window "
            f"[{profile.x_min}, {profile.x_max}]"
        )
    lo, hi = slit.bounds
    lo, hi = max(lo, profile.x_min), min(hi, profile.x_max)
    if hi <= lo:
        return 0.0
    inner = (x > lo) & (x < hi)
    xs = np.concatenate(([lo], x[inner], [hi]))
    ys = np.concatenate(
        ([np.interp(lo, x, profile.values)], profile.values[inner], [np.interp(hi, x, profile.values)])
    )
    return float(integrate.trapezoid(ys, xs))


def scan_middle_grating(
    geometry: GeometrySpec,
    coherence: CoherenceSpec,
    shifts: Sequence[float],
    detector_slit: ApertureSpec,
    plan: Optional[SamplingPlan] = None,
    *,
    workers: int = 1,
    progress: bool = False,
) -> FringeScan:
    """Flux through ``detector_slit`` for each absolute lateral shift of grating 2."""
    beamline = QuantumBeamline(geometry, coherence, plan, workers=workers, progress=progress)
    return beamline.scan(shifts, [detector_slit])[0]


def converge_source_points(
    geometry: GeometrySpec,
    coherence: CoherenceSpec,
    slits: Sequence[ApertureSpec],
    plan: Optional[SamplingPlan] = None,
    *,
    workers: int = 1,
) -> CoherenceSpec:
    """
    Double ``n_source_points`` until slit fluxes change by less than the tolerance.

    Returns the coherence spec whose doubling moved every flux by less than
    ``convergence_tol`` relative to the largest flux, or the largest count
    tried if ``max_source_points`` is reached first.
    """

    def fluxes(spec: CoherenceSpec) -> np.ndarray:
        profile = detector_pattern(geometry, spec, plan, workers=workers)
        return np.array([detector_flux(profile, slit) for slit in slits])

    current_spec = coherence
    current = fluxes(current_spec)
    while 2 * current_spec.n_source_points <= coherence.max_source_points:
        finer_spec = current_spec.model_copy(update={"n_source_points": 2 * current_spec.n_source_points})
        finer = fluxes(finer_spec)
        scale = max(float(np.max(np.abs(current))), np.finfo(float).tiny)
        change = float(np.max(np.abs(finer - current))) / scale
        logger.info(
            f"source points {current_spec.n_source_points} -> {finer_spec.n_source_points}: "
            f"relative flux change {change:.2e}"
        )
        if change < coherence.convergence_tol:
            return current_spec
        current_spec, current = finer_spec, finer
    logger.warning(
        f"source-point sampling not converged at {current_spec.n_source_points} points "
        f"(tolerance {coherence.convergence_tol})"
    )
    return current_spec
