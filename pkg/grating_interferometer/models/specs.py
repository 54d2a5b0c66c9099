"""Immutable beamline description shared by the quantum and classical engines.

All lengths are in metres and energies in electron-volts. Instances are frozen
pydantic models and can be shared freely between threads.
"""

import math
from typing import Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from grating_interferometer.core.physics import footprint_half_width, wavelength_from_energy
from grating_interferometer.errors import GeometryError

PLANE_NAMES = ("source", "collimator", "grating1", "grating2", "grating3", "detector")
LEG_NAMES = (
    "source->collimator",
    "collimator->grating1",
    "grating1->grating2",
    "grating2->grating3",
    "grating3->detector",
)

# Region of interest kept around the beam at every plane.
MIN_REGION_HALF_WIDTH = 5e-6
ORDERS_TRACKED = 2
WINDOW_MARGIN = 4.0


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class BeamSpec(_Frozen):
    """Electron beam energy; the wavelength is derived."""

    kinetic_energy: float = Field(gt=0, description="Kinetic energy in eV")
    energy_spread_sigma: float = Field(default=0.0, ge=0, description="Gaussian sigma in eV")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def wavelength(self) -> float:
        return wavelength_from_energy(self.kinetic_energy)


class ApertureSpec(_Frozen):
    """Hard-edged slit of transmission 1 on ``|x - center| < width / 2``."""

    width: float = Field(gt=0)
    center: float = 0.0
    z_position: float = 0.0

    def transmission(self, x: np.ndarray) -> np.ndarray:
        return (np.abs(x - self.center) < self.width / 2.0).astype(float)

    def with_offset(self, offset: float) -> "ApertureSpec":
        return self.model_copy(update={"center": offset})

    def displaced(self, delta: float) -> "ApertureSpec":
        return self.model_copy(update={"center": self.center + delta})

    @property
    def bounds(self) -> Tuple[float, float]:
        return self.center - self.width / 2.0, self.center + self.width / 2.0


class GratingSpec(_Frozen):
    """Binary amplitude grating with a finite window of n_periods_window periods."""

    period: float = Field(gt=0)
    open_fraction: float = Field(default=0.5, gt=0, lt=1)
    lateral_shift: float = 0.0
    z_position: float = 0.0
    n_periods_window: int = Field(ge=1)
    window_center: float = 0.0

    @property
    def window_half_width(self) -> float:
        return self.n_periods_window * self.period / 2.0

    def transmission(self, x: np.ndarray) -> np.ndarray:
        """1 where ``frac((x - lateral_shift) / period) < open_fraction`` inside the window."""
        u = (x - self.lateral_shift) / self.period
        open_bars = (u - np.floor(u)) < self.open_fraction
        inside = np.abs(x - self.window_center) < self.window_half_width
        return (open_bars & inside).astype(float)

    def with_offset(self, offset: float) -> "GratingSpec":
        return self.model_copy(update={"lateral_shift": offset})

    def displaced(self, delta: float) -> "GratingSpec":
        return self.model_copy(
            update={
                "lateral_shift": self.lateral_shift + delta,
                "window_center": self.window_center + delta,
            }
        )


BeamElement = Union[GratingSpec, ApertureSpec]


def window_periods(period: float, region_half_width: float, margin: float = WINDOW_MARGIN) -> int:
    """Number of periods covering ``margin`` times the full region width."""
    return max(1, math.ceil(margin * 2.0 * region_half_width / period))


class GeometrySpec(_Frozen):
    """
    Ordered beamline: source slit, collimator slit, three gratings, detector slit.

    ``spacings`` optionally stores the five leg lengths exactly as configured so
    that engines never reconstruct them from differences of z positions.
    """

    source: ApertureSpec
    collimator: ApertureSpec
    gratings: Tuple[BeamElement, BeamElement, BeamElement]
    detector_slit: ApertureSpec
    beam: BeamSpec
    spacings: Optional[Tuple[float, float, float, float, float]] = None

    @model_validator(mode="after")
    def _check_order(self) -> "GeometrySpec":
        z = self.z_positions
        for name_a, name_b, za, zb in zip(PLANE_NAMES, PLANE_NAMES[1:], z, z[1:]):
            if not zb > za:
                raise GeometryError(
                    f"z positions must increase along the beam: {name_b} ({zb}) is not "
                    f"downstream of {name_a} ({za})"
                )
        if self.spacings is not None:
            for leg, spacing, za, zb in zip(LEG_NAMES, self.spacings, z, z[1:]):
                if not math.isclose(zb - za, spacing, rel_tol=1e-9, abs_tol=1e-15):
                    raise GeometryError(
                        f"leg {leg}: spacing {spacing} disagrees with z positions ({zb - za})"
                    )
        return self

    @property
    def z_positions(self) -> Tuple[float, ...]:
        return (
            self.source.z_position,
            self.collimator.z_position,
            *(g.z_position for g in self.gratings),
            self.detector_slit.z_position,
        )

    @property
    def leg_lengths(self) -> Tuple[float, ...]:
        if self.spacings is not None:
            return tuple(self.spacings)
        z = self.z_positions
        return tuple(zb - za for za, zb in zip(z, z[1:]))

    @property
    def grating_period(self) -> float:
        """Period of the first grating element that has one."""
        for grating in self.gratings:
            if isinstance(grating, GratingSpec):
                return grating.period
        raise GeometryError("beamline has no periodic grating")

    def distance_from(self, start: str, end: str) -> float:
        """Sum of configured leg lengths between two named planes."""
        i, j = PLANE_NAMES.index(start), PLANE_NAMES.index(end)
        if j < i:
            raise GeometryError(f"{end} is upstream of {start}")
        return float(sum(self.leg_lengths[i:j]))

    def region_half_width(self, plane: str, wavelength: Optional[float] = None) -> float:
        """Half-width of the region of interest at a plane (floored at 5 um)."""
        lam = self.beam.wavelength if wavelength is None else wavelength
        i = PLANE_NAMES.index(plane)
        if i <= 1:
            return max(MIN_REGION_HALF_WIDTH, self.collimator.width / 2.0)
        half = footprint_half_width(
            self.distance_from("collimator", plane),
            self.distance_from("grating1", plane),
            source_to_collimator=self.leg_lengths[0],
            source_width=self.source.width,
            collimator_width=self.collimator.width,
            wavelength=lam,
            period=self.grating_period,
            orders=ORDERS_TRACKED,
        )
        return max(MIN_REGION_HALF_WIDTH, half)

    def with_grating_shift(self, index: int, shift: float) -> "GeometrySpec":
        """Copy with grating ``index`` placed at the absolute lateral offset ``shift``."""
        gratings = list(self.gratings)
        gratings[index] = gratings[index].with_offset(shift)
        return self.model_copy(update={"gratings": tuple(gratings)})

    def with_detector(self, center: Optional[float] = None, width: Optional[float] = None) -> "GeometrySpec":
        update = {}
        if center is not None:
            update["center"] = center
        if width is not None:
            update["width"] = width
        return self.model_copy(update={"detector_slit": self.detector_slit.model_copy(update=update)})

    def with_beam(self, beam: BeamSpec) -> "GeometrySpec":
        return self.model_copy(update={"beam": beam})

    def with_open_gratings(self, width: float = 1.0) -> "GeometrySpec":
        """Replace every grating by a slit of ``width`` (default 1 m, i.e. fully open)."""
        gratings = tuple(ApertureSpec(width=width, z_position=g.z_position) for g in self.gratings)
        return self.model_copy(update={"gratings": gratings})

    def translated(self, delta: float) -> "GeometrySpec":
        """Rigidly move slits and gratings sideways by ``delta``."""
        return self.model_copy(
            update={
                "source": self.source.displaced(delta),
                "collimator": self.collimator.displaced(delta),
                "gratings": tuple(g.displaced(delta) for g in self.gratings),
                "detector_slit": self.detector_slit.displaced(delta),
            }
        )

    @classmethod
    def from_distances(
        cls,
        *,
        kinetic_energy: float = 10e3,
        energy_spread_sigma: float = 0.0,
        source_width: float = 5e-6,
        collimator_width: float = 1.5e-6,
        detector_width: float = 5e-6,
        detector_center: float = 0.0,
        source_to_collimator: float = 0.24,
        collimator_to_grating1: float = 0.03,
        grating1_to_grating2: float = 0.0254,
        grating2_to_grating3: float = 0.0254,
        grating3_to_detector: float = 0.27,
        period: float = 100e-9,
        open_fraction: float = 0.5,
        lateral_shifts: Tuple[float, float, float] = (0.0, 0.0, 0.0),
        n_periods_window: Optional[int] = None,
    ) -> "GeometrySpec":
        """
        Build a beamline from leg lengths, defaulting to the 10 keV apparatus.

        The source slit sits at z = 0. When ``n_periods_window`` is omitted each
        grating models enough periods to cover four times its region of interest.
        """
        spacings = (
            source_to_collimator,
            collimator_to_grating1,
            grating1_to_grating2,
            grating2_to_grating3,
            grating3_to_detector,
        )
        if any(not s > 0 for s in spacings):
            raise GeometryError(f"all leg lengths must be positive, got {spacings}")
        z = np.concatenate(([0.0], np.cumsum(spacings))).tolist()
        beam = BeamSpec(kinetic_energy=kinetic_energy, energy_spread_sigma=energy_spread_sigma)
        gratings = []
        for index, (z_grating, shift) in enumerate(zip(z[2:5], lateral_shifts)):
            if n_periods_window is None:
                half = footprint_half_width(
                    z_grating - z[1],
                    z_grating - z[2],
                    source_to_collimator=source_to_collimator,
                    source_width=source_width,
                    collimator_width=collimator_width,
                    wavelength=beam.wavelength,
                    period=period,
                    orders=ORDERS_TRACKED,
                )
                n_window = window_periods(period, max(MIN_REGION_HALF_WIDTH, half))
            else:
                n_window = n_periods_window
            gratings.append(
                GratingSpec(
                    period=period,
                    open_fraction=open_fraction,
                    lateral_shift=shift,
                    z_position=z_grating,
                    n_periods_window=n_window,
                )
            )
        return cls(
            source=ApertureSpec(width=source_width, z_position=z[0]),
            collimator=ApertureSpec(width=collimator_width, z_position=z[1]),
            gratings=tuple(gratings),
            detector_slit=ApertureSpec(width=detector_width, center=detector_center, z_position=z[5]),
            beam=beam,
            spacings=spacings,
        )


class CoherenceSpec(_Frozen):
    """Incoherent emitters across the source slit and optional energy samples."""

    n_source_points: int = Field(default=16, ge=1)
    n_energy_samples: int = Field(default=1, ge=1)
    convergence_tol: float = Field(default=1e-3, gt=0)
    max_source_points: int = Field(default=64, ge=1)


class RayBundleSpec(_Frozen):
    """Sampling of straight rays through the two collimation slits."""

    n_source_samples: int = Field(default=501, ge=1)
    n_collimator_samples: int = Field(default=501, ge=1)
    quadrature: Literal["deterministic-grid", "monte-carlo"] = "deterministic-grid"
    seed: int = 0

    @model_validator(mode="after")
    def _check_counts(self) -> "RayBundleSpec":
        if self.quadrature == "deterministic-grid" and min(
            self.n_source_samples, self.n_collimator_samples
        ) < 2:
            raise ValueError("deterministic-grid quadrature needs at least 2 samples per slit")
        return self

    def doubled(self) -> "RayBundleSpec":
        """Refine the grid so every existing node is kept (n -> 2n - 1)."""
        return self.model_copy(
            update={
                "n_source_samples": 2 * self.n_source_samples - 1,
                "n_collimator_samples": 2 * self.n_collimator_samples - 1,
            }
        )
