"""Array-carrying result types produced by the engines and the analysis layer."""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping

import numpy as np
from scipy import integrate

from grating_interferometer.errors import DomainError


def centered_grid(n_samples: int, dx: float) -> np.ndarray:
    """Symmetric grid ``(j - (n - 1) / 2) * dx``; even ``n`` puts no sample on x = 0."""
    return (np.arange(n_samples) - (n_samples - 1) / 2.0) * dx


@dataclass(frozen=True)
class WaveField:
    """Sampled complex transverse amplitude at one plane."""

    samples: np.ndarray
    x_min: float
    dx: float
    wavelength: float

    def __post_init__(self) -> None:
        if self.dx <= 0:
            raise DomainError(f"dx must be positive, got {self.dx}")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise DomainError("WaveField samples must be a non-empty 1-D array")
        if self.wavelength <= 0:
            raise DomainError(f"wavelength must be positive, got {self.wavelength}")

    @property
    def n_samples(self) -> int:
        return int(self.samples.size)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_samples) * self.dx

    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def total_probability(self) -> float:
        """Riemann sum of |psi|^2 dx, the norm preserved by the spectral propagator."""
        return float(np.sum(self.intensity()) * self.dx)

    def with_samples(self, samples: np.ndarray) -> "WaveField":
        return replace(self, samples=samples)


@dataclass(frozen=True)
class IntensityProfile:
    """Non-negative flux density sampled on a uniform grid."""

    x_min: float
    dx: float
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.dx <= 0:
            raise DomainError(f"dx must be positive, got {self.dx}")
        if np.any(self.values < 0):
            raise DomainError("intensity values must be non-negative")

    @property
    def x(self) -> np.ndarray:
        return self.x_min + np.arange(self.values.size) * self.dx

    @property
    def x_max(self) -> float:
        return self.x_min + (self.values.size - 1) * self.dx

    def total(self) -> float:
        return float(integrate.trapezoid(self.values, dx=self.dx))

    def normalized(self) -> "IntensityProfile":
        total = self.total()
        if not total > 0:
            raise DomainError("cannot normalise an intensity profile with zero total")
        return replace(self, values=self.values / total)


@dataclass(frozen=True)
class FringeScan:
    """Detector flux versus middle-grating displacement."""

    shifts: np.ndarray
    fluxes: np.ndarray
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.shifts.shape != self.fluxes.shape or self.shifts.ndim != 1:
            raise DomainError("shifts and fluxes must be 1-D arrays of equal length")
        if self.shifts.size > 1:
            steps = np.diff(self.shifts)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise DomainError("shifts must be strictly monotone")
        if np.any(self.fluxes < 0):
            raise DomainError("fluxes must be non-negative")

    def with_fluxes(self, fluxes: np.ndarray, **metadata: Any) -> "FringeScan":
        merged: Dict[str, Any] = {**self.metadata, **metadata}
        return FringeScan(shifts=self.shifts, fluxes=fluxes, metadata=merged)


@dataclass(frozen=True)
class FringeFit:
    """Best sinusoid ``offset + amplitude * cos(2 pi x / period + phase)``."""

    offset: float
    amplitude: float
    period: float
    phase: float
    contrast: float
    residual_rms: float
    converged: bool
    phase_defined: bool = True

    def evaluate(self, shifts: np.ndarray) -> np.ndarray:
        return self.offset + self.amplitude * np.cos(2.0 * np.pi * shifts / self.period + self.phase)

    def as_row(self) -> Dict[str, Any]:
        return {
            "offset": self.offset,
            "amplitude": self.amplitude,
            "period": self.period,
            "phase": self.phase,
            "contrast": self.contrast,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "phase_defined": self.phase_defined,
        }


@dataclass(frozen=True)
class MachZehnderReport:
    beam_width_at_g2: float
    order_separation_at_g2: float
    ratio: float


@dataclass(frozen=True)
class TalbotCarpet:
    """Plane-wave intensity behind a single grating at a stack of z slices."""

    z: np.ndarray
    x_min: float
    dx: float
    intensity: np.ndarray
    talbot_length: float

    @property
    def profiles(self) -> List[IntensityProfile]:
        return [IntensityProfile(self.x_min, self.dx, row) for row in self.intensity]

    @property
    def x(self) -> np.ndarray:
        return self.x_min + np.arange(self.intensity.shape[1]) * self.dx
