"""Strict, unit-aware run configuration loaded from YAML.

Every dimensional value carries a unit suffix (``10 keV``, ``1.5 um``). Unknown
keys are rejected and validation errors name the dotted key and its line.
"""

import logging
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from grating_interferometer.config.units import Duration, Energy, Length, Rate, format_quantity
from grating_interferometer.core.physics import talbot_length, wavelength_from_energy
from grating_interferometer.errors import ConfigError
from grating_interferometer.models.specs import CoherenceSpec, GeometrySpec, RayBundleSpec

logger = logging.getLogger(__name__)

DEFAULT_RUN_CONFIG = Path(__file__).with_name("default_run.yaml")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # field name -> unit family, used when echoing the config back to YAML
    UNITS: ClassVar[Dict[str, str]] = {}

    def to_echo(self) -> Dict[str, Any]:
        echo: Dict[str, Any] = {}
        for name in type(self).model_fields:
            value = getattr(self, name)
            family = self.UNITS.get(name)
            if isinstance(value, _Section):
                echo[name] = value.to_echo()
            elif family is None or value is None:
                echo[name] = list(value) if isinstance(value, tuple) else value
            elif isinstance(value, (list, tuple)):
                echo[name] = [format_quantity(v, family) for v in value]
            else:
                echo[name] = format_quantity(value, family)
        return echo


def _arange(start: float, stop: float, step: float) -> np.ndarray:
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(max(count, 0))


class GeometryConfig(_Section):
    UNITS: ClassVar[Dict[str, str]] = {
        "source_slit_width": "length",
        "collimator_width": "length",
        "detector_slit_width": "length",
        "source_to_collimator": "length",
        "collimator_to_grating1": "length",
        "grating1_to_grating2": "length",
        "grating2_to_grating3": "length",
        "grating3_to_detector": "length",
        "grating_period": "length",
        "grating1_shift": "length",
        "grating2_shift": "length",
        "grating3_shift": "length",
    }

    source_slit_width: Length = Field(default=5e-6, gt=0)
    collimator_width: Length = Field(default=1.5e-6, gt=0)
    detector_slit_width: Length = Field(default=5e-6, gt=0)
    source_to_collimator: Length = Field(default=0.24, gt=0)
    collimator_to_grating1: Length = Field(default=0.03, gt=0)
    grating1_to_grating2: Length = Field(default=0.0254, gt=0)
    grating2_to_grating3: Length = Field(default=0.0254, gt=0)
    grating3_to_detector: Length = Field(default=0.27, gt=0)
    grating_period: Length = Field(default=100e-9, gt=0)
    open_fraction: float = Field(default=0.5, gt=0, lt=1)
    grating1_shift: Length = 0.0
    grating2_shift: Length = 0.0
    grating3_shift: Length = 0.0
    n_periods_window: Optional[int] = Field(default=None, ge=1)


class BeamConfig(_Section):
    UNITS: ClassVar[Dict[str, str]] = {"energy": "energy", "energy_spread": "energy", "energies": "energy"}

    energy: Energy = Field(default=10e3, gt=0)
    energy_spread: Energy = Field(default=0.0, ge=0)
    energies: Optional[List[Energy]] = None

    @model_validator(mode="after")
    def _positive_sweep(self) -> "BeamConfig":
        if self.energies is not None and (not self.energies or min(self.energies) <= 0):
            raise ValueError("energies must be a non-empty list of positive energies")
        return self

    def sweep(self) -> List[float]:
        return list(self.energies) if self.energies else [self.energy]


class EngineConfig(_Section):
    kind: Literal["quantum", "classical", "both"] = "both"

    @property
    def quantum(self) -> bool:
        return self.kind in ("quantum", "both")

    @property
    def classical(self) -> bool:
        return self.kind in ("classical", "both")


class CoherenceConfig(_Section):
    n_source_points: int = Field(default=16, ge=1)
    n_energy_samples: int = Field(default=1, ge=1)
    convergence_tol: float = Field(default=1e-3, gt=0)
    max_source_points: int = Field(default=64, ge=1)
    auto_converge: bool = False


class SamplingConfig(_Section):
    UNITS: ClassVar[Dict[str, str]] = {"dx": "length", "detector_half_width": "length"}

    dx: Optional[Length] = None
    detector_half_width: Length = Field(default=120e-6, gt=0)
    taper_fraction: float = Field(default=0.05, ge=0, lt=0.5)


class ClassicalConfig(_Section):
    n_source_samples: int = Field(default=501, ge=1)
    n_collimator_samples: int = Field(default=501, ge=1)
    quadrature: Literal["deterministic-grid", "monte-carlo"] = "deterministic-grid"
    auto_converge: bool = False
    convergence_tol: float = Field(default=1e-3, gt=0)
    min_relative_flux: float = Field(default=0.5, ge=0, le=1)


class ScanConfig(_Section):
    UNITS: ClassVar[Dict[str, str]] = {
        "shift_start": "length",
        "shift_stop": "length",
        "shift_step": "length",
        "detector_position": "length",
        "positions_start": "length",
        "positions_stop": "length",
        "positions_step": "length",
        "period_min": "length",
        "period_max": "length",
    }

    shift_start: Length = 0.0
    shift_stop: Length = 150e-9
    shift_step: Length = Field(default=5e-9, gt=0)
    port: Literal[0, 1, 2] = 1
    detector_position: Optional[Length] = None
    positions_start: Length = -12e-6
    positions_stop: Length = 12e-6
    positions_step: Length = Field(default=1e-6, gt=0)
    period_min: Optional[Length] = None
    period_max: Optional[Length] = None

    def shifts(self) -> np.ndarray:
        return _arange(self.shift_start, self.shift_stop, self.shift_step)

    def positions(self) -> np.ndarray:
        return _arange(self.positions_start, self.positions_stop, self.positions_step)


class TalbotConfig(_Section):
    UNITS: ClassVar[Dict[str, str]] = {"z_max": "length"}

    z_max: Optional[Length] = None
    n_planes: int = Field(default=200, ge=1)
    samples_per_period: int = Field(default=40, ge=4)
    n_periods: int = Field(default=8, ge=1)


class NoiseConfig(_Section):
    UNITS: ClassVar[Dict[str, str]] = {"rate": "rate", "dwell": "time"}

    enabled: bool = False
    rate: Rate = Field(default=200.0, gt=0)
    dwell: Duration = Field(default=1.0, gt=0)
    sweeps: int = Field(default=1, ge=1)


class DriftConfig(_Section):
    UNITS: ClassVar[Dict[str, str]] = {"amount": "length"}

    enabled: bool = False
    model: Literal["linear", "gaussian"] = "linear"
    amount: Length = Field(default=10e-9, ge=0)


class OutputConfig(_Section):
    directory: Optional[str] = None
    formats: Tuple[Literal["csv", "png"], ...] = ("csv", "png")


class RuntimeConfig(_Section):
    workers: int = Field(default=1, ge=1)
    seed: int = 0
    progress: bool = False


class RunConfig(_Section):
    """Complete description of one simulator run."""

    geometry: GeometryConfig = GeometryConfig()
    beam: BeamConfig = BeamConfig()
    engine: EngineConfig = EngineConfig()
    coherence: CoherenceConfig = CoherenceConfig()
    sampling: SamplingConfig = SamplingConfig()
    classical: ClassicalConfig = ClassicalConfig()
    scan: ScanConfig = ScanConfig()
    talbot: TalbotConfig = TalbotConfig()
    noise: NoiseConfig = NoiseConfig()
    drift: DriftConfig = DriftConfig()
    output: OutputConfig = OutputConfig()
    runtime: RuntimeConfig = RuntimeConfig()

    def to_geometry(self, energy: Optional[float] = None) -> GeometrySpec:
        g = self.geometry
        return GeometrySpec.from_distances(
            kinetic_energy=self.beam.energy if energy is None else energy,
            energy_spread_sigma=self.beam.energy_spread,
            source_width=g.source_slit_width,
            collimator_width=g.collimator_width,
            detector_width=g.detector_slit_width,
            source_to_collimator=g.source_to_collimator,
            collimator_to_grating1=g.collimator_to_grating1,
            grating1_to_grating2=g.grating1_to_grating2,
            grating2_to_grating3=g.grating2_to_grating3,
            grating3_to_detector=g.grating3_to_detector,
            period=g.grating_period,
            open_fraction=g.open_fraction,
            lateral_shifts=(g.grating1_shift, g.grating2_shift, g.grating3_shift),
            n_periods_window=g.n_periods_window,
        )

    def coherence_spec(self) -> CoherenceSpec:
        c = self.coherence
        return CoherenceSpec(
            n_source_points=c.n_source_points,
            n_energy_samples=c.n_energy_samples,
            convergence_tol=c.convergence_tol,
            max_source_points=c.max_source_points,
        )

    def ray_bundle(self, seed: Optional[int] = None) -> RayBundleSpec:
        c = self.classical
        return RayBundleSpec(
            n_source_samples=c.n_source_samples,
            n_collimator_samples=c.n_collimator_samples,
            quadrature=c.quadrature,
            seed=self.runtime.seed if seed is None else seed,
        )

    def period_bounds(self) -> Tuple[float, float]:
        d = self.geometry.grating_period
        lower = self.scan.period_min if self.scan.period_min is not None else d / 4.0
        upper = self.scan.period_max if self.scan.period_max is not None else 2.0 * d
        return lower, upper

    def talbot_z_max(self, energy: Optional[float] = None) -> float:
        if self.talbot.z_max is not None:
            return self.talbot.z_max
        lam = wavelength_from_energy(self.beam.energy if energy is None else energy)
        return 2.0 * talbot_length(self.geometry.grating_period, lam)

    def with_overrides(self, **sections: Dict[str, Any]) -> "RunConfig":
        """Copy with some fields of named sections replaced (values already in SI)."""
        update = {
            name: getattr(self, name).model_copy(update=values) for name, values in sections.items()
        }
        return self.model_copy(update=update)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_echo(), sort_keys=False, allow_unicode=True)


def _line_map(node: yaml.Node, path: Tuple[Union[str, int], ...] = ()) -> Dict[Tuple[Union[str, int], ...], int]:
    lines: Dict[Tuple[Union[str, int], ...], int] = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key_path = path + (key_node.value,)
            lines[key_path] = key_node.start_mark.line + 1
            lines.update(_line_map(value_node, key_path))
    elif isinstance(node, yaml.SequenceNode):
        for index, item in enumerate(node.value):
            item_path = path + (index,)
            lines[item_path] = item.start_mark.line + 1
            lines.update(_line_map(item, item_path))
    return lines


def _locate(loc: Tuple[Any, ...], lines: Dict[Tuple[Any, ...], int]) -> Optional[int]:
    for end in range(len(loc), 0, -1):
        line = lines.get(tuple(loc[:end]))
        if line is not None:
            return line
    return None


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    """
    Parse YAML text into a ``RunConfig``.

    Raises:
        ConfigError: On YAML syntax errors, an empty document, a non-mapping
            top level, or any schema violation (naming key and line).
    """
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"invalid YAML in {source}: {e}", line=mark.line + 1 if mark else None) from e
    if node is None or data is None:
        raise ConfigError(f"configuration {source} is empty")
    if not isinstance(data, dict):
        raise ConfigError(f"configuration {source} must be a mapping of sections")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        loc = tuple(error["loc"])
        key = ".".join(str(part) for part in loc)
        raise ConfigError(error["msg"], key=key, line=_locate(loc, _line_map(node))) from e


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a run configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read configuration file {path}: {e}") from e
    config = parse_run_config(text, source=str(path))
    logger.info(f"Loaded run configuration from {path}")
    return config
