"""
Experiment orchestrator behind the ``sim`` commands.

Each command turns a resolved ``RunConfig`` into CSV tables (and optional PNG
renderings) in an output directory. Tables carry the resolved config in their
header; wall time goes to a ``.run.json`` sidecar per table.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from grating_interferometer.config.run_config import RunConfig
from grating_interferometer.config.settings import Settings, get_settings
from grating_interferometer.core.classical_engine import (
    MODEL_NOTE,
    MoireDeflectometer,
    converge_bundle,
    moire_flux,
    moire_max_contrast,
    two_slit_acceptance,
)
from grating_interferometer.core.fringe_analysis import (
    GaussianJitter,
    LinearDrift,
    apply_drift,
    apply_poisson_noise,
    beam_axis_at_detector,
    best_bright_index,
    bright_mask,
    drift_report,
    find_output_ports,
    fit_fringes,
    port_estimates,
)
from grating_interferometer.core.physics import (
    electrons_in_flight,
    mach_zehnder_criterion,
    wavelength_from_energy,
)
from grating_interferometer.core.sampling import SamplingPlan, build_sampling_plan
from grating_interferometer.core.talbot import dominant_period, regime_report, talbot_carpet
from grating_interferometer.core.wave_engine import (
    QuantumBeamline,
    build_emitters,
    converge_source_points,
)
from grating_interferometer.models.results import FringeFit, FringeScan
from grating_interferometer.models.specs import CoherenceSpec, GeometrySpec, RayBundleSpec
from grating_interferometer.storage import plot_sink
from grating_interferometer.storage.csv_sink import CsvSink, write_run_sidecar

logger = logging.getLogger(__name__)

SCAN_COLUMNS = ["shift_m", "flux_ideal", "flux", "fit"]
SUMMARY_COLUMNS = [
    "energy_eV",
    "engine",
    "port",
    "detector_center_m",
    "period_m",
    "contrast",
    "phase_rad",
    "offset",
    "amplitude",
    "residual_rms",
    "converged",
    "phase_defined",
    "contrast_ideal",
    "drift_factor",
    "quantum_over_classical",
    "regime_verdict",
]
MAP_COLUMNS = [
    "position_m",
    "contrast_quantum",
    "contrast_classical",
    "ratio",
    "period_quantum_m",
    "period_classical_m",
    "bright_classical",
]
MOIRE_COLUMNS = [
    "position_m",
    "contrast",
    "period_m",
    "phase_rad",
    "offset",
    "amplitude",
    "converged",
    "standard_error",
    "bright",
]
PATTERN_COLUMNS = ["x_m", "intensity"]
PLAN_COLUMNS = [
    "energy_eV",
    "leg",
    "length_m",
    "window_half_width_m",
    "dx_m",
    "dx_limit_m",
    "margin",
    "certified",
]
CARPET_COLUMNS = ["z_m", "x_m", "intensity"]
REGIME_COLUMNS = [
    "energy_eV",
    "wavelength_m",
    "grating_period_m",
    "talbot_length_m",
    "grating_spacing_m",
    "spacing_over_talbot",
    "nearest_integer_multiple",
    "integer_mismatch",
    "near_field_period_m",
    "far_field_period_m",
    "mz_beam_width_at_g2_m",
    "mz_order_separation_at_g2_m",
    "mz_ratio",
]


def energy_tag(energy: float) -> str:
    return f"{energy / 1e3:g}keV"


@dataclass
class CommandResult:
    """Files written by one command and a short table for the console."""

    command: str
    paths: List[Path] = field(default_factory=list)
    summary: Optional[pd.DataFrame] = None
    certified: bool = True


class ExperimentRunner:
    """
    Runs the simulator commands for one resolved configuration.

    Args:
        config: Resolved run configuration.
        out_dir: Output directory (``--out``); falls back to the config's
            ``output.directory`` and then to the settings default.
        settings: Process settings; ``get_settings()`` when omitted.
    """

    def __init__(
        self,
        config: RunConfig,
        out_dir: Optional[Path] = None,
        settings: Optional[Settings] = None,
    ):
        self.config = config
        self.settings = settings or get_settings()
        directory = out_dir or config.output.directory or self.settings.OUTPUT_DIR
        self.out_dir = Path(directory)
        self.workers = self.settings.WORKERS or config.runtime.workers
        self.progress = config.runtime.progress or self.settings.PROGRESS
        self.seed = config.runtime.seed
        self._config_yaml = config.to_yaml()
        logger.info(
            f"Experiment runner ready: out_dir={self.out_dir}, workers={self.workers}, seed={self.seed}"
        )

    # -- shared helpers --------------------------------------------------

    @property
    def write_csv(self) -> bool:
        return "csv" in self.config.output.formats

    @property
    def write_png(self) -> bool:
        return "png" in self.config.output.formats

    def _write(
        self,
        result: CommandResult,
        name: str,
        columns: Sequence[str],
        rows: Any,
        metadata: Mapping[str, Any],
    ) -> None:
        if not self.write_csv:
            return
        meta = {"command": result.command, "seed": self.seed, **metadata}
        path = CsvSink(self.out_dir / name, columns).write(rows, meta, self._config_yaml)
        result.paths.append(path)

    def _plot(self, result: CommandResult, plotter: Any, *args: Any, **kwargs: Any) -> None:
        if self.write_png:
            result.paths.append(plotter(*args, **kwargs))

    def _finish(self, result: CommandResult, started: float, started_utc: str) -> CommandResult:
        wall = time.perf_counter() - started
        record = {
            "command": result.command,
            "started_utc": started_utc,
            "wall_time_s": wall,
            "workers": self.workers,
        }
        for path in [p for p in result.paths if p.suffix == ".csv"]:
            write_run_sidecar(path, record)
        logger.info(f"Command {result.command} finished in {wall:.1f} s ({len(result.paths)} files)")
        return result

    def _start(self, command: str) -> Tuple[CommandResult, float, str]:
        logger.info(f"Running command {command}")
        return (
            CommandResult(command=command),
            time.perf_counter(),
            datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    def geometry(self, energy: Optional[float] = None) -> GeometrySpec:
        return self.config.to_geometry(energy)

    def sampling_plan(self, geometry: GeometrySpec, coherence: CoherenceSpec) -> SamplingPlan:
        wavelengths = sorted({e.wavelength for e in build_emitters(geometry, coherence)})
        sampling = self.config.sampling
        return build_sampling_plan(
            geometry,
            wavelengths,
            dx=sampling.dx,
            detector_half_width=sampling.detector_half_width,
            taper_fraction=sampling.taper_fraction,
        )

    def beamline(self, geometry: GeometrySpec, slits_for_convergence: Sequence[Any] = ()) -> QuantumBeamline:
        coherence = self.config.coherence_spec()
        plan = self.sampling_plan(geometry, coherence)
        if self.config.coherence.auto_converge and slits_for_convergence:
            coherence = converge_source_points(
                geometry, coherence, slits_for_convergence, plan, workers=self.workers
            )
        return QuantumBeamline(geometry, coherence, plan, workers=self.workers, progress=self.progress)

    def ray_bundle(
        self, geometry: GeometrySpec, positions: Sequence[float], shifts: Sequence[float]
    ) -> RayBundleSpec:
        bundle = self.config.ray_bundle()
        if self.config.classical.auto_converge and bundle.quadrature == "deterministic-grid":
            bundle, _ = converge_bundle(
                geometry,
                bundle,
                positions,
                shifts,
                tolerance=self.config.classical.convergence_tol,
                min_relative_flux=self.config.classical.min_relative_flux,
            )
        return bundle

    def _degrade(self, scan: FringeScan, ideal: FringeFit, index: int) -> Tuple[FringeScan, float]:
        """Apply configured drift and counting noise; returns the scan and drift factor."""
        factor = 1.0
        drift = self.config.drift
        if drift.enabled:
            model = LinearDrift(drift.amount) if drift.model == "linear" else GaussianJitter(drift.amount)
            scan = apply_drift(scan, model, ideal)
            factor = model.contrast_factor(ideal.period)
        noise = self.config.noise
        if noise.enabled:
            scan = apply_poisson_noise(scan, noise.rate, noise.dwell, self.seed + index, noise.sweeps)
        return scan, factor

    # -- commands --------------------------------------------------------

    def validate(self) -> CommandResult:
        """Sampling certification per leg and energy plus regime figures."""
        result, started, started_utc = self._start("validate")
        rows: List[Dict[str, Any]] = []
        for energy in self.config.beam.sweep():
            geometry = self.geometry(energy)
            plan = self.sampling_plan(geometry, self.config.coherence_spec())
            result.certified = result.certified and plan.certified
            for row in plan.report_rows():
                rows.append({"energy_eV": energy, **row})
            if not plan.certified:
                failed = [leg.name for leg in plan.legs if not leg.certified]
                logger.error(f"{energy_tag(energy)}: uncertified legs {failed or 'grating sampling'}")
        geometry = self.geometry()
        mz = mach_zehnder_criterion(geometry)
        metadata = {
            "dx_m": rows[0]["dx_m"] if rows else float("nan"),
            "mz_order_separation_at_g2_m": mz.order_separation_at_g2,
            "mz_beam_width_at_g2_m": mz.beam_width_at_g2,
            "mz_ratio": mz.ratio,
            "electrons_in_flight": electrons_in_flight(self.config.noise.rate, geometry),
            "certified": result.certified,
        }
        table = pd.DataFrame(rows, columns=PLAN_COLUMNS)
        self._write(result, "sampling_plan.csv", PLAN_COLUMNS, table, metadata)
        result.summary = table
        return self._finish(result, started, started_utc)

    def pattern(self) -> CommandResult:
        """Incoherent detector-plane pattern per energy with output ports."""
        result, started, started_utc = self._start("pattern")
        summary = []
        for energy in self.config.beam.sweep():
            geometry = self.geometry(energy)
            beamline = self.beamline(geometry, [geometry.detector_slit])
            profile = beamline.pattern()
            ports = find_output_ports(profile, geometry)
            mz = mach_zehnder_criterion(geometry)
            metadata = {
                "engine": "quantum",
                "energy_eV": energy,
                "wavelength_m": wavelength_from_energy(energy),
                "n_source_points": beamline.coherence.n_source_points,
                "n_energy_samples": beamline.coherence.n_energy_samples,
                "dx_m": beamline.plan.dx,
                **{f"port_{name}_m": x for name, x in ports.items()},
                "mz_ratio": mz.ratio,
            }
            tag = energy_tag(energy)
            table = pd.DataFrame({"x_m": profile.x, "intensity": profile.values})
            self._write(result, f"pattern_{tag}.csv", PATTERN_COLUMNS, table, metadata)
            self._plot(
                result,
                plot_sink.plot_pattern,
                profile,
                self.out_dir / f"pattern_{tag}.png",
                ports,
                title=f"Detector-plane intensity, {tag}",
            )
            summary.append({"energy_eV": energy, **{f"port_{k}_m": v for k, v in ports.items()}})
        result.summary = pd.DataFrame(summary)
        return self._finish(result, started, started_utc)

    def _port_position(self, geometry: GeometrySpec, beamline: Optional[QuantumBeamline]) -> float:
        scan_cfg = self.config.scan
        if scan_cfg.detector_position is not None:
            return scan_cfg.detector_position
        if beamline is None:
            return port_estimates(geometry)[str(scan_cfg.port)]
        ports = find_output_ports(beamline.pattern(), geometry)
        return ports[str(scan_cfg.port)]

    def scan(self) -> CommandResult:
        """Middle-grating scans per energy and engine with a fit summary table."""
        result, started, started_utc = self._start("scan")
        engine = self.config.engine
        shifts = self.config.scan.shifts()
        bounds = self.config.period_bounds()
        summary: List[Dict[str, Any]] = []
        index = 0
        for energy in self.config.beam.sweep():
            geometry = self.geometry(energy)
            tag = energy_tag(energy)
            beamline = self.beamline(geometry, [geometry.detector_slit]) if engine.quantum else None
            position = self._port_position(geometry, beamline)
            slit = geometry.detector_slit.with_offset(position)
            scans: List[Tuple[str, FringeScan]] = []
            if beamline is not None:
                scans.append(("quantum", beamline.scan(shifts, [slit])[0]))
            if engine.classical:
                bundle = self.ray_bundle(geometry, [position], shifts)
                scans.append(("classical", MoireDeflectometer(geometry, bundle).scan(shifts, [slit])[0]))

            plotted = []
            rows_for_energy = []
            for kind, ideal_scan in scans:
                ideal = fit_fringes(ideal_scan, bounds)
                final_scan, factor = self._degrade(ideal_scan, ideal, index)
                index += 1
                fit = fit_fringes(final_scan, bounds) if final_scan is not ideal_scan else ideal
                table = pd.DataFrame(
                    {
                        "shift_m": final_scan.shifts,
                        "flux_ideal": ideal_scan.fluxes,
                        "flux": final_scan.fluxes,
                        "fit": fit.evaluate(final_scan.shifts),
                    }
                )
                metadata = {
                    **{k: v for k, v in final_scan.metadata.items() if not isinstance(v, dict)},
                    "port": self.config.scan.port,
                    "period_m": fit.period,
                    "contrast": fit.contrast,
                }
                if kind == "classical":
                    metadata["model"] = MODEL_NOTE
                self._write(result, f"scan_{kind}_{tag}.csv", SCAN_COLUMNS, table, metadata)
                plotted.append((kind, final_scan, fit))
                rows_for_energy.append(
                    {
                        "energy_eV": energy,
                        "engine": kind,
                        "port": self.config.scan.port,
                        "detector_center_m": position,
                        "period_m": fit.period,
                        "contrast": fit.contrast,
                        "phase_rad": fit.phase,
                        "offset": fit.offset,
                        "amplitude": fit.amplitude,
                        "residual_rms": fit.residual_rms,
                        "converged": fit.converged,
                        "phase_defined": fit.phase_defined,
                        "contrast_ideal": ideal.contrast,
                        "drift_factor": factor,
                        "regime_verdict": regime_report(geometry, fit.period).get("verdict", ""),
                    }
                )
            contrasts = {row["engine"]: row["contrast"] for row in rows_for_energy}
            if "quantum" in contrasts and "classical" in contrasts:
                ratio = contrasts["quantum"] / contrasts["classical"] if contrasts["classical"] > 0 else math.inf
                for row in rows_for_energy:
                    row["quantum_over_classical"] = ratio
            summary.extend(rows_for_energy)
            self._plot(
                result,
                plot_sink.plot_scans,
                plotted,
                self.out_dir / f"scan_{tag}.png",
                title=f"Middle-grating scan, {tag}, port {self.config.scan.port}",
            )

        table = pd.DataFrame(summary, columns=SUMMARY_COLUMNS)
        metadata: Dict[str, Any] = {"period_min_m": bounds[0], "period_max_m": bounds[1]}
        if self.config.drift.enabled:
            report = drift_report(self.config.geometry.grating_period / 2.0, self.config.drift.amount)
            metadata.update({f"drift_{k}": v for k, v in report.items()})
        self._write(result, "scan_summary.csv", SUMMARY_COLUMNS, table, metadata)
        result.summary = table
        return self._finish(result, started, started_utc)

    def contrast_map(self) -> CommandResult:
        """Fitted contrast versus detector position for both engines."""
        result, started, started_utc = self._start("contrast-map")
        engine = self.config.engine
        geometry = self.geometry()
        positions = self.config.scan.positions()
        shifts = self.config.scan.shifts()
        bounds = self.config.period_bounds()
        slits = [geometry.detector_slit.with_offset(float(p)) for p in positions]
        n = positions.size
        quantum = np.full(n, np.nan)
        classical = np.full(n, np.nan)
        period_q = np.full(n, np.nan)
        period_c = np.full(n, np.nan)
        bright = np.zeros(n, dtype=bool)
        metadata: Dict[str, Any] = {"energy_eV": self.config.beam.energy}

        if engine.quantum:
            beamline = self.beamline(geometry, slits)
            for i, scan in enumerate(beamline.scan(shifts, slits)):
                fit = fit_fringes(scan, bounds)
                quantum[i], period_q[i] = fit.contrast, fit.period
            metadata["n_source_points"] = beamline.coherence.n_source_points
            metadata.update(self._dip_metadata(positions, quantum, beam_axis_at_detector(geometry)))
        if engine.classical:
            bundle = self.ray_bundle(geometry, positions, shifts)
            scans = MoireDeflectometer(geometry, bundle).scan(shifts, slits)
            fits = [(float(p), fit_fringes(scan, bounds)) for p, scan in zip(positions, scans)]
            for i, (_, fit) in enumerate(fits):
                classical[i], period_c[i] = fit.contrast, fit.period
            fraction = self.config.classical.min_relative_flux
            bright = bright_mask([fit for _, fit in fits], fraction)
            max_classical, max_position = moire_max_contrast(fits, fraction)
            metadata["classical_model"] = MODEL_NOTE
            metadata["classical_samples"] = f"{bundle.n_source_samples}x{bundle.n_collimator_samples}"
            metadata["classical_min_relative_flux"] = fraction
            metadata["max_contrast_classical"] = max_classical
            if max_position is not None:
                metadata["position_of_max_classical_m"] = max_position

        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(classical > 0, quantum / classical, np.nan)
        if engine.quantum:
            metadata["max_contrast_quantum"] = float(np.nanmax(quantum))
            metadata["position_of_max_quantum_m"] = float(positions[int(np.nanargmax(quantum))])
        if engine.quantum and engine.classical and metadata["max_contrast_classical"] > 0:
            metadata["ratio_of_maxima"] = metadata["max_contrast_quantum"] / metadata["max_contrast_classical"]

        table = pd.DataFrame(
            {
                "position_m": positions,
                "contrast_quantum": quantum,
                "contrast_classical": classical,
                "ratio": ratio,
                "period_quantum_m": period_q,
                "period_classical_m": period_c,
                "bright_classical": bright,
            }
        )
        self._write(result, "contrast_map.csv", MAP_COLUMNS, table, metadata)
        self._plot(result, plot_sink.plot_contrast_map, table, self.out_dir / "contrast_map.png")
        result.summary = table
        return self._finish(result, started, started_utc)

    @staticmethod
    def _dip_metadata(positions: np.ndarray, contrast: np.ndarray, axis: float) -> Dict[str, float]:
        """Relative contrast dip at the position nearest the beam axis."""
        centre = int(np.argmin(np.abs(positions - axis)))
        left, right = contrast[:centre], contrast[centre + 1 :]
        if left.size == 0 or right.size == 0:
            return {}
        flank = min(float(np.nanmax(left)), float(np.nanmax(right)))
        if not flank > 0:
            return {}
        return {
            "zero_order_position_m": float(positions[centre]),
            "zero_order_contrast": float(contrast[centre]),
            "zero_order_dip": 1.0 - float(contrast[centre]) / flank,
        }

    def moire(self) -> CommandResult:
        """Classical Moire deflectometer: contrast map, best-position scan and checks."""
        result, started, started_utc = self._start("moire")
        geometry = self.geometry()
        positions = self.config.scan.positions()
        shifts = self.config.scan.shifts()
        bounds = self.config.period_bounds()
        bundle = self.ray_bundle(geometry, positions, shifts)
        engine = MoireDeflectometer(geometry, bundle)
        slits = [geometry.detector_slit.with_offset(float(p)) for p in positions]
        scans = engine.scan(shifts, slits)

        rows = []
        fits = [fit_fringes(scan, bounds) for scan in scans]
        fraction = self.config.classical.min_relative_flux
        bright = bright_mask(fits, fraction)
        for position, scan, fit, is_bright in zip(positions, scans, fits, bright):
            rows.append(
                {
                    "position_m": float(position),
                    "contrast": fit.contrast,
                    "period_m": fit.period,
                    "phase_rad": fit.phase,
                    "offset": fit.offset,
                    "amplitude": fit.amplitude,
                    "converged": fit.converged,
                    "standard_error": engine.standard_error(float(np.mean(scan.fluxes))),
                    "bright": bool(is_bright),
                }
            )
        best = best_bright_index(fits, fraction)
        if best is None:
            logger.warning("no detector position receives classical flux; reporting the first position")
            best = 0
        open_geometry = geometry.with_open_gratings()
        metadata = {
            "model": MODEL_NOTE,
            "quadrature": bundle.quadrature,
            "samples": f"{bundle.n_source_samples}x{bundle.n_collimator_samples}",
            "min_relative_flux": fraction,
            "max_contrast": fits[best].contrast,
            "position_of_max_m": float(positions[best]),
            "open_grating_flux": moire_flux(open_geometry, bundle, geometry.detector_slit),
            "two_slit_acceptance": two_slit_acceptance(geometry, geometry.detector_slit),
        }
        table = pd.DataFrame(rows, columns=MOIRE_COLUMNS)
        self._write(result, "moire_map.csv", MOIRE_COLUMNS, table, metadata)

        best_scan = scans[best]
        scan_table = pd.DataFrame(
            {
                "shift_m": best_scan.shifts,
                "flux_ideal": best_scan.fluxes,
                "flux": best_scan.fluxes,
                "fit": fits[best].evaluate(best_scan.shifts),
            }
        )
        self._write(
            result,
            "moire_scan.csv",
            SCAN_COLUMNS,
            scan_table,
            {"model": MODEL_NOTE, "detector_center_m": float(positions[best]), "period_m": fits[best].period},
        )
        self._plot(
            result,
            plot_sink.plot_scans,
            [("classical", best_scan, fits[best])],
            self.out_dir / "moire_scan.png",
            title="Classical Moire scan at the best detector position",
        )
        result.summary = table
        return self._finish(result, started, started_utc)

    def talbot(self) -> CommandResult:
        """Talbot carpet behind the first grating and the regime report per energy."""
        result, started, started_utc = self._start("talbot")
        cfg = self.config.talbot
        reports = []
        for energy in self.config.beam.sweep():
            report = regime_report(self.geometry(energy))
            reports.append({k: report[k] for k in REGIME_COLUMNS})
        table = pd.DataFrame(reports, columns=REGIME_COLUMNS)
        self._write(result, "talbot_report.csv", REGIME_COLUMNS, table, {})

        geometry = self.geometry()
        z_max = self.config.talbot_z_max()
        carpet = talbot_carpet(
            geometry.gratings[0],
            geometry.beam.wavelength,
            z_max,
            cfg.n_planes,
            samples_per_period=cfg.samples_per_period,
            n_periods=cfg.n_periods,
        )
        zz, xx = np.meshgrid(carpet.z, carpet.x, indexing="ij")
        carpet_table = pd.DataFrame(
            {"z_m": zz.ravel(), "x_m": xx.ravel(), "intensity": carpet.intensity.ravel()}
        )
        self._write(
            result,
            "talbot_carpet.csv",
            CARPET_COLUMNS,
            carpet_table,
            {
                "energy_eV": self.config.beam.energy,
                "talbot_length_m": carpet.talbot_length,
                "z_max_m": z_max,
                "n_planes": cfg.n_planes,
                "last_slice_period_m": dominant_period(carpet.intensity[-1], carpet.dx),
            },
        )
        self._plot(result, plot_sink.plot_carpet, carpet, self.out_dir / "talbot_carpet.png")
        result.summary = table[["energy_eV", "talbot_length_m", "spacing_over_talbot", "nearest_integer_multiple"]]
        return self._finish(result, started, started_utc)
