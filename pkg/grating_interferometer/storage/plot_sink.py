"""PNG figures for simulation results (matplotlib, Agg backend)."""

import logging
from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from grating_interferometer.models.results import (  # noqa: E402
    FringeFit,
    FringeScan,
    IntensityProfile,
    TalbotCarpet,
)

logger = logging.getLogger(__name__)

UM = 1e6
NM = 1e9


def _save(fig: plt.Figure, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
    logger.info(f"Saved figure {path}")
    return path


def plot_pattern(
    profile: IntensityProfile,
    path: Union[str, Path],
    ports: Optional[Mapping[str, float]] = None,
    title: str = "Detector-plane intensity",
) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(profile.x * UM, profile.values, lw=0.8)
    for name, position in (ports or {}).items():
        ax.axvline(position * UM, color="tab:red", ls="--", lw=0.7)
        ax.annotate(f"port {name}", (position * UM, ax.get_ylim()[1]), ha="center", va="top", fontsize=8)
    ax.set_xlabel("detector position (um)")
    ax.set_ylabel("intensity (normalized)")
    ax.set_title(title)
    return _save(fig, path)


def plot_scans(
    scans: Sequence[Tuple[str, FringeScan, Optional[FringeFit]]],
    path: Union[str, Path],
    title: str = "Middle-grating scan",
) -> Path:
    """Scan data (markers) with fitted curves (lines), one series per label."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, scan, fit in scans:
        norm = float(np.max(scan.fluxes)) or 1.0
        points = ax.plot(scan.shifts * NM, scan.fluxes / norm, "o", ms=3, label=label)
        if fit is not None:
            fine = np.linspace(scan.shifts[0], scan.shifts[-1], 400)
            ax.plot(fine * NM, fit.evaluate(fine) / norm, "-", lw=0.8, color=points[0].get_color())
    ax.set_xlabel("middle grating shift (nm)")
    ax.set_ylabel("flux (relative)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_contrast_map(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    x = table["position_m"].to_numpy() * UM
    for column, label in (("contrast_quantum", "quantum"), ("contrast_classical", "classical")):
        if column in table and table[column].notna().any():
            ax.plot(x, table[column], "o-", ms=3, label=label)
    ax.set_xlabel("detector position (um)")
    ax.set_ylabel("contrast")
    ax.set_ylim(bottom=0)
    ax.legend(fontsize=8)
    ax.set_title("Fringe contrast across the detector plane")
    return _save(fig, path)


def plot_carpet(carpet: TalbotCarpet, path: Union[str, Path]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    extent = (
        carpet.x[0] * NM,
        carpet.x[-1] * NM,
        carpet.z[0] / carpet.talbot_length,
        carpet.z[-1] / carpet.talbot_length,
    )
    ax.imshow(carpet.intensity, aspect="auto", origin="lower", extent=extent, cmap="viridis")
    ax.set_xlabel("x (nm)")
    ax.set_ylabel("z / Talbot length")
    ax.set_title("Talbot carpet")
    return _save(fig, path)
