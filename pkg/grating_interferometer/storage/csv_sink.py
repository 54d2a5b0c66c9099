"""CSV storage for simulation tables.

Every file starts with ``#``-prefixed metadata lines (tool version, command,
seed, resolved configuration) followed by a plain CSV table. Nothing that
varies between identical runs goes into the file; wall time is written to a
``.run.json`` sidecar instead.
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from grating_interferometer import __version__

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
CONFIG_MARKER = "config:"


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class CsvSink:
    """One CSV result table with a metadata header."""

    def __init__(self, csv_path: Union[str, Path], columns: Sequence[str]):
        """
        Args:
            csv_path: Destination file.
            columns: Column order of the table.
        """
        self.csv_path = Path(csv_path)
        self.columns = list(columns)
        self._ensure_directory()

    def _ensure_directory(self) -> None:
        """Ensure the directory for the CSV file exists."""
        self.csv_path.parent.mkdir(parents=True, exist_ok=True)

    def header_lines(self, metadata: Mapping[str, Any], config_yaml: Optional[str]) -> List[str]:
        lines = [f"# tool: grating-interferometer {__version__}"]
        lines += [f"# {key}: {_format_value(value)}" for key, value in metadata.items()]
        if config_yaml:
            lines.append(f"# {CONFIG_MARKER}")
            lines += [f"#   {line}" for line in config_yaml.rstrip("\n").splitlines()]
        return lines

    def write(
        self,
        rows: Union[pd.DataFrame, Sequence[Mapping[str, Any]]],
        metadata: Mapping[str, Any],
        config_yaml: Optional[str] = None,
    ) -> Path:
        """
        Atomically write the header and table, replacing any existing file.

        Raises:
            OSError: If the file cannot be written.
        """
        df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
        df = df.reindex(columns=self.columns)
        header = "\n".join(self.header_lines(metadata, config_yaml)) + "\n"
        body = df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

        fd, tmp_name = tempfile.mkstemp(
            prefix=f".{self.csv_path.name}.", suffix=".tmp", dir=self.csv_path.parent
        )
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(header)
                f.write(body)
            os.replace(tmp_name, self.csv_path)
        except OSError as e:
            logger.error(f"Failed to write {self.csv_path}: {e}")
            Path(tmp_name).unlink(missing_ok=True)
            raise
        logger.info(f"Wrote {len(df)} rows to {self.csv_path}")
        return self.csv_path


def read_table(csv_path: Union[str, Path]) -> Tuple[Dict[str, str], pd.DataFrame]:
    """
    Read a table written by ``CsvSink``.

    Returns:
        The scalar header entries (the config block excluded) and the data.
    """
    metadata: Dict[str, str] = {}
    with open(csv_path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            text = line[1:].rstrip("\n")
            if text.startswith("   ") or text.strip() == CONFIG_MARKER:
                continue
            key, _, value = text.strip().partition(": ")
            metadata[key] = value
    return metadata, pd.read_csv(csv_path, comment="#", float_precision="round_trip")


def read_config_echo(csv_path: Union[str, Path]) -> str:
    """The resolved-configuration YAML embedded in a table header."""
    lines: List[str] = []
    inside = False
    with open(csv_path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            text = line[1:].rstrip("\n")
            if text.strip() == CONFIG_MARKER:
                inside = True
            elif inside and text.startswith("   "):
                lines.append(text[3:])
    return "\n".join(lines) + "\n"


def write_run_sidecar(csv_path: Union[str, Path], record: Mapping[str, Any]) -> Path:
    """Write run facts that differ between identical runs next to the table."""
    path = Path(csv_path)
    sidecar = path.with_name(path.stem + ".run.json")
    sidecar.write_text(json.dumps(dict(record), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Wrote run record {sidecar}")
    return sidecar
