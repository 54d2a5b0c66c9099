"""Command-line interface for the three-grating interferometer simulator."""

import logging
import sys
from enum import IntEnum
from pathlib import Path
from typing import Annotated, Optional

import typer
from pydantic import ValidationError

from grating_interferometer.config.run_config import load_run_config
from grating_interferometer.config.settings import get_settings
from grating_interferometer.core.experiments import CommandResult, ExperimentRunner
from grating_interferometer.errors import (
    ConfigError,
    GeometryError,
    InterferometerError,
    SamplingViolation,
)
from grating_interferometer.utils.logging_utils import setup_logging

app = typer.Typer(help="Three-grating electron interferometer simulator (quantum and classical engines)")
logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    IO_ERROR = 1
    CONFIG_ERROR = 2
    SAMPLING_ERROR = 3
    NUMERIC_ERROR = 4


ConfigOption = Annotated[Optional[str], typer.Option("--config", "-c", help="Path to the run configuration YAML")]
OutOption = Annotated[Optional[str], typer.Option("--out", "-o", help="Output directory (overrides output.directory)")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", help="Seed override for runtime.seed")]
LogLevelOption = Annotated[Optional[str], typer.Option("--loglevel", "-l", help="Logging level")]
VerboseOption = Annotated[bool, typer.Option("--verbose", "-v", help="Enable debug logging")]


def _report(result: CommandResult) -> None:
    if result.summary is not None and not result.summary.empty:
        typer.echo(result.summary.to_string(index=False))
    for path in result.paths:
        typer.echo(f"wrote {path}")


def run_command(
    command: str,
    config: Optional[str],
    out: Optional[str],
    seed: Optional[int],
    loglevel: Optional[str],
    verbose: bool,
) -> None:
    """Load the config, run one experiment command and exit with its status code."""
    settings = get_settings()
    setup_logging("DEBUG" if verbose else (loglevel or settings.LOG_LEVEL), settings.LOGGING_CONFIG_PATH)
    config_path = Path(config) if config else settings.DEFAULT_CONFIG_PATH
    logger.info(f"Starting sim {command} with config {config_path}")

    try:
        run_config = load_run_config(config_path)
        if seed is not None:
            run_config = run_config.with_overrides(runtime={"seed": seed})
        runner = ExperimentRunner(run_config, Path(out) if out else None, settings)
        result = getattr(runner, command.replace("-", "_"))()
    except (ConfigError, GeometryError, ValidationError) as e:
        logger.critical(f"Invalid configuration: {e}")
        typer.echo(f"config error: {e}", err=True)
        sys.exit(ExitCode.CONFIG_ERROR)
    except SamplingViolation as e:
        logger.critical(f"Sampling certification failed: {e}")
        typer.echo(f"sampling error: {e}", err=True)
        sys.exit(ExitCode.SAMPLING_ERROR)
    except InterferometerError as e:
        logger.critical(f"Numerical failure: {e}", exc_info=True)
        typer.echo(f"numeric error: {e}", err=True)
        sys.exit(ExitCode.NUMERIC_ERROR)
    except OSError as e:
        logger.critical(f"I/O failure: {e}")
        typer.echo(f"i/o error: {e}", err=True)
        sys.exit(ExitCode.IO_ERROR)
    except Exception as e:
        logger.critical(f"Unhandled exception: {str(e)}", exc_info=True)
        sys.exit(ExitCode.IO_ERROR)

    _report(result)
    if not result.certified:
        logger.error("One or more legs failed sampling certification")
        sys.exit(ExitCode.SAMPLING_ERROR)


@app.command()
def validate(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    loglevel: LogLevelOption = None,
    verbose: VerboseOption = False,
) -> None:
    """
    Build the sampling plan and print per-leg Nyquist margins.

    Exits with status 3 if any leg is not certified.
    """
    run_command("validate", config, out, seed, loglevel, verbose)


@app.command()
def pattern(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    loglevel: LogLevelOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Detector-plane intensity pattern with the output ports marked."""
    run_command("pattern", config, out, seed, loglevel, verbose)


@app.command()
def scan(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    loglevel: LogLevelOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Middle-grating scans and fringe fits for each energy and engine."""
    run_command("scan", config, out, seed, loglevel, verbose)


@app.command("contrast-map")
def contrast_map(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    loglevel: LogLevelOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Fringe contrast versus detector position, quantum against classical."""
    run_command("contrast-map", config, out, seed, loglevel, verbose)


@app.command()
def moire(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    loglevel: LogLevelOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Classical straight-ray Moire deflectometer over the same geometry."""
    run_command("moire", config, out, seed, loglevel, verbose)


@app.command()
def talbot(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    loglevel: LogLevelOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Talbot carpet and the Talbot-length regime report."""
    run_command("talbot", config, out, seed, loglevel, verbose)


def main() -> None:
    """Entry point for the CLI."""
    app()


if __name__ == "__main__":
    main()
