from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

PACKAGE_ROOT_DIR = Path(__file__).parent.parent.resolve()
PROJECT_ROOT_DIR = PACKAGE_ROOT_DIR.parent


class Settings(BaseSettings):
    """Process-level settings; physics parameters live in the run config instead."""

    # Application settings
    APP_NAME: str = "grating-interferometer"
    APP_VERSION: str = "0.1.0"

    # Logging settings
    LOG_LEVEL: str = Field(default="INFO", description="Root log level when --loglevel is not given")
    LOGGING_CONFIG_PATH: Path = Field(
        default=PACKAGE_ROOT_DIR / "config" / "logging_config.yaml",
        description="YAML dictConfig used by setup_logging",
    )

    # Run settings
    DEFAULT_CONFIG_PATH: Path = Field(
        default=PACKAGE_ROOT_DIR / "config" / "default_run.yaml",
        description="Run config used when --config is not given",
    )
    OUTPUT_DIR: Path = Field(default=Path("results"), description="Fallback output directory")
    WORKERS: int = Field(default=0, ge=0, description="Override runtime.workers when > 0")
    PROGRESS: bool = Field(default=False, description="Show tqdm progress bars")

    model_config = SettingsConfigDict(
        env_prefix="INTERFEROMETER_",
        env_file=str(PROJECT_ROOT_DIR / ".env"),
        env_file_encoding="utf-8",
        extra="ignore",
    )


@lru_cache()
def get_settings() -> Settings:
    return Settings()
