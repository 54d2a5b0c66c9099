import logging
import logging.config
from pathlib import Path
from typing import Optional, Union

import yaml

DEFAULT_LOGGING_CONFIG_PATH = Path(__file__).parent.parent / "config" / "logging_config.yaml"


def setup_logging(
    level: Optional[str] = None,
    config_path: Union[str, Path, None] = None,
) -> None:
    """
    Set up logging from a YAML dictConfig file.

    Args:
        level: Root log level overriding the file's (DEBUG, INFO, ...).
        config_path: Logging configuration YAML; the packaged one by default.
    """
    config_path = Path(config_path) if config_path else DEFAULT_LOGGING_CONFIG_PATH
    if config_path.exists():
        try:
            with open(config_path, "rt", encoding="utf-8") as f:
                log_config = yaml.safe_load(f.read())
            if level:
                log_config.setdefault("root", {})["level"] = level.upper()
            logging.config.dictConfig(log_config)
            logging.getLogger(__name__).debug(f"Logging configured from {config_path}")
            return
        except Exception as e:
            logging.basicConfig(level=(level or "INFO").upper())
            logging.error(f"Error loading logging configuration from {config_path}: {e}. Using basicConfig.")
            return
    logging.basicConfig(level=(level or "INFO").upper())
    logging.warning(f"Logging configuration file not found at {config_path}. Using basicConfig.")
