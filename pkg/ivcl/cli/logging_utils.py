import logging.config
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from ..logging_utils import Label, logging_config

CLI_LOGGERS = ("ivcl", "cli")
"""Package loggers and the logger of the command-line tool"""

DEFAULT_LOGGING_CONFIG: Dict[str, Any] = logging_config(
    "INFO", loggers=CLI_LOGGERS, filtered=(Label.STEP,)
)


def configure_logging(filepath: Optional[Path] = None) -> None:
    """Apply a YAML `dictConfig` file, or the default configuration."""
    if filepath is None:
        config = DEFAULT_LOGGING_CONFIG
    else:
        with filepath.open("rb") as stream:
            config = yaml.safe_load(stream)
    logging.config.dictConfig(config)


def dump_logging_configuration(**_: Any) -> None:
    yaml.safe_dump(DEFAULT_LOGGING_CONFIG, stream=sys.stdout, sort_keys=False)
