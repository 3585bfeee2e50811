import logging
import logging.config
import sys
from enum import Enum
from pprint import pformat
from shutil import get_terminal_size
from typing import TYPE_CHECKING, Any, Callable, Dict, Iterable, Optional, Sequence, Union

if TYPE_CHECKING:
    _LoggerAdapter = logging.LoggerAdapter[logging.Logger]
else:
    _LoggerAdapter = logging.LoggerAdapter


class Colors(str, Enum):
    """ANSI escape sequences of the level colors"""

    BLUE = "\x1b[94m"
    GREEN = "\x1b[92m"
    YELLOW = "\x1b[93m"
    RED = "\x1b[91m"
    NONE = "\x1b[0m"

    __str__ = str.__str__


class Label(str, Enum):
    """Labels of the high-volume training records"""

    STEP = "step"
    """One record per optimizer step"""
    EPOCH = "epoch"
    """One record per finetuning epoch"""

    __str__ = str.__str__


class IVCLFormatter(logging.Formatter):
    """
    Level-colored formatter; `%(label)s` is available in the format, empty
    for unlabelled records.
    """

    LOG_FORMAT = "[%(levelname)s] [%(name)s] %(message)s"
    COLORS = {
        logging.DEBUG: Colors.BLUE,
        logging.INFO: Colors.GREEN,
        logging.WARNING: Colors.YELLOW,
        logging.ERROR: Colors.RED,
        logging.CRITICAL: Colors.RED,
    }

    def __init__(self, use_colors: Optional[bool] = None, **kwargs: Any):
        """
        Args:
            use_colors: color the records, by default when stderr is a terminal
            format: record format, `LOG_FORMAT` by default
        """
        self.use_colors = sys.stderr.isatty() if use_colors is None else use_colors
        log_format = kwargs.get("format", self.LOG_FORMAT)
        if self.use_colors:
            log_format = f"%(color)s{log_format}{Colors.NONE}"
        super().__init__(fmt=log_format)

    def format(self, record: logging.LogRecord) -> str:
        if not hasattr(record, "label"):
            record.label = ""
        if self.use_colors:
            record.color = self.COLORS.get(record.levelno, Colors.NONE)
        return super().format(record)


class Labeller(_LoggerAdapter):
    def __init__(self, logger: logging.Logger, label: Union[Label, str]) -> None:
        """LoggerAdapter adding an extra field `label` to the log records"""
        super().__init__(logger, {"label": str(label)})


class LabelFilter(logging.Filter):
    def __init__(self, labels: Sequence[str]) -> None:
        """Filter removing the log records carrying one of `labels`"""
        super().__init__()
        self.labels = {str(label) for label in labels}

    def filter(self, record: logging.LogRecord) -> bool:
        return getattr(record, "label", None) not in self.labels


def logging_config(
    level: str = "INFO",
    *,
    loggers: Sequence[str] = (),
    filtered: Sequence[Label] = (Label.STEP,),
) -> Dict[str, Any]:
    """`dictConfig` dictionary with one colored console handler.

    Args:
        level: level of the configured loggers
        loggers: named loggers to configure, the root logger when empty
        filtered: labels dropped by the console handler
    """
    handler = {"class": "logging.StreamHandler", "formatter": "default", "filters": ["labelfilter"]}

    def target() -> Dict[str, Any]:
        return {"level": level, "handlers": ["console"]}

    config: Dict[str, Any] = {
        "version": 1,
        "formatters": {
            "default": {
                "()": f"{IVCLFormatter.__module__}.{IVCLFormatter.__name__}",
                "format": IVCLFormatter.LOG_FORMAT,
            },
        },
        "filters": {
            "labelfilter": {
                "()": f"{LabelFilter.__module__}.{LabelFilter.__name__}",
                "labels": [str(label) for label in filtered],
            }
        },
        "handlers": {"console": handler},
    }
    if loggers:
        config["loggers"] = {name: target() for name in loggers}
    else:
        config["root"] = target()
    return config


def setup_logging(config: Optional[Dict[str, Any]] = None) -> None:
    """Configure logging for library users of ivcl, on the root logger by default."""
    logging.config.dictConfig(config if config is not None else logging_config())


class LogIter:
    def __init__(self, it: Iterable[Any], fmt: str = "%s", sep: str = ",") -> None:
        self.it = it
        self.fmt = fmt
        self.sep = sep

    def __str__(self) -> str:
        return self.sep.join(self.fmt % elt for elt in self.it)


class LogDict:
    """Lazy pretty-printed dictionary, optionally transformed by `fn` first."""

    def __init__(
        self,
        dct: Dict[Any, Any],
        *,
        fn: Optional[Callable[[Dict[Any, Any]], Any]] = None,
    ) -> None:
        self.dct = dct
        self.fn = fn

    def __str__(self) -> str:
        value = self.fn(self.dct) if self.fn is not None else self.dct
        return "\n" + pformat(value, width=get_terminal_size()[0])
