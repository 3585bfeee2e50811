import logging

import pytest
import yaml

from ivcl.cli.logging_utils import DEFAULT_LOGGING_CONFIG, configure_logging, dump_logging_configuration
from ivcl.logging_utils import (
    Colors,
    IVCLFormatter,
    Label,
    LabelFilter,
    Labeller,
    LogDict,
    LogIter,
    logging_config,
    setup_logging,
)


def _record(level: int = logging.INFO, **extra) -> logging.LogRecord:
    record = logging.LogRecord("ivcl.test", level, __file__, 1, "hello", None, None)
    record.__dict__.update(extra)
    return record


def test_formatter_colors():
    formatted = IVCLFormatter(use_colors=True, format="%(message)s").format(_record(logging.WARNING))
    assert formatted == f"{Colors.YELLOW}hello{Colors.NONE}"
    assert IVCLFormatter(use_colors=False, format="%(message)s").format(_record()) == "hello"


@pytest.mark.parametrize(
    "extra, expected",
    [
        pytest.param({}, "[] hello", id="unlabelled"),
        pytest.param({"label": "epoch"}, "[epoch] hello", id="labelled"),
    ],
)
def test_formatter_label_field(extra, expected: str):
    formatter = IVCLFormatter(use_colors=False, format="[%(label)s] %(message)s")
    assert formatter.format(_record(**extra)) == expected


@pytest.mark.parametrize(
    "extra, kept",
    [
        pytest.param({}, True, id="unlabelled"),
        pytest.param({"label": "epoch"}, True, id="other_label"),
        pytest.param({"label": "step"}, False, id="filtered"),
    ],
)
def test_label_filter(extra, kept: bool):
    assert LabelFilter([Label.STEP]).filter(_record(**extra)) is kept


def test_labeller_adds_the_label(caplog):
    with caplog.at_level(logging.DEBUG, logger="ivcl.test.labeller"):
        Labeller(logging.getLogger("ivcl.test.labeller"), Label.STEP).debug("step 1 loss 0.5")
    assert caplog.records[-1].label == "step"


def test_lazy_formatters():
    assert str(LogIter([1, 2], fmt="<%s>", sep=" ")) == "<1> <2>"
    assert "'a': 1" in str(LogDict({"a": 1}))
    assert str(LogDict({"a": 1}, fn=lambda d: list(d))).strip() == "['a']"


@pytest.mark.parametrize(
    "loggers, configured",
    [
        pytest.param((), {"root"}, id="root"),
        pytest.param(("ivcl", "cli"), {"loggers"}, id="named"),
    ],
)
def test_logging_config_targets(loggers, configured):
    config = logging_config("DEBUG", loggers=loggers, filtered=(Label.STEP, Label.EPOCH))
    assert configured <= set(config)
    assert ({"root", "loggers"} - configured).isdisjoint(config)
    assert config["filters"]["labelfilter"]["labels"] == ["step", "epoch"]


def test_logging_configuration(tmp_path, capsys):
    dump_logging_configuration()
    text = capsys.readouterr().out
    assert yaml.safe_load(text) == DEFAULT_LOGGING_CONFIG
    path = tmp_path / "logging.yml"
    path.write_text(text)
    configure_logging(path)
    assert logging.getLogger("ivcl").level == logging.INFO
    configure_logging()
    assert DEFAULT_LOGGING_CONFIG["loggers"]["cli"]["level"] == "INFO"


def test_setup_logging_for_library_users():
    setup_logging()
    root = logging.getLogger()
    assert root.level == logging.INFO
    assert any(isinstance(h.formatter, IVCLFormatter) for h in root.handlers)
