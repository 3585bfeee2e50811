"""Run configuration: typed sections, `key = value` text files and command-line overrides."""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, Extra, ValidationError, root_validator

from ..analysis.config import AnalysisConfig
from ..baselines.config import BaselineConfig
from ..constants import (
    ABLATION_CONTEXT_SIZES,
    ABLATION_FRAME_LENGTHS,
    ABLATION_MASK_RATIOS,
    ABLATION_SLOT_COUNTS,
)
from ..exceptions import ConfigurationError
from ..logging_utils import LogDict
from ..model.config import ModelConfig, PoolMethod
from ..pretraining.config import PretrainConfig
from ..toyworlds.config import DataConfig, Task
from ..transfer.config import TransferConfig
from ..typing_utils import NonNegativeInt
from ..utils import merge_dicts

logger = logging.getLogger(__name__)


class _BaseModel(BaseModel):
    class Config:
        extra = Extra.forbid
        frozen = True


class AblationAxis(str, Enum):
    MASK_RATIO = "mask_ratio"
    CONTEXT = "context"
    FRAMES = "frames"
    SLOTS = "slots"
    POOL_LAYER = "pool_layer"
    POOL_METHOD = "pool_method"

    __str__ = str.__str__


class AblationMetric(str, Enum):
    TRANSFER = "transfer"
    """Test top-1 accuracy after finetuning"""
    RECONSTRUCTION = "reconstruction"
    """Held-out masked reconstruction loss"""

    __str__ = str.__str__


class AblationConfig(_BaseModel):
    axes: List[AblationAxis] = [
        AblationAxis.MASK_RATIO,
        AblationAxis.CONTEXT,
        AblationAxis.FRAMES,
        AblationAxis.SLOTS,
    ]
    """One-dimensional sweeps to run, every other value kept at its configured default"""
    mask_ratios: List[float] = list(ABLATION_MASK_RATIOS)
    context_sizes: List[NonNegativeInt] = list(ABLATION_CONTEXT_SIZES)
    frame_lengths: List[NonNegativeInt] = list(ABLATION_FRAME_LENGTHS)
    slot_counts: List[NonNegativeInt] = list(ABLATION_SLOT_COUNTS)
    pool_layers: List[NonNegativeInt] = []
    """Pool layers swept by the pool_layer axis, every encoder layer when empty"""
    pool_methods: List[PoolMethod] = list(PoolMethod)
    metric: AblationMetric = AblationMetric.RECONSTRUCTION


class RunSection(_BaseModel):
    seed: NonNegativeInt = 0
    output_dir: str = "ivcl_run"


class RunConfig(_BaseModel):
    """Every setting of a run; cross-section constraints are checked here."""

    model: ModelConfig = ModelConfig()
    pretrain: PretrainConfig = PretrainConfig()
    transfer: TransferConfig = TransferConfig()
    data: DataConfig = DataConfig()
    baseline: BaselineConfig = BaselineConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    ablation: AblationConfig = AblationConfig()
    run: RunSection = RunSection()

    @root_validator(skip_on_failure=True)
    def check_sections(cls, values: Dict[str, Any]):
        model: ModelConfig = values["model"]
        data: DataConfig = values["data"]
        transfer: TransferConfig = values["transfer"]
        pretrain: PretrainConfig = values["pretrain"]
        if data.image_size != model.image_size:
            raise ValueError(
                f"data.image_size: {data.image_size} differs from model.image_size {model.image_size}"
            )
        if transfer.task is not data.task:
            raise ValueError(f"transfer.task: {transfer.task} differs from data.task {data.task}")
        transfer.resolve_num_classes(data.grid_size)
        if pretrain.total_frames > model.max_frames:
            raise ValueError(
                f"pretrain.total_frames: {pretrain.total_frames} exceeds model.max_frames {model.max_frames}"
            )
        if data.task is Task.SHELL_GAME:
            if transfer.frames_per_example > data.num_frames:
                raise ValueError(
                    f"transfer.frames_per_example: {transfer.frames_per_example} exceeds "
                    f"data.num_frames {data.num_frames}"
                )
            if transfer.frames_per_example > model.max_frames:
                raise ValueError(
                    f"transfer.frames_per_example: {transfer.frames_per_example} exceeds "
                    f"model.max_frames {model.max_frames}"
                )
        return values

    @property
    def output_dir(self) -> Path:
        return Path(self.run.output_dir)

    @property
    def seed(self) -> int:
        return self.run.seed


SECTIONS: Tuple[str, ...] = tuple(RunConfig.__fields__)


def _field_index() -> Dict[str, List[str]]:
    index: Dict[str, List[str]] = {}
    for section, model_field in RunConfig.__fields__.items():
        for name in model_field.type_.__fields__:
            index.setdefault(name, []).append(section)
    return index


FIELD_INDEX = _field_index()
"""Sections defining every field name"""


class ConfigParseError(ConfigurationError):
    """A configuration file or override is invalid; the message names its location."""


Location = str
"""`<file>:<line>` or `--<key>` of a configuration entry"""


def resolve_key(key: str) -> Tuple[str, str]:
    """Section and field of `section.field` or of an unambiguous bare `field`.

    Raises:
        KeyError: unknown or ambiguous key
    """
    if "." in key:
        section, _, name = key.partition(".")
        if section not in SECTIONS:
            raise KeyError(f"unknown section '{section}'")
        if name not in RunConfig.__fields__[section].type_.__fields__:
            raise KeyError(f"unknown key '{key}'")
        return section, name
    sections = FIELD_INDEX.get(key, [])
    if not sections:
        raise KeyError(f"unknown key '{key}'")
    if len(sections) > 1:
        raise KeyError(
            f"ambiguous key '{key}', use one of {', '.join(f'{s}.{key}' for s in sections)}"
        )
    return sections[0], key


def _parse_value(text: str) -> Any:
    return yaml.safe_load(text) if text.strip() else None


def _add_entry(
    config: Dict[str, Dict[str, Any]],
    locations: Dict[Tuple[str, str], Location],
    key: str,
    value_text: str,
    location: Location,
) -> None:
    try:
        section, name = resolve_key(key.strip())
    except KeyError as exc:
        raise ConfigParseError(f"{location}: {exc.args[0]}") from None
    if (section, name) in locations:
        raise ConfigParseError(
            f"{location}: {section}.{name} already set at {locations[section, name]}"
        )
    try:
        value = _parse_value(value_text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"{location}: cannot parse value {value_text.strip()!r}: {exc}") from None
    config.setdefault(section, {})[name] = value
    locations[section, name] = location


def parse_entries(
    text: str, source: str = "<config>"
) -> Tuple[Dict[str, Dict[str, Any]], Dict[Tuple[str, str], Location]]:
    """Nested `{section: {field: value}}` entries of a `key = value` text.

    Raises:
        ConfigParseError: malformed line, unknown, ambiguous or duplicate key
    """
    config: Dict[str, Dict[str, Any]] = {}
    locations: Dict[Tuple[str, str], Location] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigParseError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        _add_entry(config, locations, key, value, f"{source}:{lineno}")
    return config, locations


def parse_overrides(
    overrides: Sequence[Tuple[str, str]],
) -> Tuple[Dict[str, Dict[str, Any]], Dict[Tuple[str, str], Location]]:
    config: Dict[str, Dict[str, Any]] = {}
    locations: Dict[Tuple[str, str], Location] = {}
    for key, value in overrides:
        _add_entry(config, locations, key, value, f"--{key}")
    return config, locations


def _error_location(
    error: Dict[str, Any], locations: Dict[Tuple[str, str], Location]
) -> Tuple[Optional[Location], str]:
    loc = error["loc"]
    section = str(loc[0])
    message = error["msg"]
    name = str(loc[1]) if len(loc) > 1 else "__root__"
    if name == "__root__":
        prefix = message.split(":", 1)[0]
        if "." in prefix:
            section, _, name = prefix.partition(".")
            message = message.split(":", 1)[1].strip()
        else:
            return None, message
    return locations.get((section, name)), f"{section}.{name}: {message}"


def build_config(
    *layers: Tuple[Dict[str, Dict[str, Any]], Dict[Tuple[str, str], Location]],
) -> RunConfig:
    """Validate the merged layers, later ones taking precedence.

    Raises:
        ConfigParseError: a value or a combination of values is invalid
    """
    merged = merge_dicts(*(entries for entries, _ in layers))
    locations: Dict[Tuple[str, str], Location] = {}
    for _, layer_locations in layers:
        locations.update(layer_locations)
    try:
        return RunConfig.parse_obj(merged)
    except ValidationError as exc:
        messages = []
        for error in exc.errors():
            location, message = _error_location(error, locations)
            messages.append(f"{location}: {message}" if location else message)
        raise ConfigParseError("; ".join(messages)) from None


def parse_config_text(
    text: str, source: str = "<config>", overrides: Sequence[Tuple[str, str]] = ()
) -> RunConfig:
    return build_config(parse_entries(text, source), parse_overrides(overrides))


def parse_config(
    path: Optional[Union[str, Path]] = None, overrides: Sequence[Tuple[str, str]] = ()
) -> RunConfig:
    """Load a configuration file, defaults filling the missing keys.

    Args:
        path: `key = value` file, None for the defaults alone
        overrides: (key, value text) pairs taking precedence over the file

    Raises:
        ConfigParseError: the error message names the line or the override at fault
    """
    if path is None:
        config = parse_config_text("", overrides=overrides)
    else:
        logger.info("Loading configuration from %s.", path)
        config = parse_config_text(Path(path).read_text(), str(path), overrides)
    logger.debug("Configuration:%s", LogDict(config.dict()))
    return config


def format_value(value: Any) -> str:
    """YAML flow text parsed back to the same value."""
    if isinstance(value, Enum):
        return format_value(value.value)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        text = repr(value)
        if "e" in text and "." not in text:
            mantissa, _, exponent = text.partition("e")
            text = f"{mantissa}.0e{exponent}"
        return text
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    raise TypeError(f"Cannot serialize {value!r}.")


def serialize_config(config: RunConfig, sections: Sequence[str] = SECTIONS) -> str:
    """Every field as `section.field = value`."""
    lines = []
    for section in sections:
        for name, value in getattr(config, section):
            lines.append(f"{section}.{name} = {format_value(value)}")
    return "\n".join(lines) + "\n"


def dump_config(path: Union[str, Path], config: RunConfig) -> None:
    Path(path).write_text(serialize_config(config))
    logger.debug("Configuration dumped to %s", path)
