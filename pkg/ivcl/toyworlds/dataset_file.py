"""IVTW dataset files.

Layout, little-endian::

    magic "IVTW" | version u32 | config text (u32 length + UTF-8 key=value lines)
    | episode count u64 | episodes

and per episode::

    label u16 | question type u8 | frames u16 | height u16 | width u16
    | frames as raw RGB u8 | trace text (u32 length + UTF-8)
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Union

import numpy as np

from ..constants import DATASET_MAGIC, DATASET_VERSION, SHELL_GAME_QUESTION_TYPE
from ..exceptions import IntegrityError
from ..serialization import BinaryReader, BinaryWriter, Dtype
from .blicket import check_trace, parse_blicket_trace
from .exceptions import DatasetFormatError, OracleError
from .shell_game import parse_shell_trace, recompute_label
from .splits import Episode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpisodeRecord:
    label: int
    question_type: int
    pixels: np.ndarray
    """(L, H, W, 3) uint8"""
    trace: str

    @classmethod
    def from_episode(cls, episode: Episode) -> "EpisodeRecord":
        if episode.pixels is None:
            raise ValueError("Only rendered episodes can be stored.")
        return cls(int(episode.label), int(episode.question_type), episode.pixels, episode.trace())

    @property
    def frames(self) -> np.ndarray:
        return self.pixels.astype(np.float32) / 255.0

    def check(self) -> None:
        """Recompute the label from the symbolic trace.

        Raises:
            TraceError: the trace is malformed
            OracleError: the stored label or question type disagrees with the trace
        """
        if self.question_type == SHELL_GAME_QUESTION_TYPE:
            label = recompute_label(parse_shell_trace(self.trace))
            if label != self.label:
                raise OracleError(f"Stored label {self.label} differs from the replayed {label}.")
            return
        trace = parse_blicket_trace(self.trace)
        check_trace(trace)
        if (trace.label, trace.question_type) != (self.label, self.question_type):
            raise OracleError("Stored label or question type differs from the trace.")


@dataclass(frozen=True)
class DatasetFile:
    config: Dict[str, str]
    records: List[EpisodeRecord]


def _format_config(config: Dict[str, str]) -> str:
    for key in config:
        if "=" in key or "\n" in key or "\n" in str(config[key]):
            raise ValueError(f"Config entry {key!r} cannot be stored in a dataset file.")
    return "".join(f"{k}={v}\n" for k, v in config.items())


def _parse_config(text: str) -> Dict[str, str]:
    config = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise DatasetFormatError(f"Malformed config line {line!r}.")
        config[key] = value
    return config


def encode_dataset(records: Iterable[EpisodeRecord], config: Dict[str, str]) -> bytes:
    records = list(records)
    writer = BinaryWriter()
    writer.write_bytes(DATASET_MAGIC)
    writer.write(Dtype.UINT32, DATASET_VERSION)
    writer.write_text(_format_config(config))
    writer.write(Dtype.UINT64, len(records))
    for record in records:
        if record.pixels.dtype != np.uint8 or record.pixels.ndim != 4 or record.pixels.shape[-1] != 3:
            raise ValueError(f"Frames must be (L, H, W, 3) uint8, got {record.pixels.shape} {record.pixels.dtype}.")
        frames, height, width, _ = record.pixels.shape
        writer.write(Dtype.UINT16, record.label)
        writer.write(Dtype.UINT8, record.question_type)
        for dim in (frames, height, width):
            writer.write(Dtype.UINT16, dim)
        writer.write_array(record.pixels, np.uint8)
        writer.write_text(record.trace)
    return writer.getvalue()


def decode_dataset(data: bytes, name: str = "dataset") -> DatasetFile:
    """Parse a dataset file.

    Raises:
        DatasetFormatError: unknown magic or version, truncated or trailing data
    """
    reader = BinaryReader(data, name=name)
    try:
        if (magic := reader.read_bytes(len(DATASET_MAGIC))) != DATASET_MAGIC:
            raise DatasetFormatError(f"{name}: unknown magic {magic!r}.")
        if (version := reader.read(Dtype.UINT32)) != DATASET_VERSION:
            raise DatasetFormatError(f"{name}: unsupported version {version}.")
        config = _parse_config(reader.read_text())
        records = []
        for _ in range(reader.read(Dtype.UINT64)):
            label = reader.read(Dtype.UINT16)
            question_type = reader.read(Dtype.UINT8)
            shape = tuple(reader.read(Dtype.UINT16) for _ in range(3))
            pixels = reader.read_array((*shape, 3), np.uint8)
            records.append(EpisodeRecord(label, question_type, pixels, reader.read_text()))
        reader.expect_end()
    except DatasetFormatError:
        raise
    except (IntegrityError, UnicodeDecodeError) as exc:
        raise DatasetFormatError(f"{name}: {exc}") from exc
    return DatasetFile(config, records)


def write_dataset(path: Union[str, Path], records: Iterable[EpisodeRecord], config: Dict[str, str]) -> None:
    data = encode_dataset(records, config)
    Path(path).write_bytes(data)
    logger.info("Wrote %s (%d bytes)", path, len(data))


def read_dataset(path: Union[str, Path]) -> DatasetFile:
    return decode_dataset(Path(path).read_bytes(), name=str(path))
