"""IVCK checkpoint files.

Layout, little-endian::

    magic "IVCK" | version u32 | config text (u32 length + UTF-8 `section.field = value` lines)
    | tensor count u32 | tensors | optimizer flag u8 | optimizer state | CRC-32 u32

and per tensor::

    name (u16 length + UTF-8) | rank u8 | dims u32 | f32 values, row-major

The optimizer state, present when the flag is 1, holds the kind (u16 length
+ UTF-8), lr, beta1, beta2, eps and weight decay as f64, the step count u64,
then a count u32 and, per trainable parameter, its name and the first and
second moments as f32 arrays of the parameter shape. The CRC-32 covers every
preceding byte.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import crcmod.predefined
import numpy as np

from ..autodiff.optim import OptimizerKind, OptimizerState
from ..autodiff.tensor import ParamTable, Tensor
from ..constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from ..exceptions import ConfigurationError, IntegrityError, IVCLError
from ..logging_utils import LogIter
from ..serialization import BinaryReader, BinaryWriter, Dtype
from .configuration import RunConfig, parse_config_text, serialize_config

logger = logging.getLogger(__name__)

_crc32 = crcmod.predefined.mkPredefinedCrcFun("crc-32")

DISCARDED_SCOPES = ("decoder/", "detection/", "classifier/")
"""Pretraining-only tensors dropped when a checkpoint is loaded for transfer"""


class CheckpointError(IVCLError):
    """A checkpoint cannot be loaded."""


class CheckpointVersionError(CheckpointError):
    """Unknown magic number or format version."""


class CheckpointShapeError(CheckpointError):
    """Stored tensors disagree with the model configuration."""


class CheckpointIntegrityError(CheckpointError, IntegrityError):
    """The checksum does not match or the file is truncated."""


@dataclass(frozen=True)
class Checkpoint:
    config: RunConfig
    params: ParamTable
    optimizer: Optional[OptimizerState] = None


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    writer = BinaryWriter()
    writer.write_bytes(CHECKPOINT_MAGIC)
    writer.write(Dtype.UINT32, CHECKPOINT_VERSION)
    writer.write_text(serialize_config(checkpoint.config))
    writer.write(Dtype.UINT32, len(checkpoint.params))
    for name, tensor in checkpoint.params.items():
        writer.write_text(name, Dtype.UINT16)
        writer.write_shape(tensor.shape)
        writer.write_array(tensor.data, np.float32)
    state = checkpoint.optimizer
    writer.write(Dtype.UINT8, int(state is not None))
    if state is not None:
        writer.write_text(state.kind.value, Dtype.UINT16)
        for value in (state.lr, state.beta1, state.beta2, state.eps, state.weight_decay):
            writer.write(Dtype.FLOAT64, value)
        writer.write(Dtype.UINT64, state.t)
        writer.write(Dtype.UINT32, len(state.m))
        for name in state.m:
            writer.write_text(name, Dtype.UINT16)
            writer.write_array(state.m[name], np.float32)
            writer.write_array(state.v[name], np.float32)
    payload = writer.getvalue()
    trailer = BinaryWriter()
    trailer.write(Dtype.UINT32, _crc32(payload))
    return payload + trailer.getvalue()


def _decode_optimizer(reader: BinaryReader, params: ParamTable, name: str) -> OptimizerState:
    kind = OptimizerKind(reader.read_text(Dtype.UINT16))
    lr, beta1, beta2, eps, weight_decay = (reader.read(Dtype.FLOAT64) for _ in range(5))
    t = reader.read(Dtype.UINT64)
    m: Dict[str, np.ndarray] = {}
    v: Dict[str, np.ndarray] = {}
    for _ in range(reader.read(Dtype.UINT32)):
        param = reader.read_text(Dtype.UINT16)
        if param not in params:
            raise CheckpointShapeError(f"{name}: optimizer state for unknown tensor '{param}'.")
        m[param] = reader.read_array(params[param].shape, np.float32)
        v[param] = reader.read_array(params[param].shape, np.float32)
    return OptimizerState(
        kind=kind,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        weight_decay=weight_decay,
        t=t,
        m=m,
        v=v,
    )


def decode_checkpoint(data: bytes, name: str = "checkpoint") -> Checkpoint:
    """Parse and verify a checkpoint.

    Raises:
        CheckpointVersionError: unknown magic number or version
        CheckpointIntegrityError: checksum mismatch or truncated content
    """
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointVersionError(f"{name}: not a checkpoint (magic {bytes(data[:4])!r}).")
    if len(data) < len(CHECKPOINT_MAGIC) + 8:
        raise CheckpointIntegrityError(f"{name}: truncated file of {len(data)} bytes.")
    payload, trailer = data[:-4], data[-4:]
    if (stored := BinaryReader(trailer).read(Dtype.UINT32)) != (computed := _crc32(payload)):
        raise CheckpointIntegrityError(
            f"{name}: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})."
        )
    reader = BinaryReader(payload, name=name)
    reader.read_bytes(len(CHECKPOINT_MAGIC))
    if (version := reader.read(Dtype.UINT32)) != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{name}: unsupported version {version}, expected {CHECKPOINT_VERSION}."
        )
    try:
        config = parse_config_text(reader.read_text(), f"{name}:config")
        params: ParamTable = {}
        for _ in range(reader.read(Dtype.UINT32)):
            tensor_name = reader.read_text(Dtype.UINT16)
            shape = reader.read_shape()
            params[tensor_name] = Tensor(reader.read_array(shape, np.float32))
        optimizer = _decode_optimizer(reader, params, name) if reader.read(Dtype.UINT8) else None
        reader.expect_end()
    except ConfigurationError:
        raise
    except (UnicodeDecodeError, ValueError) as exc:
        raise CheckpointIntegrityError(f"{name}: {exc}") from exc
    except IntegrityError as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointIntegrityError(str(exc)) from exc
    return Checkpoint(config=config, params=params, optimizer=optimizer)


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> None:
    data = encode_checkpoint(checkpoint)
    Path(path).write_bytes(data)
    logger.info("Saved %d tensors to %s (%d bytes).", len(checkpoint.params), path, len(data))


def load_checkpoint(
    path: Union[str, Path], expected: Optional[Mapping[str, Tensor]] = None
) -> Checkpoint:
    """Read a checkpoint, checking its tensors against a reference table when given.

    Raises:
        CheckpointShapeError: missing, unexpected or differently shaped tensors
    """
    checkpoint = decode_checkpoint(Path(path).read_bytes(), name=str(path))
    if expected is not None:
        check_shapes(checkpoint.params, expected, str(path))
    logger.info("Loaded %d tensors from %s.", len(checkpoint.params), path)
    return checkpoint


def _mismatches(
    params: Mapping[str, Tensor], reference: Mapping[str, Tensor], names: Sequence[str]
) -> List[str]:
    return [
        f"{n} {params[n].shape} != {reference[n].shape}"
        for n in names
        if params[n].shape != reference[n].shape
    ]


def check_shapes(params: Mapping[str, Tensor], reference: Mapping[str, Tensor], name: str) -> None:
    problems = _mismatches(params, reference, [n for n in params if n in reference])
    problems += [f"{n} missing" for n in reference if n not in params]
    problems += [f"{n} unexpected" for n in params if n not in reference]
    if problems:
        raise CheckpointShapeError(f"{name}: {'; '.join(problems)}.")


@dataclass(frozen=True)
class TransferLoad:
    params: ParamTable
    dropped: List[str] = field(default_factory=list)
    """Checkpoint tensors discarded"""
    fresh: List[str] = field(default_factory=list)
    """Reference tensors kept at their initial value"""


def load_for_transfer(
    pretrained: Mapping[str, Tensor], reference: Mapping[str, Tensor], name: str = "checkpoint"
) -> TransferLoad:
    """Start a transfer model from pretrained weights.

    Decoder and baseline-head tensors are dropped, as well as any tensor the
    reference table does not know; reference tensors absent from the
    checkpoint (the task head) keep their initial value.

    Raises:
        CheckpointShapeError: a kept tensor has another shape than in the reference
    """
    kept = [n for n in pretrained if n in reference and not n.startswith(DISCARDED_SCOPES)]
    if problems := _mismatches(pretrained, reference, kept):
        raise CheckpointShapeError(f"{name}: {'; '.join(problems)}.")
    dropped = [n for n in pretrained if n not in kept]
    fresh = [n for n in reference if n not in kept]
    params: ParamTable = {n: pretrained[n] if n in kept else t for n, t in reference.items()}
    logger.info("Dropped %d tensors: %s", len(dropped), LogIter(dropped, sep=", "))
    logger.info("Freshly initialized %d tensors: %s", len(fresh), LogIter(fresh, sep=", "))
    return TransferLoad(params=params, dropped=dropped, fresh=fresh)
