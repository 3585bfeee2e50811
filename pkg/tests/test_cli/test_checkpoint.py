import numpy as np
import pytest

from ivcl.autodiff.optim import OptimizerKind, OptimizerState
from ivcl.autodiff.tensor import Tensor
from ivcl.cli.checkpoint import (
    Checkpoint,
    CheckpointIntegrityError,
    CheckpointShapeError,
    CheckpointVersionError,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    load_for_transfer,
    save_checkpoint,
)
from ivcl.cli.pipeline import transfer_reference
from ivcl.constants import CHECKPOINT_MAGIC
from ivcl.exceptions import IntegrityError
from ivcl.model.ivcl_model import init_ivcl_params


@pytest.fixture
def checkpoint(tiny_config) -> Checkpoint:
    params = init_ivcl_params(tiny_config.model, 0)
    state = OptimizerState.create(params, OptimizerKind.ADAMW, 1e-3, weight_decay=0.05)
    return Checkpoint(tiny_config, params, state)


def test_round_trip_is_byte_identical(checkpoint):
    data = encode_checkpoint(checkpoint)
    assert data[:4] == CHECKPOINT_MAGIC
    decoded = decode_checkpoint(data)
    assert decoded.config == checkpoint.config
    assert list(decoded.params) == list(checkpoint.params)
    for name, tensor in checkpoint.params.items():
        np.testing.assert_array_equal(decoded.params[name].data, tensor.data)
    assert decoded.optimizer.kind is OptimizerKind.ADAMW
    assert decoded.optimizer.weight_decay == 0.05
    assert encode_checkpoint(decoded) == data


def test_checkpoint_without_optimizer(tmp_path, checkpoint):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, Checkpoint(checkpoint.config, checkpoint.params))
    loaded = load_checkpoint(path, expected=checkpoint.params)
    assert loaded.optimizer is None


def test_flipped_byte(checkpoint):
    data = bytearray(encode_checkpoint(checkpoint))
    data[len(data) // 2] ^= 0xFF
    with pytest.raises(CheckpointIntegrityError, match="checksum"):
        decode_checkpoint(bytes(data))
    assert issubclass(CheckpointIntegrityError, IntegrityError)


def test_truncated_file(checkpoint):
    with pytest.raises(CheckpointIntegrityError):
        decode_checkpoint(encode_checkpoint(checkpoint)[:-1])
    with pytest.raises(CheckpointIntegrityError):
        decode_checkpoint(CHECKPOINT_MAGIC + b"\x01")


def test_unknown_magic(checkpoint):
    with pytest.raises(CheckpointVersionError):
        decode_checkpoint(b"NOPE" + encode_checkpoint(checkpoint)[4:])


def test_shape_check(tmp_path, checkpoint):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, checkpoint)
    expected = dict(checkpoint.params)
    expected.pop("encoder/slots")
    with pytest.raises(CheckpointShapeError, match="encoder/slots unexpected"):
        load_checkpoint(path, expected=expected)
    expected["encoder/slots"] = Tensor(np.zeros((5, 8)))
    with pytest.raises(CheckpointShapeError, match="encoder/slots"):
        load_checkpoint(path, expected=expected)


def test_load_for_transfer(tiny_config, checkpoint):
    reference = transfer_reference(tiny_config)
    loaded = load_for_transfer(checkpoint.params, reference)
    assert list(loaded.params) == list(reference)
    assert set(loaded.fresh) == {"head/w", "head/b"}
    assert loaded.dropped and all(n.startswith("decoder/") for n in loaded.dropped)
    assert loaded.params["encoder/slots"] is checkpoint.params["encoder/slots"]
    assert loaded.params["head/w"] is reference["head/w"]


def test_load_for_transfer_rejects_other_shapes(tiny_config, checkpoint):
    pretrained = dict(checkpoint.params)
    pretrained["encoder/slots"] = Tensor(np.zeros((5, 8)))
    with pytest.raises(CheckpointShapeError):
        load_for_transfer(pretrained, transfer_reference(tiny_config))
