from contextlib import nullcontext
from typing import Any, ContextManager, List, Optional

import numpy as np
import pytest

from ivcl.exceptions import ConfigurationError, DataError
from ivcl.transfer.inputs import (
    assemble_blicket_input,
    assemble_multi_image_input,
    blicket_sequence,
    shell_game_input,
    strided_frame_ids,
)


@pytest.mark.parametrize(
    "num_frames, count, stride, expected, context",
    [
        pytest.param(24, 8, None, [2, 5, 8, 11, 14, 17, 20, 23], nullcontext(), id="default_stride"),
        pytest.param(24, 1, None, [23], nullcontext(), id="single"),
        pytest.param(10, 3, 2, [5, 7, 9], nullcontext(), id="explicit_stride"),
        pytest.param(8, 8, None, list(range(8)), nullcontext(), id="all_frames"),
        pytest.param(24, 8, 4, None, pytest.raises(DataError), id="stride_too_long"),
        pytest.param(4, 5, None, None, pytest.raises(DataError), id="too_many"),
    ],
)
def test_strided_frame_ids(
    num_frames: int, count: int, stride: Optional[int], expected: Optional[List[int]], context: ContextManager[Any]
):
    with context:
        assert strided_frame_ids(num_frames, count, stride).tolist() == expected


def test_shell_game_input(rng):
    frames = np.arange(10, dtype=np.float32)[:, None, None, None] * np.ones((1, 2, 2, 3), dtype=np.float32)
    strided = shell_game_input(frames, 3)
    assert strided.frames[:, 0, 0, 0].tolist() == [5.0, 7.0, 9.0]
    assert strided.frame_ids.tolist() == [0, 1, 2]
    sampled = shell_game_input(frames, 4, rng=rng)
    picked = sampled.frames[:, 0, 0, 0]
    assert len(sampled) == 4
    assert np.all(np.diff(picked) > 0)
    assert sampled.frame_ids.tolist() == [0, 1, 2, 3]


class _Episode:
    def __init__(self, num_frames: int) -> None:
        self.frames = np.zeros((num_frames, 4, 4, 3), dtype=np.float32)


def test_blicket_input_has_seven_frames():
    sequence = assemble_blicket_input(_Episode(7))
    assert sequence.frame_ids.tolist() == list(range(7))
    with pytest.raises(DataError, match="6 context frames"):
        assemble_blicket_input(_Episode(6))
    with pytest.raises(DataError):
        blicket_sequence(np.zeros((8, 4, 4, 3)))


def test_multi_image_input():
    images = [np.full((4, 4, 3), i, dtype=np.float32) for i in range(3)]
    sequence = assemble_multi_image_input(images, max_frames=4)
    assert sequence.frames.shape == (3, 4, 4, 3)
    assert sequence.frame_ids.tolist() == [0, 1, 2]
    with pytest.raises(DataError):
        assemble_multi_image_input([], max_frames=4)
    with pytest.raises(ConfigurationError, match="model.max_frames"):
        assemble_multi_image_input(images, max_frames=2)
