from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from typing_extensions import Protocol

from ..exceptions import ConfigurationError, DataError
from ..pretraining.masking import sample_clip

BLICKET_INPUT_FRAMES = 7


class HasFrames(Protocol):
    @property
    def frames(self) -> np.ndarray:
        ...


@dataclass(frozen=True)
class FrameSequence:
    """Frames fed to the transfer path, with their temporal indices"""

    frames: np.ndarray
    """(F, H, W, C) values in [0, 1]"""
    frame_ids: np.ndarray
    """(F,) temporal embedding index of every frame"""

    def __len__(self) -> int:
        return len(self.frames)


def assemble_blicket_input(episode: HasFrames) -> FrameSequence:
    """Six context frames followed by the query frame, numbered 0 to 6.

    Raises:
        DataError: the episode does not have 7 frames
    """
    return blicket_sequence(episode.frames)


def blicket_sequence(frames: np.ndarray) -> FrameSequence:
    if len(frames) != BLICKET_INPUT_FRAMES:
        raise DataError(
            f"A blicket input holds 6 context frames and 1 query frame, got {len(frames)} frames."
        )
    return FrameSequence(frames, np.arange(BLICKET_INPUT_FRAMES))


def assemble_multi_image_input(images: Sequence[np.ndarray], max_frames: int) -> FrameSequence:
    """Treat a list of images as a pseudo-video with sequential temporal indices.

    Raises:
        DataError: no image
        ConfigurationError: more images than the temporal embedding table holds
    """
    if not len(images):
        raise DataError("A multi-image input needs at least one image.")
    if len(images) > max_frames:
        raise ConfigurationError(
            f"{len(images)} images do not fit the temporal embedding table of "
            f"{max_frames} frames (model.max_frames)."
        )
    return FrameSequence(np.stack(images), np.arange(len(images)))


def strided_frame_ids(num_frames: int, count: int, stride: Optional[int] = None) -> np.ndarray:
    """`count` frames evenly spaced by `stride`, the last one being the final frame.

    Args:
        num_frames: length of the episode
        count: number of frames to keep
        stride: spacing, the largest that fits by default

    Raises:
        DataError: the frames do not fit the episode
    """
    if count > num_frames:
        raise DataError(f"Cannot take {count} frames out of {num_frames}.")
    if stride is None:
        stride = (num_frames - 1) // (count - 1) if count > 1 else 1
    first = num_frames - 1 - stride * (count - 1)
    if first < 0:
        raise DataError(f"{count} frames with stride {stride} do not fit {num_frames} frames.")
    return first + stride * np.arange(count)


def shell_game_input(
    frames: np.ndarray,
    count: int,
    *,
    rng: Optional[np.random.Generator] = None,
    stride: Optional[int] = None,
) -> FrameSequence:
    """Frames of a shell-game episode fed to the transfer path.

    Training samples sorted random frames (pass `rng`), evaluation takes
    uniformly strided frames ending with the final one. Temporal indices
    are the positions within the selection.
    """
    if rng is not None:
        ids = sample_clip(len(frames), count, rng)
    else:
        ids = strided_frame_ids(len(frames), count, stride)
    return FrameSequence(frames[ids], np.arange(count))
