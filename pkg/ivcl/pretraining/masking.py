from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from ..exceptions import ConfigurationError, DataError
from ..utils import round_half_up


def sample_clip(num_video_frames: int, total_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Sample `total_frames` distinct frame indices uniformly, sorted ascending.

    Raises:
        DataError: the video is shorter than the clip
    """
    if num_video_frames < total_frames:
        raise DataError(
            f"Video has {num_video_frames} frames, fewer than the {total_frames} "
            "frames of a clip."
        )
    return np.sort(rng.choice(num_video_frames, total_frames, replace=False))


def mask_count(mask_ratio: float, total_patches: int) -> int:
    """Number of masked patches of a query frame: round(r·N), halves going up."""
    return round_half_up(mask_ratio * total_patches)


@dataclass(frozen=True)
class MaskPlan:
    """Context/query split of a clip and the masked patches of each query frame."""

    total_frames: int
    total_patches: int
    context_frame_ids: Tuple[int, ...]
    masked_patch_ids: Dict[int, Tuple[int, ...]]
    """Sorted masked patches of every query frame; context frames have no entry"""

    def __post_init__(self):
        if set(self.context_frame_ids) & set(self.masked_patch_ids):
            raise ConfigurationError("A frame cannot be both context and query frame.")
        if len(self.context_frame_ids) + len(self.masked_patch_ids) != self.total_frames:
            raise ConfigurationError("Every frame must be either context or query frame.")
        if len({len(ids) for ids in self.masked_patch_ids.values()}) > 1:
            raise ConfigurationError("Query frames must mask the same number of patches.")

    @property
    def query_frame_ids(self) -> Tuple[int, ...]:
        return tuple(sorted(self.masked_patch_ids))

    @property
    def num_masked(self) -> int:
        return len(next(iter(self.masked_patch_ids.values()), ()))

    def masked(self, frame: int) -> Tuple[int, ...]:
        """Masked patches of a frame, empty for context frames."""
        return self.masked_patch_ids.get(frame, ())

    def unmasked_ids(self) -> np.ndarray:
        """(Q, u) visible patches of the query frames, in query order."""
        all_ids = np.arange(self.total_patches)
        return np.stack(
            [np.setdiff1d(all_ids, self.masked(f)) for f in self.query_frame_ids]
        ).astype(np.int64)

    def loss_weights(self, masked_only: bool = True) -> np.ndarray:
        """(Q, N) weights of the patches entering the reconstruction loss."""
        if not masked_only:
            return np.ones((len(self.masked_patch_ids), self.total_patches))
        weights = np.zeros((len(self.masked_patch_ids), self.total_patches))
        for row, frame in enumerate(self.query_frame_ids):
            weights[row, list(self.masked(frame))] = 1.0
        return weights


def make_mask_plan(
    total_frames: int,
    context_frames: int,
    total_patches: int,
    mask_ratio: float,
    rng: np.random.Generator,
) -> MaskPlan:
    """Choose the context frames uniformly, then mask round(r·N) patches per query frame.

    Raises:
        ConfigurationError: the bounds 0 <= C < T and 0 < r < 1 are violated, or a
            query frame would be entirely masked
    """
    if not 0 <= context_frames < total_frames:
        raise ConfigurationError(
            f"Context frames must satisfy 0 <= C < T, got C={context_frames}, T={total_frames}."
        )
    if not 0.0 < mask_ratio < 1.0:
        raise ConfigurationError(f"mask_ratio must satisfy 0 < r < 1, got {mask_ratio}.")
    if (num_masked := mask_count(mask_ratio, total_patches)) >= total_patches:
        raise ConfigurationError(
            f"mask_ratio {mask_ratio} masks all {total_patches} patches of a frame."
        )
    context = np.sort(rng.choice(total_frames, context_frames, replace=False))
    queries = np.setdiff1d(np.arange(total_frames), context)
    masked = {
        int(frame): tuple(
            int(i) for i in np.sort(rng.choice(total_patches, num_masked, replace=False))
        )
        for frame in queries
    }
    return MaskPlan(
        total_frames=total_frames,
        total_patches=total_patches,
        context_frame_ids=tuple(int(f) for f in context),
        masked_patch_ids=masked,
    )
