import logging
from dataclasses import dataclass, field
from typing import IO, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff.optim import OptimizerKind, OptimizerState
from ..autodiff.tensor import ParamTable
from ..constants import LOSS_RECORD_FORMAT
from ..exceptions import ConfigurationError
from ..logging_utils import Label, Labeller
from ..model.config import ModelConfig
from ..parallel import parallel_map
from ..random_number_generator import RandomNumberGenerator, Stream
from .config import PretrainConfig, PretrainObjective
from .masking import MaskPlan, make_mask_plan, sample_clip
from .objectives import (
    image_mae_loss,
    image_mae_step,
    ivcl_loss,
    pretrain_step,
    video_mae_loss,
    video_mae_step,
)

logger = logging.getLogger(__name__)

RECONSTRUCTION_OBJECTIVES = (
    PretrainObjective.IVCL,
    PretrainObjective.IMAGE_MAE,
    PretrainObjective.VIDEO_MAE,
)


class LossRecorder:
    """Emit `step <n> loss <float>` records to a stream and to the logger."""

    def __init__(self, stream: Optional[IO[str]] = None, log: logging.Logger = logger) -> None:
        self.stream = stream
        self.log = Labeller(log, Label.STEP)
        self.losses: List[float] = []

    def __call__(self, step: int, loss: float) -> None:
        self.losses.append(loss)
        record = LOSS_RECORD_FORMAT.format(step=step, loss=loss)
        if self.stream is not None:
            self.stream.write(f"{record}\n")
        self.log.debug(record)


def count_steps(num_items: int, batch_size: int, epochs: int, max_steps: Optional[int]) -> int:
    steps = epochs * -(-num_items // batch_size)
    return steps if max_steps is None else min(steps, max_steps)


def iterate_batches(
    num_items: int, batch_size: int, rng: np.random.Generator
) -> Iterator[np.ndarray]:
    """Endless shuffled batches of item indices, reshuffled at every epoch."""
    while True:
        order = rng.permutation(num_items)
        for start in range(0, num_items, batch_size):
            yield order[start : start + batch_size]


def sample_batch(
    videos: np.ndarray,
    video_ids: Sequence[int],
    model_cfg: ModelConfig,
    pretrain_cfg: PretrainConfig,
    objective: PretrainObjective,
    rng: np.random.Generator,
    mask_rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, List[MaskPlan]]:
    """Sample one clip per video and its mask plan.

    Frames and masks are drawn anew at every visit of a video. Masks come
    from `mask_rng` when given, so the sampled clips do not depend on the
    masking settings.

    Returns:
        the clips (B, T, H, W, C) in [0, 1], or frames (B, H, W, C) for image MAE,
        and the mask plans
    """
    num_frames = videos.shape[1]
    mask_rng = mask_rng if mask_rng is not None else rng
    if objective is PretrainObjective.IMAGE_MAE:
        total, context = 1, 0
    elif objective is PretrainObjective.VIDEO_MAE:
        total, context = pretrain_cfg.total_frames, 0
    else:
        total, context = pretrain_cfg.total_frames, pretrain_cfg.context_frames
    clips, plans = [], []
    for video in video_ids:
        frame_ids = sample_clip(num_frames, total, rng)
        clips.append(videos[video, frame_ids])
        plans.append(
            make_mask_plan(total, context, model_cfg.num_patches, pretrain_cfg.mask_ratio, mask_rng)
        )
    batch = np.stack(clips).astype(np.float32) / 255.0
    if objective is PretrainObjective.IMAGE_MAE:
        batch = batch[:, 0]
    return batch, plans


_STEPS = {
    PretrainObjective.IVCL: pretrain_step,
    PretrainObjective.IMAGE_MAE: image_mae_step,
    PretrainObjective.VIDEO_MAE: video_mae_step,
}

_LOSSES = {
    PretrainObjective.IVCL: ivcl_loss,
    PretrainObjective.IMAGE_MAE: image_mae_loss,
    PretrainObjective.VIDEO_MAE: video_mae_loss,
}


@dataclass
class PretrainResult:
    params: ParamTable
    state: OptimizerState
    losses: List[float] = field(default_factory=list)


def pretrain(
    params: ParamTable,
    videos: np.ndarray,
    model_cfg: ModelConfig,
    pretrain_cfg: PretrainConfig,
    *,
    seed: int,
    state: Optional[OptimizerState] = None,
    recorder: Optional[LossRecorder] = None,
) -> PretrainResult:
    """Pretrain on a set of videos with one of the masked reconstruction objectives.

    Args:
        params: initial parameters
        videos: (V, L, H, W, C) u8 videos
        model_cfg: model configuration
        pretrain_cfg: pretraining configuration, its objective selects the step
        seed: run seed
        state: optimizer state to resume from, a fresh Adam state by default
        recorder: receives the loss of every step
    """
    objective = PretrainObjective(pretrain_cfg.objective)
    if objective not in _STEPS:
        raise ConfigurationError(f"{objective} is not a masked reconstruction objective.")
    rng = RandomNumberGenerator(seed)
    data_rng, mask_rng = rng.child(Stream.DATA), rng.child(Stream.MASKING)
    recorder = recorder if recorder is not None else LossRecorder()
    if state is None:
        state = OptimizerState.create(params, OptimizerKind.ADAM, pretrain_cfg.lr)
    steps = count_steps(len(videos), pretrain_cfg.batch_size, pretrain_cfg.epochs, pretrain_cfg.max_steps)
    logger.info(
        "Pretraining (%s) for %d steps on %d videos of %d frames.",
        objective,
        steps,
        len(videos),
        videos.shape[1],
    )
    batches = iterate_batches(len(videos), pretrain_cfg.batch_size, data_rng)
    for step in range(1, steps + 1):
        batch, plans = sample_batch(
            videos, next(batches), model_cfg, pretrain_cfg, objective, data_rng, mask_rng
        )
        outcome = _STEPS[objective](
            params,
            state,
            batch,
            plans,
            model_cfg,
            masked_only=pretrain_cfg.loss_on_masked_only,
            step=step,
            rng=rng.child(Stream.DROPOUT, step),
        )
        params, state = outcome.params, outcome.state
        recorder(step, outcome.loss)
        if step % 50 == 0 or step == steps:
            logger.info("step %d/%d: loss %.6f", step, steps, outcome.loss)
    return PretrainResult(params=params, state=state, losses=list(recorder.losses))


def evaluate_reconstruction(
    params: ParamTable,
    videos: np.ndarray,
    model_cfg: ModelConfig,
    pretrain_cfg: PretrainConfig,
    *,
    seed: int,
    drop_context: bool = False,
) -> float:
    """Average held-out reconstruction loss, one clip per video.

    Batches are evaluated in parallel, each with its own generator derived
    from the seed.
    """
    objective = PretrainObjective(pretrain_cfg.objective)
    if drop_context and objective is not PretrainObjective.IVCL:
        raise ConfigurationError("Only the IV-CL objective has context frames to drop.")
    rng = RandomNumberGenerator(seed)
    size = pretrain_cfg.batch_size
    starts = list(range(0, len(videos), size))

    def evaluate(start: int) -> Tuple[float, int]:
        ids = np.arange(start, min(start + size, len(videos)))
        batch, plans = sample_batch(
            videos, ids, model_cfg, pretrain_cfg, objective, rng.child(Stream.EVALUATION, start)
        )
        if objective is PretrainObjective.IVCL:
            output = ivcl_loss(
                params,
                batch,
                plans,
                model_cfg,
                masked_only=pretrain_cfg.loss_on_masked_only,
                drop_context=drop_context,
            )
        else:
            output = _LOSSES[objective](
                params, batch, plans, model_cfg, masked_only=pretrain_cfg.loss_on_masked_only
            )
        return output.loss.item(), len(ids)

    results = parallel_map(evaluate, starts)
    return float(sum(loss * n for loss, n in results) / sum(n for _, n in results))
