import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff.optim import OptimizerKind, OptimizerState
from ..autodiff.tensor import ParamTable
from ..exceptions import ConfigurationError
from ..model.config import ModelConfig
from ..nn.params import ParamBuilder
from ..pretraining.config import PretrainConfig, PretrainObjective
from ..pretraining.trainer import LossRecorder, PretrainResult, count_steps
from ..random_number_generator import RandomNumberGenerator, Stream
from ..toyworlds.shell_game import ShellGameEpisode
from .classification import CLASSIFIER_SCOPE, classification_pretrain_step, init_classifier
from .config import BaselineConfig
from .detection import (
    DETECTION_SCOPE,
    DetectionVocab,
    build_sequence,
    detection_pretrain_step,
    init_detection_decoder,
    shell_game_boxes,
)

logger = logging.getLogger(__name__)

SUPERVISED_OBJECTIVES = (PretrainObjective.DETECTION, PretrainObjective.CLASSIFICATION)


def counting_classes(num_objects: int) -> int:
    """Counting labels range over 0..num_objects visible objects."""
    return num_objects + 1


def init_baseline_head(
    objective: PretrainObjective,
    model_cfg: ModelConfig,
    cfg: BaselineConfig,
    num_objects: int,
    seed: int,
) -> ParamTable:
    """Detection decoder or counting classifier put on top of the image encoder."""
    builder = ParamBuilder(RandomNumberGenerator(seed).child(Stream.INIT, 2))
    if objective is PretrainObjective.DETECTION:
        init_detection_decoder(builder.child(DETECTION_SCOPE), model_cfg, cfg)
    elif objective is PretrainObjective.CLASSIFICATION:
        init_classifier(builder.child(CLASSIFIER_SCOPE), model_cfg, counting_classes(num_objects))
    else:
        raise ConfigurationError(f"{objective} is not a supervised objective.")
    return builder.build()


def sample_frames(
    episodes: Sequence[ShellGameEpisode], batch_size: int, rng: np.random.Generator
) -> List[Tuple[ShellGameEpisode, int]]:
    """Random (episode, frame) pairs."""
    picks = rng.integers(len(episodes), size=batch_size)
    return [(episodes[int(i)], int(rng.integers(episodes[int(i)].num_frames))) for i in picks]


def supervised_pretrain(
    params: ParamTable,
    episodes: Sequence[ShellGameEpisode],
    model_cfg: ModelConfig,
    pretrain_cfg: PretrainConfig,
    cfg: BaselineConfig,
    *,
    seed: int,
    recorder: Optional[LossRecorder] = None,
) -> PretrainResult:
    """Pretrain the image encoder on single frames with detection or counting targets.

    Labels come from the symbolic states of the episodes.
    """
    objective = PretrainObjective(pretrain_cfg.objective)
    if objective not in SUPERVISED_OBJECTIVES:
        raise ConfigurationError(f"{objective} is not a supervised objective.")
    rng = RandomNumberGenerator(seed)
    data_rng = rng.child(Stream.DATA)
    recorder = recorder if recorder is not None else LossRecorder()
    vocab = DetectionVocab(cfg.n_bins)
    state = OptimizerState.create(params, OptimizerKind.ADAM, pretrain_cfg.lr)
    frames_per_epoch = sum(e.num_frames for e in episodes)
    steps = count_steps(frames_per_epoch, pretrain_cfg.batch_size, pretrain_cfg.epochs, pretrain_cfg.max_steps)
    logger.info("Pretraining (%s) for %d steps on %d episodes.", objective, steps, len(episodes))
    for step in range(1, steps + 1):
        picks = sample_frames(episodes, pretrain_cfg.batch_size, data_rng)
        frames = np.stack([e.pixels[f] for e, f in picks]).astype(np.float32) / 255.0
        step_rng = rng.child(Stream.DROPOUT, step)
        if objective is PretrainObjective.DETECTION:
            sequences = [build_sequence(shell_game_boxes(e, f), vocab, data_rng) for e, f in picks]
            outcome = detection_pretrain_step(
                params, state, frames, sequences, model_cfg, cfg, step=step, rng=step_rng
            )
        else:
            labels = np.asarray([e.states[f].visible_count for e, f in picks])
            outcome = classification_pretrain_step(
                params, state, frames, labels, model_cfg, step=step, rng=step_rng
            )
        params, state = outcome.params, outcome.state
        recorder(step, outcome.loss)
        if step % 50 == 0 or step == steps:
            logger.info("step %d/%d: loss %.6f accuracy %.3f", step, steps, outcome.loss, outcome.aux["accuracy"])
    return PretrainResult(params=params, state=state, losses=list(recorder.losses))
