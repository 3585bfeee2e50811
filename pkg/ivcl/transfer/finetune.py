import csv
import logging
from dataclasses import dataclass, field
from typing import IO, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.optim import OptimizerKind, OptimizerState, StepOutcome, minimize_step
from ..autodiff.tensor import ParamTable, Tensor
from ..constants import METRICS_CSV_HEADER
from ..exceptions import DataError
from ..logging_utils import Label, Labeller
from ..model.config import ModelConfig
from ..model.ivcl_model import encode_video_for_transfer
from ..nn.blocks import init_linear, linear
from ..nn.params import ParamBuilder, Scope
from ..parallel import parallel_map
from ..pretraining.trainer import count_steps, iterate_batches
from ..random_number_generator import RandomNumberGenerator, Stream
from ..toyworlds.config import Task
from .config import TransferConfig
from .inputs import blicket_sequence, shell_game_input

logger = logging.getLogger(__name__)
epoch_logger = Labeller(logger, Label.EPOCH)

HEAD_SCOPE = "head"
TOP5_MIN_CLASSES = 17
"""Top-5 accuracy is only reported above 16 classes"""


def init_task_head(model_cfg: ModelConfig, num_classes: int, seed: int) -> ParamTable:
    """A single linear layer from the pooled representation to the class logits."""
    builder = ParamBuilder(RandomNumberGenerator(seed).child(Stream.INIT, 1))
    init_linear(builder.child(HEAD_SCOPE), model_cfg.hidden_dim, num_classes)
    return builder.build()


@dataclass(frozen=True)
class TaskData:
    """Episodes of a reasoning task, kept as uint8 frames."""

    pixels: np.ndarray
    """(N, L, H, W, C) uint8"""
    labels: np.ndarray
    """(N,) class ids"""

    def __post_init__(self):
        if len(self.pixels) != len(self.labels):
            raise DataError(f"{len(self.pixels)} episodes but {len(self.labels)} labels.")

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_episodes(cls, episodes: Sequence) -> "TaskData":
        """Stack episodes or dataset records carrying `pixels` and `label`."""
        return cls(
            np.stack([e.pixels for e in episodes]),
            np.asarray([int(e.label) for e in episodes], dtype=np.int64),
        )

    def concat(self, other: "TaskData") -> "TaskData":
        return TaskData(
            np.concatenate([self.pixels, other.pixels]), np.concatenate([self.labels, other.labels])
        )


def prepare_batch(
    data: TaskData,
    ids: Sequence[int],
    cfg: TransferConfig,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Frames (B, F, H, W, C) in [0, 1], temporal indices (F,) and labels (B,) of a batch.

    Shell-game frames are sampled at random with `rng`, strided without.
    """
    sequences = []
    for i in ids:
        frames = data.pixels[i].astype(np.float32) / 255.0
        if cfg.task is Task.BLICKET:
            sequences.append(blicket_sequence(frames))
        else:
            sequences.append(
                shell_game_input(frames, cfg.frames_per_example, rng=rng, stride=cfg.eval_stride)
            )
    return (
        np.stack([s.frames for s in sequences]),
        sequences[0].frame_ids,
        data.labels[np.asarray(ids)],
    )


def task_logits(
    params: ParamTable,
    frames: np.ndarray,
    frame_ids: np.ndarray,
    model_cfg: ModelConfig,
    *,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    encoding = encode_video_for_transfer(params, frames, model_cfg, frame_ids=frame_ids, rng=rng)
    return linear(encoding.pooled, Scope(params) / HEAD_SCOPE)


def _check_labels(labels: np.ndarray, num_classes: int) -> None:
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DataError(
            f"Labels must lie in [0, {num_classes}), got values in [{labels.min()}, {labels.max()}]."
        )


def finetune_loss(
    params: ParamTable,
    frames: np.ndarray,
    frame_ids: np.ndarray,
    labels: np.ndarray,
    model_cfg: ModelConfig,
    *,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Dict[str, float]]:
    """Softmax cross-entropy of the task head, and the batch accuracy."""
    logits = task_logits(params, frames, frame_ids, model_cfg, rng=rng)
    _check_labels(labels, logits.shape[-1])
    accuracy = float(np.mean(logits.data.argmax(axis=-1) == labels))
    return ops.cross_entropy(logits, labels), {"accuracy": accuracy}


def create_optimizer(params: ParamTable, cfg: TransferConfig) -> OptimizerState:
    """AdamW over every parameter, or over the task head alone in linear-probe mode."""
    trainable = [n for n in params if n.startswith(f"{HEAD_SCOPE}/")] if cfg.linear_probe else None
    return OptimizerState.create(
        params, OptimizerKind.ADAMW, cfg.lr, trainable=trainable, weight_decay=cfg.weight_decay
    )


def finetune_step(
    params: ParamTable,
    state: OptimizerState,
    frames: np.ndarray,
    frame_ids: np.ndarray,
    labels: np.ndarray,
    model_cfg: ModelConfig,
    *,
    step: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> StepOutcome:
    """One AdamW step of the encoders and the task head.

    Raises:
        DataError: a label is out of range
    """
    return minimize_step(
        params,
        state,
        lambda p: finetune_loss(p, frames, frame_ids, labels, model_cfg, rng=rng),
        step=step,
    )


@dataclass(frozen=True)
class Evaluation:
    loss: float
    top1: float
    top5: Optional[float]
    count: int


def evaluate(
    params: ParamTable,
    data: TaskData,
    model_cfg: ModelConfig,
    cfg: TransferConfig,
    *,
    workers: Optional[int] = None,
) -> Evaluation:
    """Loss and accuracy over a partition, batches evaluated in parallel.

    Evaluation frames are strided, so the result does not depend on a seed.
    """
    if not len(data):
        raise DataError("Cannot evaluate an empty partition.")
    size = cfg.batch_size

    def run(start: int) -> Tuple[float, int, int, int]:
        ids = np.arange(start, min(start + size, len(data)))
        frames, frame_ids, labels = prepare_batch(data, ids, cfg)
        logits = task_logits(params, frames, frame_ids, model_cfg)
        _check_labels(labels, logits.shape[-1])
        loss = ops.cross_entropy(logits, labels).item()
        ranked = np.argsort(-logits.data, axis=-1, kind="stable")
        top1 = int(np.sum(ranked[:, 0] == labels))
        top5 = int(np.sum((ranked[:, :5] == labels[:, None]).any(axis=-1)))
        return loss * len(ids), top1, top5, len(ids)

    results = parallel_map(run, range(0, len(data), size), workers=workers)
    count = sum(r[3] for r in results)
    num_classes = len(params[f"{HEAD_SCOPE}/b"].data)
    return Evaluation(
        loss=sum(r[0] for r in results) / count,
        top1=sum(r[1] for r in results) / count,
        top5=sum(r[2] for r in results) / count if num_classes >= TOP5_MIN_CLASSES else None,
        count=count,
    )


class MetricsWriter:
    """Write `epoch,split,loss,top1` rows."""

    def __init__(self, stream: Optional[IO[str]] = None) -> None:
        self.rows: List[Tuple[int, str, float, float]] = []
        self._writer = csv.writer(stream, lineterminator="\n") if stream is not None else None
        if self._writer is not None:
            self._writer.writerow(METRICS_CSV_HEADER)

    def __call__(self, epoch: int, split: str, loss: float, top1: float) -> None:
        self.rows.append((epoch, split, loss, top1))
        if self._writer is not None:
            self._writer.writerow((epoch, split, repr(loss), repr(top1)))


@dataclass
class FinetuneResult:
    params: ParamTable
    """Parameters of the selected epoch, or of the refit"""
    best_epoch: int
    best_val: Evaluation
    history: List[Evaluation] = field(default_factory=list)


EpochCallback = Callable[[int, ParamTable, float, float], None]


def _train(
    params: ParamTable,
    data: TaskData,
    model_cfg: ModelConfig,
    cfg: TransferConfig,
    rng: RandomNumberGenerator,
    steps: int,
    *,
    phase: int = 0,
    on_epoch: Optional[EpochCallback] = None,
) -> ParamTable:
    state = create_optimizer(params, cfg)
    data_rng = rng.child(Stream.DATA, phase)
    batches = iterate_batches(len(data), cfg.batch_size, data_rng)
    per_epoch = -(-len(data) // cfg.batch_size)
    loss_sum, correct, seen = 0.0, 0.0, 0
    for step in range(1, steps + 1):
        ids = next(batches)
        frames, frame_ids, labels = prepare_batch(data, ids, cfg, data_rng)
        outcome = finetune_step(
            params,
            state,
            frames,
            frame_ids,
            labels,
            model_cfg,
            step=step,
            rng=rng.child(Stream.DROPOUT, phase, step),
        )
        params, state = outcome.params, outcome.state
        loss_sum += outcome.loss * len(ids)
        correct += outcome.aux["accuracy"] * len(ids)
        seen += len(ids)
        if (step % per_epoch == 0 or step == steps) and on_epoch is not None:
            on_epoch(-(-step // per_epoch), params, loss_sum / seen, correct / seen)
            loss_sum, correct, seen = 0.0, 0.0, 0
    return params


@dataclass
class _Selection:
    epoch: int = 0
    params: Optional[ParamTable] = None
    val: Optional[Evaluation] = None


def finetune(
    params: ParamTable,
    train: TaskData,
    val: TaskData,
    model_cfg: ModelConfig,
    cfg: TransferConfig,
    *,
    seed: int,
    metrics: Optional[MetricsWriter] = None,
) -> FinetuneResult:
    """Finetune on the training partition, keeping the epoch with the best validation accuracy.

    Args:
        params: pretrained (or random) model parameters and a task head
        train: training episodes
        val: validation episodes
        model_cfg: model configuration
        cfg: transfer configuration
        seed: run seed
        metrics: receives the train and validation metrics of every epoch

    Raises:
        DataError: the training or the validation partition is empty
    """
    for name, data in (("training", train), ("validation", val)):
        if not len(data):
            raise DataError(f"The {name} partition is empty.")
    metrics = metrics if metrics is not None else MetricsWriter()
    rng = RandomNumberGenerator(seed)
    steps = count_steps(len(train), cfg.batch_size, cfg.epochs, cfg.max_steps)
    logger.info(
        "Finetuning on %s for %d steps (%d train, %d val episodes)%s.",
        cfg.task,
        steps,
        len(train),
        len(val),
        ", head only" if cfg.linear_probe else "",
    )
    history: List[Evaluation] = []
    best = _Selection()

    def on_epoch(epoch: int, current: ParamTable, loss: float, top1: float) -> None:
        metrics(epoch, "train", loss, top1)
        evaluation = evaluate(current, val, model_cfg, cfg)
        metrics(epoch, "val", evaluation.loss, evaluation.top1)
        history.append(evaluation)
        if evaluation.top5 is not None:
            epoch_logger.info("epoch %d: val top5 %.3f", epoch, evaluation.top5)
        epoch_logger.info(
            "epoch %d: train loss %.4f top1 %.3f, val loss %.4f top1 %.3f",
            epoch,
            loss,
            top1,
            evaluation.loss,
            evaluation.top1,
        )
        if best.val is None or evaluation.top1 > best.val.top1:
            best.epoch, best.params, best.val = epoch, current, evaluation

    _train(params, train, model_cfg, cfg, rng, steps, on_epoch=on_epoch)
    assert best.params is not None and best.val is not None
    logger.info("Selected epoch %d, val top1 %.3f.", best.epoch, best.val.top1)
    selected = best.params
    if cfg.refit_on_train_val:
        merged = train.concat(val)
        per_epoch = -(-len(merged) // cfg.batch_size)
        logger.info("Refitting on train and val for %d epochs.", best.epoch)
        selected = _train(params, merged, model_cfg, cfg, rng, best.epoch * per_epoch, phase=1)
    return FinetuneResult(params=selected, best_epoch=best.epoch, best_val=best.val, history=history)
