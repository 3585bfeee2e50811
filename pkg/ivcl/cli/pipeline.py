"""Steps shared by the subcommands and the ablation sweeps."""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..autodiff.tensor import ParamTable
from ..baselines.training import SUPERVISED_OBJECTIVES, init_baseline_head, supervised_pretrain
from ..exceptions import ConfigurationError
from ..model.ivcl_model import init_ivcl_params
from ..nn.params import count_parameters
from ..pretraining.config import PretrainObjective
from ..pretraining.trainer import LossRecorder, PretrainResult, evaluate_reconstruction, pretrain
from ..toyworlds.config import Task
from ..toyworlds.dataset_file import EpisodeRecord, read_dataset
from ..toyworlds.splits import DatasetSplits, EpisodeSource, Partition, build_splits, pretrain_video_frames
from ..transfer.finetune import (
    Evaluation,
    FinetuneResult,
    MetricsWriter,
    TaskData,
    evaluate,
    finetune,
    init_task_head,
)
from .checkpoint import TransferLoad, load_for_transfer
from .configuration import RunConfig, format_value

logger = logging.getLogger(__name__)

DATASET_SUFFIX = ".ivtw"


def dataset_path(data_dir: Path, partition: Partition) -> Path:
    return data_dir / f"{partition}{DATASET_SUFFIX}"


def dataset_config(config: RunConfig, partition: Partition) -> Dict[str, str]:
    """Settings a dataset file depends on, stored in its header."""
    entries = {f"data.{name}": format_value(value) for name, value in config.data}
    entries["run.seed"] = format_value(config.seed)
    if partition is Partition.PRETRAIN:
        entries["pretrain.total_frames"] = format_value(config.pretrain.total_frames)
    return entries


def run_splits(config: RunConfig) -> DatasetSplits:
    return build_splits(config.data, config.seed, config.pretrain.total_frames)


def load_records(config: RunConfig, partition: Partition, data_dir: Optional[Path]) -> Optional[List[EpisodeRecord]]:
    """Records of a dataset file written by `gen-data`, None when there is none.

    Raises:
        ConfigurationError: the file was generated with other settings
    """
    if data_dir is None or not (path := dataset_path(data_dir, partition)).is_file():
        return None
    dataset = read_dataset(path)
    expected = dataset_config(config, partition)
    if differences := [k for k in expected if dataset.config.get(k) != expected[k]]:
        raise ConfigurationError(
            f"{path}: generated with other values of {', '.join(differences)}"
        )
    logger.info("Read %d %s episodes from %s", len(dataset.records), partition, path)
    return dataset.records


def task_data(config: RunConfig, partition: Partition, data_dir: Optional[Path] = None) -> TaskData:
    if (records := load_records(config, partition, data_dir)) is not None:
        return TaskData.from_episodes(records)
    return TaskData.from_episodes(run_splits(config)[partition].materialize())


def pretraining_videos(config: RunConfig, data_dir: Optional[Path] = None) -> np.ndarray:
    """(V, L, H, W, 3) uint8 videos long enough for a pretraining clip.

    Raises:
        ConfigurationError: episodes are shorter than a clip
    """
    pretrain_video_frames(config.data, config.pretrain.total_frames)
    if (records := load_records(config, Partition.PRETRAIN, data_dir)) is not None:
        return np.stack([r.pixels for r in records])
    source = run_splits(config).pretrain
    return np.stack([e.pixels for e in source.materialize()])


def heldout_videos(config: RunConfig) -> np.ndarray:
    """Videos generated like the pretraining ones from validation seeds."""
    pretrain_video_frames(config.data, config.pretrain.total_frames)
    source: EpisodeSource = run_splits(config).pretrain
    heldout = replace(source, partition=Partition.VAL, count=config.data.val_episodes)
    return np.stack([e.pixels for e in heldout.materialize()])


def init_pretrain_params(config: RunConfig) -> ParamTable:
    """Model parameters for the configured pretraining objective.

    The video MAE encodes without slots; the supervised baselines replace the
    image decoder by their own head.
    """
    objective = config.pretrain.objective
    if objective in SUPERVISED_OBJECTIVES:
        params = {
            **init_ivcl_params(config.model, config.seed, with_decoder=False),
            **init_baseline_head(
                objective, config.model, config.baseline, config.data.num_objects, config.seed
            ),
        }
    else:
        params = init_ivcl_params(
            config.model, config.seed, with_slots=objective is not PretrainObjective.VIDEO_MAE
        )
    logger.info("Initialized %d parameters in %d tensors.", count_parameters(params), len(params))
    return params


def run_pretraining(
    config: RunConfig,
    params: ParamTable,
    *,
    data_dir: Optional[Path] = None,
    recorder: Optional[LossRecorder] = None,
) -> PretrainResult:
    objective = config.pretrain.objective
    if objective in SUPERVISED_OBJECTIVES:
        if config.data.task is not Task.SHELL_GAME:
            raise ConfigurationError(
                f"pretrain.objective: {objective} needs the object annotations of the shell game"
            )
        episodes = run_splits(config).pretrain.materialize()
        return supervised_pretrain(
            params,
            episodes,
            config.model,
            config.pretrain,
            config.baseline,
            seed=config.seed,
            recorder=recorder,
        )
    return pretrain(
        params,
        pretraining_videos(config, data_dir),
        config.model,
        config.pretrain,
        seed=config.seed,
        recorder=recorder,
    )


def reconstruction_metric(config: RunConfig, params: ParamTable) -> float:
    objective = config.pretrain.objective
    if objective in SUPERVISED_OBJECTIVES:
        raise ConfigurationError(f"ablation.metric: {objective} has no reconstruction loss")
    return evaluate_reconstruction(
        params, heldout_videos(config), config.model, config.pretrain, seed=config.seed
    )


def transfer_reference(config: RunConfig) -> ParamTable:
    """Freshly initialized transfer model: encoder, temporal transformer and task head."""
    num_classes = config.transfer.resolve_num_classes(config.data.grid_size)
    return {
        **init_ivcl_params(config.model, config.seed, with_decoder=False),
        **init_task_head(config.model, num_classes, config.seed),
    }


def transfer_params(config: RunConfig, pretrained: Optional[ParamTable], name: str = "pretrained") -> TransferLoad:
    reference = transfer_reference(config)
    if pretrained is None:
        logger.info("Finetuning from random initialization.")
        return TransferLoad(params=reference, fresh=list(reference))
    return load_for_transfer(pretrained, reference, name)


def finetune_and_test(
    config: RunConfig,
    params: ParamTable,
    *,
    data_dir: Optional[Path] = None,
    metrics: Optional[MetricsWriter] = None,
) -> Tuple[FinetuneResult, Evaluation]:
    """Finetune on train, select on val, then evaluate on test."""
    train = task_data(config, Partition.TRAIN, data_dir)
    val = task_data(config, Partition.VAL, data_dir)
    result = finetune(
        params, train, val, config.model, config.transfer, seed=config.seed, metrics=metrics
    )
    test = evaluate(result.params, task_data(config, Partition.TEST, data_dir), config.model, config.transfer)
    if metrics is not None:
        metrics(result.best_epoch, str(Partition.TEST), test.loss, test.top1)
    logger.info("Test top1 %.4f over %d episodes.", test.top1, test.count)
    if test.top5 is not None:
        logger.info("Test top5 %.4f.", test.top5)
    return result, test
