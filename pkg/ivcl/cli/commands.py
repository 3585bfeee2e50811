import csv
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from ..analysis.heatmap import export_heatmap
from ..analysis.rollout import cell_patch_mask, encoder_rollout, slot_heatmap, snitch_alignment
from ..exceptions import ConfigurationError
from ..gradcheck_suite import assert_all_passed, run_suite
from ..pretraining.trainer import LossRecorder
from ..toyworlds.config import Task
from ..toyworlds.dataset_file import EpisodeRecord, write_dataset
from ..toyworlds.shell_game import SNITCH, ShellGameEpisode
from ..toyworlds.splits import Partition
from ..transfer.finetune import MetricsWriter, evaluate
from .ablation import POOL_AXES, AblationWriter, run_ablation
from .checkpoint import Checkpoint, load_checkpoint, load_for_transfer, save_checkpoint
from .configuration import RunConfig
from .pipeline import (
    dataset_config,
    dataset_path,
    finetune_and_test,
    init_pretrain_params,
    run_pretraining,
    run_splits,
    task_data,
    transfer_params,
    transfer_reference,
)

PRETRAIN_CHECKPOINT = "pretrain.ckpt"
FINETUNE_CHECKPOINT = "finetune.ckpt"
LOSSES_FILE = "losses.txt"
METRICS_FILE = "metrics.csv"
EVAL_FILE = "eval.csv"
ABLATION_FILE = "ablation.csv"
POOL_ABLATION_FILE = "ablation_pool.csv"
HEATMAP_DIR = "heatmaps"
ALIGNMENT_FILE = "alignment.csv"
ALIGNMENT_THRESHOLD = 2.0
"""Alignment above which a slot is counted as attending to the snitch"""


def gen_data(config: RunConfig, output_dir: Path, logger: logging.Logger, **_: Any) -> None:
    splits = run_splits(config)
    for partition in Partition:
        records = [EpisodeRecord.from_episode(e) for e in splits[partition].materialize()]
        write_dataset(dataset_path(output_dir, partition), records, dataset_config(config, partition))
    logger.info("Datasets written to %s", output_dir)


def pretrain(
    config: RunConfig,
    output_dir: Path,
    logger: logging.Logger,
    data_dir: Optional[Path] = None,
    **_: Any,
) -> None:
    params = init_pretrain_params(config)
    with (output_dir / LOSSES_FILE).open("w") as stream:
        result = run_pretraining(config, params, data_dir=data_dir, recorder=LossRecorder(stream))
    logger.info("Final pretraining loss %.6f", result.losses[-1])
    save_checkpoint(output_dir / PRETRAIN_CHECKPOINT, Checkpoint(config, result.params, result.state))


def finetune(
    config: RunConfig,
    output_dir: Path,
    logger: logging.Logger,
    data_dir: Optional[Path] = None,
    checkpoint: Optional[Path] = None,
    **_: Any,
) -> None:
    pretrained = load_checkpoint(checkpoint).params if checkpoint is not None else None
    start = transfer_params(config, pretrained, str(checkpoint))
    with (output_dir / METRICS_FILE).open("w") as stream:
        result, test = finetune_and_test(config, start.params, data_dir=data_dir, metrics=MetricsWriter(stream))
    logger.info("Best epoch %d: val top1 %.4f, test top1 %.4f", result.best_epoch, result.best_val.top1, test.top1)
    save_checkpoint(output_dir / FINETUNE_CHECKPOINT, Checkpoint(config, result.params))


def _checkpoint_config(config: RunConfig, checkpoint: Checkpoint, name: str) -> RunConfig:
    """Configuration stored in a checkpoint, with the run section of the current one.

    Raises:
        ConfigurationError: the stored configuration rejects the current run section
    """
    try:
        return RunConfig.parse_obj({**checkpoint.config.dict(), "run": config.run.dict()})
    except ValidationError as exc:
        raise ConfigurationError(f"{name}: {exc}") from None


def eval_(
    config: RunConfig,
    output_dir: Path,
    logger: logging.Logger,
    data_dir: Optional[Path] = None,
    checkpoint: Optional[Path] = None,
    partition: str = "test",
    **_: Any,
) -> None:
    if checkpoint is not None:
        stored = load_checkpoint(checkpoint)
        config = _checkpoint_config(config, stored, str(checkpoint))
        start = load_for_transfer(stored.params, transfer_reference(config), str(checkpoint))
        if start.fresh:
            logger.warning("%d tensors missing from %s are randomly initialized.", len(start.fresh), checkpoint)
        params = start.params
    else:
        logger.warning("No checkpoint given, evaluating a randomly initialized model.")
        params = transfer_reference(config)
    split = Partition[partition.upper()]
    evaluation = evaluate(params, task_data(config, split, data_dir), config.model, config.transfer)
    with (output_dir / EVAL_FILE).open("w") as stream:
        MetricsWriter(stream)(0, str(split), evaluation.loss, evaluation.top1)
    logger.info("%s: loss %.4f top1 %.4f over %d episodes", split, evaluation.loss, evaluation.top1, evaluation.count)
    if evaluation.top5 is not None:
        logger.info("%s: top5 %.4f", split, evaluation.top5)


def ablate(config: RunConfig, output_dir: Path, logger: logging.Logger, **_: Any) -> None:
    with_pool = any(axis in POOL_AXES for axis in config.ablation.axes)
    with (output_dir / ABLATION_FILE).open("w") as stream:
        pool_stream = (output_dir / POOL_ABLATION_FILE).open("w") if with_pool else None
        try:
            run_ablation(config, AblationWriter(stream, pool_stream))
        finally:
            if pool_stream is not None:
                pool_stream.close()
    logger.info("Ablation results written to %s", output_dir)


def _selection(requested: Optional[List[int]], count: int, what: str) -> List[int]:
    if requested is None:
        return list(range(count))
    if bad := [i for i in requested if i >= count]:
        raise ConfigurationError(f"analysis.{what}: {bad} out of range, only {count} available")
    return list(requested)


def visualize(
    config: RunConfig,
    output_dir: Path,
    logger: logging.Logger,
    checkpoint: Optional[Path] = None,
    **_: Any,
) -> None:
    """Export per-slot rollout heatmaps of test episodes, and the snitch alignment of shell-game frames."""
    if checkpoint is not None:
        stored = load_checkpoint(checkpoint)
        config = _checkpoint_config(config, stored, str(checkpoint))
        params = stored.params
    else:
        logger.warning("No checkpoint given, visualizing a randomly initialized model.")
        params = init_pretrain_params(config)
    model, analysis = config.model, config.analysis
    heatmap_dir = output_dir / HEATMAP_DIR
    heatmap_dir.mkdir(parents=True, exist_ok=True)
    source = run_splits(config).test
    episodes = [source.episode(i) for i in range(min(analysis.episodes, len(source)))]
    grid = (model.grid_size, model.grid_size)
    alignments: List[Tuple[int, int, int, float]] = []
    for e, episode in enumerate(episodes):
        frames = _selection(analysis.frames, len(episode.pixels), "frames")
        for f in frames:
            frame = episode.pixels[f].astype(np.float32) / 255.0
            rollout = encoder_rollout(params, frame, model, analysis.residual_weight)
            for s in _selection(analysis.slots, rollout.num_slots, "slots"):
                heatmap = slot_heatmap(rollout.rollout, s, grid, rollout.num_slots)
                export_heatmap(heatmap, frame, heatmap_dir / f"episode{e}_frame{f}_slot{s}.ppm", analysis.heatmap_alpha)
                if isinstance(episode, ShellGameEpisode) and episode.states[f].visible[SNITCH]:
                    mask = cell_patch_mask(
                        episode.states[f].cells[SNITCH], episode.grid_size, model.image_size, model.patch_size
                    )
                    alignments.append((e, f, s, snitch_alignment(heatmap, mask)))
    logger.info("Heatmaps written to %s", heatmap_dir)
    if config.data.task is not Task.SHELL_GAME:
        return
    with (output_dir / ALIGNMENT_FILE).open("w") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("episode", "frame", "slot", "alignment"))
        writer.writerows((e, f, s, repr(a)) for e, f, s, a in alignments)
    best: Dict[Tuple[int, int], float] = {}
    for e, f, _, a in alignments:
        best[e, f] = max(a, best.get((e, f), 0.0))
    if best:
        aligned = sum(a >= ALIGNMENT_THRESHOLD for a in best.values()) / len(best)
        logger.info(
            "Snitch alignment proxy: best slot >= %.1fx uniform in %.1f%% of %d frames with a visible snitch",
            ALIGNMENT_THRESHOLD,
            100.0 * aligned,
            len(best),
        )


def gradcheck(logger: logging.Logger, max_entries: Optional[int] = 4, **_: Any) -> None:
    results = run_suite(max_entries=max_entries)
    for result in results:
        print(result)
    assert_all_passed(results)
    logger.info("All %d gradient checks passed.", len(results))
