import logging
from dataclasses import dataclass
from enum import IntEnum
from functools import partial
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ConfigurationError
from ..parallel import parallel_map
from ..random_number_generator import RandomNumberGenerator, SeedLike, Stream
from .attributes import Combo, Material, Shape, attribute_combos
from .blicket import NUM_CONTEXT_FRAMES, BlicketEpisode, gen_blicket
from .config import DataConfig, SplitKind, Task
from .exceptions import InfeasibleSplitError
from .shell_game import ShellGameEpisode, gen_shell_game

logger = logging.getLogger(__name__)

Episode = Union[ShellGameEpisode, BlicketEpisode]

MAX_PARTITION_ATTEMPTS = 1000


class Partition(IntEnum):
    """Dataset partitions, also used as a key of the episode seeds"""

    TRAIN = 0
    VAL = 1
    TEST = 2
    PRETRAIN = 3

    def __str__(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class CompositionalSplit:
    train_combos: Tuple[Combo, ...]
    test_combos: Tuple[Combo, ...]
    """Combinations held out of training"""


def _covers_all_values(combos: Sequence[Combo], num_colors: int) -> bool:
    return (
        {c[0] for c in combos} == set(Shape)
        and {c[1] for c in combos} == set(range(num_colors))
        and {c[2] for c in combos} == set(Material)
    )


def partition_combos(num_colors: int, holdout_fraction: float, rng: np.random.Generator) -> CompositionalSplit:
    """Hold out `floor(holdout_fraction * n)` of the n attribute combinations.

    Both sides keep every shape, color and material.

    Raises:
        InfeasibleSplitError: no partition satisfies the coverage requirement
    """
    combos = attribute_combos(num_colors)
    held_out = int(holdout_fraction * len(combos))
    if not 0 < held_out < len(combos):
        raise InfeasibleSplitError(
            f"Holding out {holdout_fraction} of {len(combos)} combinations leaves an empty side."
        )
    for _ in range(MAX_PARTITION_ATTEMPTS):
        test_ids = set(int(i) for i in rng.choice(len(combos), held_out, replace=False))
        test = [c for i, c in enumerate(combos) if i in test_ids]
        train = [c for i, c in enumerate(combos) if i not in test_ids]
        if _covers_all_values(train, num_colors) and _covers_all_values(test, num_colors):
            return CompositionalSplit(tuple(train), tuple(test))
    raise InfeasibleSplitError(
        f"No partition of {len(combos)} combinations with {held_out} held out covers every attribute value."
    )


@dataclass(frozen=True)
class EpisodeSource:
    """Lazily generated partition of a dataset.

    Episode `i` is generated from the seed `(run seed, GENERATION, partition, i)`,
    so it does not depend on the order or the thread episodes are generated in.
    """

    partition: Partition
    count: int
    seed: int
    generate: Callable[..., Episode]
    """Called with an episode seed and `render`"""

    def __len__(self) -> int:
        return self.count

    def episode_seed(self, index: int) -> List[int]:
        return [self.seed, int(Stream.GENERATION), int(self.partition), index]

    def episode(self, index: int, render: bool = True) -> Episode:
        if not 0 <= index < self.count:
            raise IndexError(f"Episode {index} out of range for the {self.partition} partition.")
        return self.generate(self.episode_seed(index), render=render)

    def __iter__(self) -> Iterator[Episode]:
        return (self.episode(i) for i in range(self.count))

    def materialize(self, render: bool = True, workers: Optional[int] = None) -> List[Episode]:
        logger.info("Generating %d %s episodes", self.count, self.partition)
        return parallel_map(partial(self.episode, render=render), range(self.count), workers=workers)


@dataclass(frozen=True)
class DatasetSplits:
    train: EpisodeSource
    val: EpisodeSource
    test: EpisodeSource
    pretrain: EpisodeSource
    combos: Optional[CompositionalSplit] = None

    def __getitem__(self, partition: Partition) -> EpisodeSource:
        return getattr(self, str(partition))


def _shell_game_source(cfg: DataConfig, partition: Partition, count: int, seed: int, num_frames: int) -> EpisodeSource:
    sim = cfg.shell_game(num_frames)
    return EpisodeSource(partition, count, seed, lambda s, render: gen_shell_game(s, sim, render=render))


def _blicket_source(
    cfg: DataConfig,
    partition: Partition,
    count: int,
    seed: int,
    allowed: Optional[Sequence[Combo]] = None,
    required: Sequence[Combo] = (),
    lit_count: Optional[int] = None,
) -> EpisodeSource:
    gen = cfg.blicket()

    def generate(s: SeedLike, render: bool) -> BlicketEpisode:
        return gen_blicket(
            s, gen, allowed_combos=allowed, required_combos=required, lit_count=lit_count, render=render
        )

    return EpisodeSource(partition, count, seed, generate)


def pretrain_video_frames(cfg: DataConfig, total_frames: int) -> int:
    """Length of the pretraining videos, enough for a clip of `total_frames` frames.

    Raises:
        ConfigurationError: blicket episodes are shorter than the clip
    """
    if cfg.task is Task.BLICKET:
        if total_frames > NUM_CONTEXT_FRAMES + 1:
            raise ConfigurationError(
                f"pretrain.total_frames: blicket episodes have {NUM_CONTEXT_FRAMES + 1} frames, "
                f"cannot sample {total_frames}"
            )
        return NUM_CONTEXT_FRAMES + 1
    return max(cfg.pretrain_video_frames or cfg.num_frames, total_frames)


def build_compositional_split(cfg: DataConfig, seed: int) -> DatasetSplits:
    """Blicket partitions whose evaluation objects use attribute combinations never trained on.

    Training and pretraining episodes only use training combinations; every
    validation and test episode holds at least one held-out combination.

    Raises:
        ConfigurationError: the task is not the blicket task
        InfeasibleSplitError: the attribute grid cannot be partitioned
    """
    if cfg.task is not Task.BLICKET:
        raise ConfigurationError("data.split: only the blicket task has a compositional split")
    combos = partition_combos(
        cfg.num_colors, cfg.holdout_fraction, RandomNumberGenerator(seed).child(Stream.GENERATION)
    )
    logger.info(
        "Holding out %d of %d attribute combinations",
        len(combos.test_combos),
        len(combos.train_combos) + len(combos.test_combos),
    )
    return DatasetSplits(
        train=_blicket_source(cfg, Partition.TRAIN, cfg.train_episodes, seed, combos.train_combos),
        val=_blicket_source(cfg, Partition.VAL, cfg.val_episodes, seed, required=combos.test_combos),
        test=_blicket_source(cfg, Partition.TEST, cfg.test_episodes, seed, required=combos.test_combos),
        pretrain=_blicket_source(cfg, Partition.PRETRAIN, cfg.pretrain_videos, seed, combos.train_combos),
        combos=combos,
    )


def build_splits(cfg: DataConfig, seed: int, total_frames: int = 1) -> DatasetSplits:
    """Train, validation, test and pretraining episode sources of a run.

    Args:
        cfg: dataset configuration
        seed: run seed
        total_frames: frames of a pretraining clip, bounds the shell-game pretraining video length
    """
    if cfg.split is SplitKind.COMP:
        return build_compositional_split(cfg, seed)
    if cfg.task is Task.SHELL_GAME:
        video_frames = pretrain_video_frames(cfg, total_frames)
        return DatasetSplits(
            train=_shell_game_source(cfg, Partition.TRAIN, cfg.train_episodes, seed, cfg.num_frames),
            val=_shell_game_source(cfg, Partition.VAL, cfg.val_episodes, seed, cfg.num_frames),
            test=_shell_game_source(cfg, Partition.TEST, cfg.test_episodes, seed, cfg.num_frames),
            pretrain=_shell_game_source(cfg, Partition.PRETRAIN, cfg.pretrain_videos, seed, video_frames),
        )
    train_lit, test_lit = (cfg.sys_train_lit, cfg.sys_test_lit) if cfg.split is SplitKind.SYS else (None, None)
    return DatasetSplits(
        train=_blicket_source(cfg, Partition.TRAIN, cfg.train_episodes, seed, lit_count=train_lit),
        val=_blicket_source(cfg, Partition.VAL, cfg.val_episodes, seed, lit_count=test_lit),
        test=_blicket_source(cfg, Partition.TEST, cfg.test_episodes, seed, lit_count=test_lit),
        pretrain=_blicket_source(cfg, Partition.PRETRAIN, cfg.pretrain_videos, seed, lit_count=train_lit),
    )


def pretraining_videos(source: EpisodeSource, workers: Optional[int] = None) -> np.ndarray:
    """Rendered pretraining videos, (V, L, H, W, 3) uint8."""
    return np.stack([e.pixels for e in source.materialize(render=True, workers=workers)])
