import numpy as np
import pytest
from pydantic import ValidationError

from ivcl.exceptions import ConfigurationError
from ivcl.toyworlds.attributes import attribute_combos
from ivcl.toyworlds.config import DataConfig
from ivcl.toyworlds.exceptions import InfeasibleSplitError
from ivcl.toyworlds.splits import (
    Partition,
    build_splits,
    partition_combos,
    pretrain_video_frames,
    pretraining_videos,
)

EPISODES = dict(train_episodes=3, val_episodes=2, test_episodes=3, pretrain_videos=2)


def _blicket_config(**kwargs) -> DataConfig:
    return DataConfig(task="blicket", image_size=16, **EPISODES, **kwargs)


def test_partition_combos_covers_every_attribute():
    split = partition_combos(3, 0.25, np.random.default_rng(0))
    assert len(split.test_combos) == 4
    assert len(split.train_combos) == 14
    assert set(split.train_combos) | set(split.test_combos) == set(attribute_combos(3))
    assert not set(split.train_combos) & set(split.test_combos)
    for side in (split.train_combos, split.test_combos):
        assert {c[1] for c in side} == {0, 1, 2}


@pytest.mark.parametrize("fraction", [0.0, 1.0])
def test_partition_combos_rejects_empty_sides(fraction: float):
    with pytest.raises(InfeasibleSplitError):
        partition_combos(3, fraction, np.random.default_rng(0))


def test_infeasible_split_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        build_splits(_blicket_config(split="comp", holdout_fraction=0.0), seed=0)


def test_compositional_split():
    splits = build_splits(_blicket_config(split="comp"), seed=5)
    train_combos, test_combos = set(splits.combos.train_combos), set(splits.combos.test_combos)
    for episode in splits.train.materialize(render=False, workers=1):
        assert {o.combo for o in episode.objects} <= train_combos
    for episode in splits.test.materialize(render=False, workers=1):
        assert {o.combo for o in episode.objects} & test_combos


def test_systematic_split_lit_counts():
    splits = build_splits(_blicket_config(split="sys"), seed=2)
    for partition, lit in [(Partition.TRAIN, 3), (Partition.VAL, 4), (Partition.TEST, 4), (Partition.PRETRAIN, 3)]:
        for episode in splits[partition].materialize(render=False, workers=1):
            assert sum(f.lit for f in episode.context) == lit


def test_partitions_use_distinct_seeds():
    splits = build_splits(DataConfig(image_size=8, grid_size=2, num_objects=2, num_frames=6, **EPISODES), seed=0)
    assert splits.train.episode(0, render=False).trace() != splits.test.episode(0, render=False).trace()
    assert splits.train.episode(1, render=False).trace() == splits.train.episode(1, render=False).trace()
    with pytest.raises(IndexError):
        splits.train.episode(3)


def test_materialize_does_not_depend_on_workers():
    source = build_splits(_blicket_config(), seed=1).train
    one = source.materialize(workers=1)
    many = source.materialize(workers=4)
    assert [e.trace() for e in one] == [e.trace() for e in many]
    for a, b in zip(one, many):
        np.testing.assert_array_equal(a.pixels, b.pixels)


def test_pretraining_video_length():
    shell = DataConfig(num_frames=6, image_size=8, grid_size=2, num_objects=2, **EPISODES)
    assert pretrain_video_frames(shell, 4) == 6
    assert pretrain_video_frames(shell, 10) == 10
    assert pretrain_video_frames(_blicket_config(), 7) == 7
    with pytest.raises(ConfigurationError, match="pretrain.total_frames"):
        pretrain_video_frames(_blicket_config(), 8)


def test_pretraining_videos():
    splits = build_splits(DataConfig(num_frames=6, image_size=8, grid_size=2, num_objects=2, **EPISODES), 0, 8)
    videos = pretraining_videos(splits.pretrain, workers=1)
    assert videos.shape == (2, 8, 8, 8, 3)
    assert videos.dtype == np.uint8


def test_shell_game_has_no_structured_split():
    with pytest.raises(ValidationError, match="data.split"):
        DataConfig(task="shell_game", split="sys")
