import numpy as np
import pytest

from ivcl.cli.configuration import RunConfig, parse_config_text
from ivcl.model.config import ModelConfig

TINY_RUN_CONFIG = """\
# Smallest run exercising every stage
model.image_size = 8
model.patch_size = 4
model.hidden_dim = 8
model.encoder_layers = 2
model.encoder_heads = 2
model.mlp_dim = 16
model.num_slots = 2
model.temporal_layers = 1
model.temporal_heads = 2
model.decoder_layers = 1
model.decoder_heads = 2
model.max_frames = 8

data.image_size = 8
data.grid_size = 2
data.num_objects = 2
data.num_frames = 6
data.train_episodes = 4
data.val_episodes = 2
data.test_episodes = 2
data.pretrain_videos = 2

pretrain.total_frames = 4
pretrain.context_frames = 1
pretrain.batch_size = 2
pretrain.epochs = 1
pretrain.max_steps = 2

transfer.frames_per_example = 3
transfer.batch_size = 2
transfer.epochs = 2

baseline.n_bins = 8
baseline.max_sequence_length = 16
baseline.decoder_layers = 1
baseline.decoder_heads = 2

analysis.episodes = 1
"""


@pytest.fixture
def toy_model() -> ModelConfig:
    return ModelConfig(
        image_size=8,
        patch_size=4,
        hidden_dim=8,
        encoder_layers=2,
        encoder_heads=2,
        mlp_dim=16,
        num_slots=2,
        temporal_layers=1,
        temporal_heads=2,
        decoder_layers=1,
        decoder_heads=2,
        max_frames=8,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text(TINY_RUN_CONFIG)
    return path


@pytest.fixture
def tiny_config() -> RunConfig:
    return parse_config_text(TINY_RUN_CONFIG, "tiny.txt")
