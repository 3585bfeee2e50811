import pytest
from pydantic import ValidationError

from ivcl.model.config import ModelConfig, PoolMethod


def test_defaults():
    cfg = ModelConfig()
    assert cfg.pool_layer == 2
    assert cfg.pool_method is PoolMethod.SLICE
    assert cfg.grid_size == 4
    assert cfg.num_patches == 16
    assert cfg.patch_dim == 768


def test_vit_base_scale():
    cfg = ModelConfig.vit_base_scale(image_size=224)
    assert (cfg.hidden_dim, cfg.encoder_layers, cfg.pool_layer) == (768, 12, 10)
    assert cfg.num_patches == 196


def test_pool_layer_defaults_to_zero_for_shallow_encoders():
    assert ModelConfig(encoder_layers=2, temporal_layers=1).pool_layer == 0


@pytest.mark.parametrize(
    "kwargs, message",
    [
        pytest.param(dict(image_size=60), "model.patch_size", id="patch"),
        pytest.param(dict(encoder_heads=3), "model.encoder_heads", id="heads"),
        pytest.param(dict(pool_layer=4), "model.pool_layer", id="pool_layer"),
        pytest.param(dict(temporal_layers=4), "model.temporal_layers", id="temporal_layers"),
        pytest.param(dict(hidden_dim=0), "greater than", id="width"),
        pytest.param(dict(unknown=1), "extra fields", id="extra"),
    ],
)
def test_invalid(kwargs, message):
    with pytest.raises(ValidationError, match=message):
        ModelConfig(**kwargs)
