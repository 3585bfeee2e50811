from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, Extra, root_validator, validator

from ..nn.blocks import BlockConfig
from ..typing_utils import NonNegativeInt, PositiveInt, RangedFloat


class _BaseModel(BaseModel):
    class Config:
        extra = Extra.forbid
        frozen = True


class PoolMethod(str, Enum):
    """How slot tokens are read out of the image encoder"""

    SLICE = "slice"
    SOFT_ATTENTION = "soft_attention"
    GUMBEL_MAX = "gumbel_max"

    __str__ = str.__str__


class ModelConfig(_BaseModel):
    """Architecture of the image encoder, temporal transformer and decoder.

    Defaults are desk-scale; `vit_base_scale()` returns the ViT-B sizes.
    Encoder, temporal transformer and decoder share a single width.
    """

    image_size: PositiveInt = 64
    patch_size: PositiveInt = 16
    channels: PositiveInt = 3
    hidden_dim: PositiveInt = 128
    encoder_layers: PositiveInt = 4
    encoder_heads: PositiveInt = 4
    mlp_dim: PositiveInt = 512
    num_slots: PositiveInt = 1
    pool_layer: Optional[NonNegativeInt] = None
    """0-based encoder layer where slots are read; defaults to the last-but-one layer"""
    pool_method: PoolMethod = PoolMethod.SLICE
    temporal_layers: PositiveInt = 2
    temporal_heads: PositiveInt = 4
    decoder_layers: PositiveInt = 2
    decoder_heads: PositiveInt = 4
    max_frames: PositiveInt = 64
    dropout: RangedFloat[0.0, 0.9] = 0.0

    @validator("pool_layer", always=True)
    def default_pool_layer(cls, value: Optional[int], values: Dict[str, Any]):
        if value is None and (layers := values.get("encoder_layers")) is not None:
            return max(layers - 2, 0)
        return value

    @root_validator(skip_on_failure=True)
    def check_consistency(cls, values: Dict[str, Any]):
        if values["image_size"] % values["patch_size"]:
            raise ValueError(
                f"model.patch_size: image size {values['image_size']} is not "
                f"divisible by patch size {values['patch_size']}"
            )
        if values["hidden_dim"] % 2:
            raise ValueError(f"model.hidden_dim: must be even, got {values['hidden_dim']}")
        for heads in ("encoder_heads", "temporal_heads", "decoder_heads"):
            if values["hidden_dim"] % values[heads]:
                raise ValueError(
                    f"model.{heads}: hidden_dim {values['hidden_dim']} is not "
                    f"divisible by {values[heads]} heads"
                )
        if values["pool_layer"] >= values["encoder_layers"]:
            raise ValueError(
                f"model.pool_layer: {values['pool_layer']} must be smaller than "
                f"encoder_layers {values['encoder_layers']}"
            )
        if values["temporal_layers"] >= values["encoder_layers"]:
            raise ValueError(
                f"model.temporal_layers: {values['temporal_layers']} must be smaller than "
                f"encoder_layers {values['encoder_layers']}"
            )
        return values

    @classmethod
    def vit_base_scale(cls, **overrides: Any) -> "ModelConfig":
        """ViT-B sizes: 12 layers of width 768 with 12 heads, slots read at layer 11."""
        return cls(
            **{
                "hidden_dim": 768,
                "encoder_layers": 12,
                "encoder_heads": 12,
                "mlp_dim": 3072,
                "pool_layer": 10,
                "temporal_layers": 4,
                "temporal_heads": 12,
                "decoder_layers": 4,
                "decoder_heads": 12,
                **overrides,
            }
        )

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid_size**2

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.channels

    @property
    def encoder_block(self) -> BlockConfig:
        return BlockConfig(self.hidden_dim, self.encoder_heads, self.mlp_dim, self.dropout)

    @property
    def temporal_block(self) -> BlockConfig:
        return BlockConfig(self.hidden_dim, self.temporal_heads, self.mlp_dim, self.dropout)

    @property
    def decoder_block(self) -> BlockConfig:
        return BlockConfig(self.hidden_dim, self.decoder_heads, self.mlp_dim, self.dropout)
