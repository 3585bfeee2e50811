from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, Extra, StrictBool, root_validator, validator

from ..constants import (
    DEFAULT_CONTEXT_FRAMES,
    DEFAULT_MASK_RATIO,
    DEFAULT_PRETRAIN_BATCH_SIZE,
    DEFAULT_PRETRAIN_EPOCHS,
    DEFAULT_PRETRAIN_LR,
    DEFAULT_TOTAL_FRAMES,
)
from ..typing_utils import NonNegativeInt, PositiveInt


class _BaseModel(BaseModel):
    class Config:
        extra = Extra.forbid
        frozen = True


class PretrainObjective(str, Enum):
    IVCL = "ivcl"
    IMAGE_MAE = "image_mae"
    VIDEO_MAE = "video_mae"
    DETECTION = "detection"
    CLASSIFICATION = "classification"

    __str__ = str.__str__


class PretrainConfig(_BaseModel):
    total_frames: PositiveInt = DEFAULT_TOTAL_FRAMES
    context_frames: NonNegativeInt = DEFAULT_CONTEXT_FRAMES
    mask_ratio: float = DEFAULT_MASK_RATIO
    epochs: PositiveInt = DEFAULT_PRETRAIN_EPOCHS
    batch_size: PositiveInt = DEFAULT_PRETRAIN_BATCH_SIZE
    lr: float = DEFAULT_PRETRAIN_LR
    max_steps: Optional[PositiveInt] = None
    """Stop after this many steps, whatever the number of epochs"""
    loss_on_masked_only: StrictBool = True
    """Average the reconstruction error over the masked patches only, else over every query patch"""
    objective: PretrainObjective = PretrainObjective.IVCL

    @validator("mask_ratio")
    def check_mask_ratio(cls, value: float):
        if not 0.0 < value < 1.0:
            raise ValueError(f"mask_ratio must satisfy 0 < r < 1, got {value}")
        return value

    @validator("lr")
    def check_lr(cls, value: float):
        if not value > 0.0:
            raise ValueError(f"lr must be positive, got {value}")
        return value

    @root_validator(skip_on_failure=True)
    def check_frames(cls, values: Dict[str, Any]):
        if values["context_frames"] >= values["total_frames"]:
            raise ValueError(
                f"pretrain.context_frames: must satisfy 0 <= C < T, got "
                f"C={values['context_frames']} and T={values['total_frames']}"
            )
        return values
