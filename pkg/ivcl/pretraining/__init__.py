from .config import PretrainConfig, PretrainObjective
from .masking import MaskPlan, make_mask_plan, mask_count, sample_clip
from .objectives import (
    ReconstructionOutput,
    image_mae_loss,
    image_mae_step,
    ivcl_loss,
    masked_reconstruction,
    pretrain_step,
    reconstruction_loss,
    video_mae_loss,
    video_mae_step,
)
from .trainer import LossRecorder, PretrainResult, evaluate_reconstruction, pretrain

__all__ = [
    "LossRecorder",
    "MaskPlan",
    "PretrainConfig",
    "PretrainObjective",
    "PretrainResult",
    "ReconstructionOutput",
    "evaluate_reconstruction",
    "image_mae_loss",
    "image_mae_step",
    "ivcl_loss",
    "make_mask_plan",
    "mask_count",
    "masked_reconstruction",
    "pretrain",
    "pretrain_step",
    "reconstruction_loss",
    "sample_clip",
    "video_mae_loss",
    "video_mae_step",
]
