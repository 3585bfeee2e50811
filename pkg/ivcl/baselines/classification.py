"""Classification pretraining: the first slot acts as a [CLS] token for object counting."""

from typing import Dict, Optional, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.optim import OptimizerState, StepOutcome, minimize_step
from ..autodiff.tensor import ParamTable, Tensor
from ..model.config import ModelConfig
from ..nn.blocks import init_linear, linear
from ..nn.params import ParamBuilder, Scope
from .detection import encode_slots

CLASSIFIER_SCOPE = "classifier"


def init_classifier(builder: ParamBuilder, model_cfg: ModelConfig, num_classes: int) -> None:
    init_linear(builder, model_cfg.hidden_dim, num_classes)


def classification_loss(
    params: ParamTable,
    frames: np.ndarray,
    labels: np.ndarray,
    model_cfg: ModelConfig,
    *,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Dict[str, float]]:
    """Cross-entropy of a linear classifier on the first slot of every frame."""
    slots = encode_slots(params, frames, model_cfg, rng=rng)
    cls_token = ops.reshape(ops.take(slots, [0], axis=1), (slots.shape[0], model_cfg.hidden_dim))
    logits = linear(cls_token, Scope(params) / CLASSIFIER_SCOPE)
    accuracy = float(np.mean(logits.data.argmax(axis=-1) == labels))
    return ops.cross_entropy(logits, labels), {"accuracy": accuracy}


def classification_pretrain_step(
    params: ParamTable,
    state: OptimizerState,
    frames: np.ndarray,
    labels: np.ndarray,
    model_cfg: ModelConfig,
    *,
    step: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> StepOutcome:
    return minimize_step(
        params,
        state,
        lambda p: classification_loss(p, frames, labels, model_cfg, rng=rng),
        step=step,
    )
