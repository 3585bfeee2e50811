from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..autodiff import ops
from ..autodiff.optim import OptimizerState, StepOutcome, minimize_step
from ..autodiff.tensor import ParamTable, Tensor
from ..exceptions import ConfigurationError
from ..model.config import ModelConfig
from ..model.decoder import decode_frame
from ..model.encoder import encode_image, pool_slots
from ..model.ivcl_model import DECODER_SCOPE, ENCODER_SCOPE, TEMPORAL_SCOPE
from ..model.temporal import temporal_forward
from ..nn.blocks import patchify
from ..nn.params import Scope
from .masking import MaskPlan


@dataclass(frozen=True)
class ReconstructionOutput:
    loss: Tensor
    predictions: Tensor
    """Reconstructed query frames (B, Q, N, P·P·C)"""
    targets: np.ndarray
    """Original query frames (B, Q, N, P·P·C)"""
    weights: np.ndarray
    """Patches entering the loss (B, Q, N)"""


def reconstruction_loss(
    predicted: Tensor,
    target: np.ndarray,
    plans: Sequence[MaskPlan],
    *,
    masked_only: bool = True,
) -> Tensor:
    """Mean squared error over the pixels of the masked query patches.

    Args:
        predicted: (B, Q, N, P·P·C) reconstructed query frames
        target: (B, Q, N, P·P·C) original query frames
        plans: the mask plan of every clip of the batch
        masked_only: average over every query patch instead of the masked ones
    """
    weights = np.stack([plan.loss_weights(masked_only) for plan in plans])
    if predicted.shape != np.shape(target) or predicted.shape[:-1] != weights.shape:
        raise ConfigurationError(
            f"Predictions {predicted.shape}, targets {np.shape(target)} and "
            f"mask plans {weights.shape} disagree."
        )
    if not (count := float(weights.sum())):
        raise ConfigurationError("The mask plans do not mask any patch.")
    diff = ops.sub(predicted, target)
    per_patch = ops.sum(ops.mul(diff, diff), axis=-1)
    return ops.div(ops.sum(ops.mul(per_patch, weights)), count * predicted.shape[-1])


def masked_reconstruction(
    params: ParamTable,
    clips: np.ndarray,
    plans: Sequence[MaskPlan],
    cfg: ModelConfig,
    *,
    temporal: bool = True,
    with_slots: bool = True,
    masked_only: bool = True,
    drop_context: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> ReconstructionOutput:
    """Shared forward pass of the masked reconstruction objectives.

    Context frames are encoded entirely and pooled into slots, query frames
    are encoded on their unmasked patches only. With `temporal`, the context
    slots and the query patch tokens go through the temporal transformer
    before every query frame is decoded.

    Args:
        params: model parameters
        clips: (B, T, H, W, C) clips with pixel values in [0, 1]
        plans: one mask plan per clip, with the same context size
        cfg: model configuration
        temporal: run the temporal transformer
        with_slots: prepend slot tokens in the image encoder
        masked_only: restrict the loss to the masked patches
        drop_context: withhold the context slots from the temporal transformer
        rng: dropout / Gumbel noise generator
    """
    table = Scope(params)
    encoder = table / ENCODER_SCOPE
    batch = clips.shape[0]
    patches = patchify(clips, cfg.patch_size)
    num_patches, patch_dim = patches.shape[-2:]
    rows = np.arange(batch)[:, None]
    context_ids = np.array([plan.context_frame_ids for plan in plans], dtype=np.int64).reshape(batch, -1)
    query_ids = np.array([plan.query_frame_ids for plan in plans], dtype=np.int64)
    unmasked = np.stack([plan.unmasked_ids() for plan in plans])
    num_context, num_queries, visible = context_ids.shape[1], query_ids.shape[1], unmasked.shape[2]

    query_frames = patches[rows, query_ids]
    encoded = encode_image(
        encoder,
        query_frames.reshape(batch * num_queries, num_patches, patch_dim),
        unmasked.reshape(batch * num_queries, visible),
        cfg,
        with_slots=with_slots,
        rng=rng,
    )
    tokens = encoded.patches
    if temporal:
        context_slots = None
        if num_context and with_slots and not drop_context:
            context = encode_image(
                encoder,
                patches[rows, context_ids].reshape(batch * num_context, num_patches, patch_dim),
                None,
                cfg,
                rng=rng,
            )
            context_slots = ops.reshape(
                pool_slots(encoder, context, cfg, rng=rng),
                (batch, num_context, cfg.num_slots, cfg.hidden_dim),
            )
        tokens = temporal_forward(
            table / TEMPORAL_SCOPE,
            context_slots,
            context_ids,
            ops.reshape(tokens, (batch, num_queries, visible, cfg.hidden_dim)),
            query_ids,
            cfg,
            rng=rng,
        )
        tokens = ops.reshape(tokens, (batch * num_queries, visible, cfg.hidden_dim))

    predictions = decode_frame(
        table / DECODER_SCOPE,
        tokens,
        unmasked.reshape(batch * num_queries, visible),
        num_patches,
        cfg,
        rng=rng,
    )
    predictions = ops.reshape(predictions, (batch, num_queries, num_patches, patch_dim))
    return ReconstructionOutput(
        loss=reconstruction_loss(predictions, query_frames, plans, masked_only=masked_only),
        predictions=predictions,
        targets=query_frames,
        weights=np.stack([plan.loss_weights(masked_only) for plan in plans]),
    )


def ivcl_loss(
    params: ParamTable,
    clips: np.ndarray,
    plans: Sequence[MaskPlan],
    cfg: ModelConfig,
    *,
    masked_only: bool = True,
    drop_context: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> ReconstructionOutput:
    return masked_reconstruction(
        params, clips, plans, cfg, masked_only=masked_only, drop_context=drop_context, rng=rng
    )


def image_mae_loss(
    params: ParamTable,
    frames: np.ndarray,
    plans: Sequence[MaskPlan],
    cfg: ModelConfig,
    *,
    masked_only: bool = True,
    rng: Optional[np.random.Generator] = None,
) -> ReconstructionOutput:
    """Single-frame masked autoencoding: frames (B, H, W, C), one-frame plans."""
    if any(plan.total_frames != 1 for plan in plans):
        raise ConfigurationError("Image MAE plans must cover a single query frame.")
    return masked_reconstruction(
        params, frames[:, None], plans, cfg, temporal=False, masked_only=masked_only, rng=rng
    )


def video_mae_loss(
    params: ParamTable,
    clips: np.ndarray,
    plans: Sequence[MaskPlan],
    cfg: ModelConfig,
    *,
    masked_only: bool = True,
    rng: Optional[np.random.Generator] = None,
) -> ReconstructionOutput:
    """Factorized video MAE: no slots, no context frames, joint attention over every frame."""
    if any(plan.context_frame_ids for plan in plans):
        raise ConfigurationError("Video MAE plans must not have context frames.")
    return masked_reconstruction(
        params, clips, plans, cfg, with_slots=False, masked_only=masked_only, rng=rng
    )


def _step(
    loss_fn: Callable[[ParamTable], ReconstructionOutput],
    params: ParamTable,
    state: OptimizerState,
    step: Optional[int],
) -> StepOutcome:
    def build(p: ParamTable):
        return loss_fn(p).loss, {}

    return minimize_step(params, state, build, step=step)


def pretrain_step(
    params: ParamTable,
    state: OptimizerState,
    clips: np.ndarray,
    plans: Sequence[MaskPlan],
    cfg: ModelConfig,
    *,
    masked_only: bool = True,
    step: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> StepOutcome:
    """One Adam step on the IV-CL masked reconstruction objective."""
    return _step(
        lambda p: ivcl_loss(p, clips, plans, cfg, masked_only=masked_only, rng=rng),
        params,
        state,
        step,
    )


def image_mae_step(
    params: ParamTable,
    state: OptimizerState,
    frames: np.ndarray,
    plans: Sequence[MaskPlan],
    cfg: ModelConfig,
    *,
    masked_only: bool = True,
    step: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> StepOutcome:
    return _step(
        lambda p: image_mae_loss(p, frames, plans, cfg, masked_only=masked_only, rng=rng),
        params,
        state,
        step,
    )


def video_mae_step(
    params: ParamTable,
    state: OptimizerState,
    clips: np.ndarray,
    plans: Sequence[MaskPlan],
    cfg: ModelConfig,
    *,
    masked_only: bool = True,
    step: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> StepOutcome:
    return _step(
        lambda p: video_mae_loss(p, clips, plans, cfg, masked_only=masked_only, rng=rng),
        params,
        state,
        step,
    )
