from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..exceptions import ConfigurationError
from ..nn.blocks import (
    embedding_lookup,
    init_layer_norm,
    init_transformer_block,
    layer_norm,
    transformer_block,
)
from ..nn.params import ParamBuilder, Scope
from .config import ModelConfig


@dataclass(frozen=True)
class TemporalOutput:
    tokens: Tensor
    """Contextualized tokens (B, n, d), in input order"""
    attentions: Tuple[Tensor, ...]


def init_temporal(builder: ParamBuilder, cfg: ModelConfig) -> None:
    builder.normal("positions", (cfg.max_frames, cfg.hidden_dim))
    for layer in range(cfg.temporal_layers):
        init_transformer_block(builder.child(f"block{layer}"), cfg.temporal_block)
    init_layer_norm(builder.child("norm"), cfg.hidden_dim)


def temporal_encode(
    params: Scope,
    tokens: Tensor,
    frame_ids: np.ndarray,
    cfg: ModelConfig,
    *,
    rng: Optional[np.random.Generator] = None,
) -> TemporalOutput:
    """Joint self-attention over tokens coming from several frames.

    Args:
        params: temporal transformer parameters
        tokens: (B, n, d) tokens
        frame_ids: (B, n) or (n,) index of the source frame of every token
        cfg: model configuration
        rng: dropout generator

    Raises:
        ConfigurationError: a frame index does not fit the temporal embedding table
    """
    frame_ids = np.asarray(frame_ids, dtype=np.int64)
    if frame_ids.size and (frame_ids.min() < 0 or frame_ids.max() >= cfg.max_frames):
        raise ConfigurationError(
            f"Frame index {int(frame_ids.max())} does not fit the temporal "
            f"embedding table of {cfg.max_frames} frames (model.max_frames)."
        )
    x = ops.add(tokens, embedding_lookup(params["positions"], frame_ids))
    attentions = []
    for layer in range(cfg.temporal_layers):
        x, attn = transformer_block(x, params / f"block{layer}", cfg.temporal_block, rng=rng)
        attentions.append(attn)
    return TemporalOutput(tokens=layer_norm(x, params / "norm"), attentions=tuple(attentions))


def temporal_forward(
    params: Scope,
    context_slots: Optional[Tensor],
    context_frame_ids: np.ndarray,
    query_patches: Tensor,
    query_frame_ids: np.ndarray,
    cfg: ModelConfig,
    *,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Contextualize the query patch tokens with the context slots.

    Args:
        params: temporal transformer parameters
        context_slots: (B, C, S, d) slots of the context frames, None when C = 0
        context_frame_ids: (B, C) clip index of every context frame
        query_patches: (B, Q, u, d) unmasked patch tokens of the query frames
        query_frame_ids: (B, Q) clip index of every query frame
        cfg: model configuration

    Returns:
        the contextualized query patch tokens (B, Q, u, d)
    """
    batch, num_queries, u, d = query_patches.shape
    query_ids = np.repeat(np.asarray(query_frame_ids, dtype=np.int64), u, axis=-1)
    tokens = ops.reshape(query_patches, (batch, num_queries * u, d))
    ids = query_ids.reshape(batch, num_queries * u)
    num_context = 0
    if context_slots is not None and context_slots.shape[1] > 0:
        _, c, s, _ = context_slots.shape
        num_context = c * s
        context_ids = np.repeat(np.asarray(context_frame_ids, dtype=np.int64), s, axis=-1)
        tokens = ops.concat([ops.reshape(context_slots, (batch, num_context, d)), tokens], axis=1)
        ids = np.concatenate([context_ids.reshape(batch, num_context), ids], axis=1)
    out = temporal_encode(params, tokens, ids, cfg, rng=rng).tokens
    out = ops.take(out, range(num_context, num_context + num_queries * u), axis=1)
    return ops.reshape(out, (batch, num_queries, u, d))
