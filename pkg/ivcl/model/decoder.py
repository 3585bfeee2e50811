from typing import Optional

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..nn.blocks import (
    init_layer_norm,
    init_linear,
    init_transformer_block,
    layer_norm,
    linear,
    sinusoidal_positions,
    transformer_block,
)
from ..nn.params import ParamBuilder, Scope
from .config import ModelConfig


def init_decoder(builder: ParamBuilder, cfg: ModelConfig) -> None:
    builder.normal("mask_token", (cfg.hidden_dim,))
    for layer in range(cfg.decoder_layers):
        init_transformer_block(builder.child(f"block{layer}"), cfg.decoder_block)
    init_layer_norm(builder.child("norm"), cfg.hidden_dim)
    init_linear(builder.child("head"), cfg.hidden_dim, cfg.patch_dim)


def decode_frame(
    params: Scope,
    contextualized_patches: Tensor,
    patch_ids: np.ndarray,
    total_patches: int,
    cfg: ModelConfig,
    *,
    positions: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Predict the pixels of every patch of a batch of frames.

    The shared mask token stands in for every patch missing from
    `patch_ids`; tokens are put back in patch order before positions are added.

    Args:
        params: decoder parameters
        contextualized_patches: (B, u, d) tokens of the unmasked patches
        patch_ids: (B, u) original index of every token
        total_patches: number of patches N of a frame
        cfg: model configuration
        positions: (N, d) spatial encodings, sinusoidal by default

    Returns:
        the reconstructed patches (B, N, P·P·C) in patch order
    """
    batch, u, d = contextualized_patches.shape
    patch_ids = np.asarray(patch_ids, dtype=np.int64)
    tokens, order = contextualized_patches, patch_ids
    if (num_masked := total_patches - u) > 0:
        visible = np.zeros((batch, total_patches), dtype=bool)
        np.put_along_axis(visible, patch_ids, True, axis=1)
        masked_ids = np.nonzero(~visible)[1].reshape(batch, num_masked)
        mask_tokens = ops.add(params["mask_token"], np.zeros((batch, num_masked, d)))
        tokens = ops.concat([tokens, mask_tokens], axis=1)
        order = np.concatenate([patch_ids, masked_ids], axis=1)
    tokens = ops.gather_rows(tokens, np.argsort(order, axis=1, kind="stable"))
    if positions is None:
        positions = sinusoidal_positions(total_patches, d)
    x = ops.add(tokens, positions)
    for layer in range(cfg.decoder_layers):
        x, _ = transformer_block(x, params / f"block{layer}", cfg.decoder_block, rng=rng)
    return linear(layer_norm(x, params / "norm"), params / "head")
