from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..exceptions import ConfigurationError, ContractViolationError
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
from .config import ModelConfig, PoolMethod


@dataclass(frozen=True)
class EncodedFrame:
    """Image encoder output for a batch of frames"""

    slots: Tensor
    """Final slot tokens (B, S, d); empty along S when encoded without slots"""
    patches: Tensor
    """Final tokens of the supplied patches (B, u, d)"""
    patch_ids: np.ndarray
    """Original indices of the supplied patches (B, u), strictly increasing per row"""
    layer_states: Tuple[Tensor, ...]
    """Output tokens of every layer (B, S + u, d), before the final norm"""
    attentions: Tuple[Tensor, ...]
    """Attention weights of every layer (B, h, S + u, S + u)"""
    num_slots: int


def init_encoder(builder: ParamBuilder, cfg: ModelConfig, *, with_slots: bool = True) -> None:
    init_linear(builder.child("patch_embed"), cfg.patch_dim, cfg.hidden_dim)
    if with_slots:
        builder.normal("slots", (cfg.num_slots, cfg.hidden_dim))
    for layer in range(cfg.encoder_layers):
        init_transformer_block(builder.child(f"block{layer}"), cfg.encoder_block)
    init_layer_norm(builder.child("norm"), cfg.hidden_dim)
    if cfg.pool_method is not PoolMethod.SLICE:
        pool = builder.child("pool")
        pool.normal("queries", (cfg.num_slots, cfg.hidden_dim))
        init_layer_norm(pool.child("norm"), cfg.hidden_dim)
        init_linear(pool.child("key"), cfg.hidden_dim, cfg.hidden_dim)


def _validate_ids(ids: np.ndarray, batch: int, num_patches: int) -> np.ndarray:
    ids = np.sort(np.asarray(ids, dtype=np.int64), axis=-1)
    if ids.ndim != 2 or ids.shape[0] != batch:
        raise ContractViolationError(
            f"Unmasked ids must have shape (batch={batch}, u), got {ids.shape}."
        )
    if ids.shape[1] == 0:
        raise ContractViolationError("A frame with no unmasked patch cannot be encoded.")
    if ids.min() < 0 or ids.max() >= num_patches:
        raise ContractViolationError(f"Unmasked ids must lie in [0, {num_patches}).")
    if (np.diff(ids, axis=-1) == 0).any():
        raise ContractViolationError("Unmasked ids contain duplicates.")
    return ids


def encode_image(
    params: Scope,
    frame_patches: Union[np.ndarray, Tensor],
    unmasked_ids: Optional[np.ndarray],
    cfg: ModelConfig,
    *,
    with_slots: bool = True,
    rng: Optional[np.random.Generator] = None,
) -> EncodedFrame:
    """Encode the unmasked patches of a batch of frames, with slot tokens prepended.

    Args:
        params: encoder parameters
        frame_patches: patchified frames (B, N, P·P·C)
        unmasked_ids: patches to encode (B, u); None encodes every patch
        cfg: model configuration
        with_slots: prepend the learned slot tokens
        rng: dropout generator, None disables dropout

    Raises:
        ContractViolationError: a frame has no unmasked patch
    """
    batch, num_patches, _ = frame_patches.shape
    if unmasked_ids is None:
        unmasked_ids = np.broadcast_to(np.arange(num_patches), (batch, num_patches))
    ids = _validate_ids(unmasked_ids, batch, num_patches)
    if isinstance(frame_patches, Tensor):
        visible = ops.gather_rows(frame_patches, ids)
    else:
        visible = Tensor(np.take_along_axis(frame_patches, ids[..., None], axis=1))
    positions = sinusoidal_positions(num_patches, cfg.hidden_dim)[ids]
    tokens = ops.add(linear(visible, params / "patch_embed"), positions)

    num_slots = cfg.num_slots if with_slots else 0
    if with_slots:
        slots = ops.add(params["slots"], np.zeros((batch, num_slots, cfg.hidden_dim)))
        tokens = ops.concat([slots, tokens], axis=1)

    states, attentions = [], []
    for layer in range(cfg.encoder_layers):
        tokens, attn = transformer_block(tokens, params / f"block{layer}", cfg.encoder_block, rng=rng)
        states.append(tokens)
        attentions.append(attn)

    out = layer_norm(tokens, params / "norm")
    return EncodedFrame(
        slots=ops.take(out, range(num_slots), axis=1),
        patches=ops.take(out, range(num_slots, out.shape[1]), axis=1),
        patch_ids=ids,
        layer_states=tuple(states),
        attentions=tuple(attentions),
        num_slots=num_slots,
    )


def gumbel_max_select(
    scores: Tensor, rng: Optional[np.random.Generator] = None
) -> Tensor:
    """One-hot selection of the best score along the last axis.

    Gumbel noise is added when a generator is given. The forward value is the
    hard one-hot, the gradient is the one of the softmax (straight-through).
    """
    noisy = scores if rng is None else ops.add(scores, rng.gumbel(size=scores.shape))
    soft = ops.softmax(noisy, axis=-1)
    hard = np.zeros(scores.shape, dtype=soft.data.dtype)
    np.put_along_axis(hard, noisy.data.argmax(axis=-1)[..., None], 1.0, axis=-1)
    return ops.straight_through(hard, soft)


def pool_slots(
    params: Scope,
    encoded: EncodedFrame,
    cfg: ModelConfig,
    *,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Read the slot representations (B, S, d) out of the encoder layer states.

    Slice takes the slot tokens of `pool_layer` and runs the remaining layers
    on them alone. The attention methods let learned queries attend over the
    patch tokens of `pool_layer` with a single head.
    """
    if encoded.num_slots == 0:
        raise ContractViolationError("Slots cannot be pooled from a frame encoded without slots.")
    state = encoded.layer_states[cfg.pool_layer]
    num_slots = encoded.num_slots
    if cfg.pool_method is PoolMethod.SLICE:
        x = ops.take(state, range(num_slots), axis=1)
        for layer in range(cfg.pool_layer + 1, cfg.encoder_layers):
            x, _ = transformer_block(x, params / f"block{layer}", cfg.encoder_block, rng=rng)
        return layer_norm(x, params / "norm")

    if cfg.pool_method not in (PoolMethod.SOFT_ATTENTION, PoolMethod.GUMBEL_MAX):
        raise ConfigurationError(f"Unknown pool method {cfg.pool_method!r}.")
    pool = params / "pool"
    patches = ops.take(state, range(num_slots, state.shape[1]), axis=1)
    keys = linear(layer_norm(patches, pool / "norm"), pool / "key")
    scores = ops.mul(
        ops.matmul(pool["queries"], ops.swapaxes(keys, -1, -2)),
        1.0 / np.sqrt(cfg.hidden_dim),
    )
    if cfg.pool_method is PoolMethod.SOFT_ATTENTION:
        weights = ops.softmax(scores, axis=-1)
    else:
        weights = gumbel_max_select(scores, rng)
    return layer_norm(ops.matmul(weights, patches), params / "norm")


def pooling_weights(
    params: Scope, encoded: EncodedFrame, cfg: ModelConfig
) -> Optional[np.ndarray]:
    """Soft attention weights (B, S, u) of the attention pooling methods, without noise."""
    if cfg.pool_method is PoolMethod.SLICE:
        return None
    pool = params / "pool"
    state = encoded.layer_states[cfg.pool_layer]
    patches = ops.take(state, range(encoded.num_slots, state.shape[1]), axis=1)
    keys = linear(layer_norm(patches, pool / "norm"), pool / "key")
    scores = ops.matmul(pool["queries"], ops.swapaxes(keys, -1, -2))
    return ops.softmax(ops.mul(scores, 1.0 / np.sqrt(cfg.hidden_dim)), axis=-1).data
