from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import ParamTable
from ..exceptions import ContractViolationError
from ..model.config import ModelConfig, PoolMethod
from ..model.encoder import EncodedFrame, encode_image, pooling_weights
from ..model.ivcl_model import ENCODER_SCOPE
from ..nn.blocks import patchify, transformer_block
from ..nn.params import Scope

STOCHASTIC_TOLERANCE = 1e-5


def head_average(attn: np.ndarray) -> np.ndarray:
    """Average attention weights (..., h, n, n) over the heads."""
    return np.asarray(attn, dtype=np.float64).mean(axis=-3)


def attention_rollout(per_layer_attn: Sequence[np.ndarray], residual_weight: float = 0.5) -> np.ndarray:
    """Attribution of the output tokens to the input tokens through a stack of layers.

    Every layer matrix A becomes (1 - w)·A + w·I, rows renormalized, and the
    result is the product of the last layer's matrix down to the first one's.

    Args:
        per_layer_attn: head-averaged (n, n) attention matrices, first layer first
        residual_weight: weight w of the identity

    Raises:
        ContractViolationError: matrices are not square, of equal size and row-stochastic
    """
    if not per_layer_attn:
        raise ContractViolationError("Attention rollout needs at least one layer.")
    n = np.shape(per_layer_attn[0])[-1]
    rollout = np.eye(n)
    for layer, attn in enumerate(per_layer_attn):
        attn = np.asarray(attn, dtype=np.float64)
        if attn.shape != (n, n):
            raise ContractViolationError(f"Layer {layer}: expected a {n}x{n} matrix, got {attn.shape}.")
        if (attn < 0).any() or not np.allclose(attn.sum(axis=-1), 1.0, atol=STOCHASTIC_TOLERANCE):
            raise ContractViolationError(f"Layer {layer}: attention rows are not stochastic.")
        adjusted = (1.0 - residual_weight) * attn + residual_weight * np.eye(n)
        adjusted /= adjusted.sum(axis=-1, keepdims=True)
        rollout = adjusted @ rollout
    return rollout


@dataclass(frozen=True)
class EncoderRollout:
    rollout: np.ndarray
    """(n, n) rollout over the slot and patch tokens of a frame"""
    num_slots: int


def slot_layer_attentions(table: Scope, encoded: EncodedFrame, cfg: ModelConfig) -> List[np.ndarray]:
    """(n, n) matrices of the layers that Slice pooling runs on the slots alone.

    Slot rows hold the head-averaged attention among the slots; patch rows are
    the identity since patch tokens are no longer updated.
    """
    s = encoded.num_slots
    n = encoded.attentions[0].shape[-1]
    x = ops.take(encoded.layer_states[cfg.pool_layer], range(s), axis=1)
    layers = []
    for layer in range(cfg.pool_layer + 1, cfg.encoder_layers):
        x, attn = transformer_block(x, table / f"block{layer}", cfg.encoder_block)
        matrix = np.eye(n)
        matrix[:s, :s] = head_average(attn.data[0])
        layers.append(matrix)
    return layers


def encoder_rollout(
    params: ParamTable,
    frame: np.ndarray,
    cfg: ModelConfig,
    residual_weight: float = 0.5,
) -> EncoderRollout:
    """Rollout of the image encoder on one unmasked frame (H, W, C).

    Layers up to `pool_layer` are rolled out. With Slice pooling, the later
    layers, which mix the slots among themselves, follow. With attention
    pooling, the slot rows are replaced by the pooling weights applied to the
    patch rows.
    """
    table = Scope(params) / ENCODER_SCOPE
    encoded = encode_image(table, patchify(frame[None], cfg.patch_size), None, cfg)
    layers = [head_average(a.data[0]) for a in encoded.attentions[: cfg.pool_layer + 1]]
    if cfg.pool_method is PoolMethod.SLICE:
        layers += slot_layer_attentions(table, encoded, cfg)
    rollout = attention_rollout(layers, residual_weight)
    weights: Optional[np.ndarray] = pooling_weights(table, encoded, cfg)
    if weights is not None:
        s = encoded.num_slots
        rollout = rollout.copy()
        rollout[:s] = weights[0].astype(np.float64) @ rollout[s:]
    return EncoderRollout(rollout, encoded.num_slots)


def slot_heatmap(
    rollout: np.ndarray, slot_index: int, grid: Tuple[int, int], num_slots: int
) -> np.ndarray:
    """Weights of a slot over the image patches, summing to 1, as a (rows, cols) grid.

    Raises:
        ContractViolationError: no such slot
    """
    if not 0 <= slot_index < num_slots:
        raise ContractViolationError(f"Slot {slot_index} out of [0, {num_slots}).")
    row = np.asarray(rollout, dtype=np.float64)[slot_index, num_slots:]
    if row.size != grid[0] * grid[1]:
        raise ContractViolationError(f"{row.size} patches do not fill a {grid[0]}x{grid[1]} grid.")
    total = row.sum()
    row = row / total if total > 0 else np.full(row.shape, 1.0 / row.size)
    return row.reshape(grid)


def cell_patch_mask(cell: int, world_grid: int, image_size: int, patch_size: int) -> np.ndarray:
    """Patches overlapping a cell of the toy world, as a boolean patch grid."""
    row, col = divmod(cell, world_grid)
    patch_grid = image_size // patch_size
    y0, y1 = row * image_size // world_grid, (row + 1) * image_size // world_grid
    x0, x1 = col * image_size // world_grid, (col + 1) * image_size // world_grid
    starts = np.arange(patch_grid) * patch_size
    rows = (starts < y1) & (starts + patch_size > y0)
    cols = (starts < x1) & (starts + patch_size > x0)
    return rows[:, None] & cols[None, :]


def snitch_alignment(heatmap: np.ndarray, cell_mask: np.ndarray) -> float:
    """Mass of a heatmap on the snitch cell, relative to a uniform map.

    A value of 2 means twice the mass a uniform map would put there. This is
    a proxy for object-centric attention, not a calibrated measure.
    """
    uniform = cell_mask.sum() / cell_mask.size
    return float(heatmap[cell_mask].sum() / uniform)
