"""Detection pretraining: boxes written as discrete tokens and predicted autoregressively from the slots."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.optim import OptimizerState, StepOutcome, minimize_step
from ..autodiff.tensor import ParamTable, Tensor
from ..exceptions import ConfigurationError, DataError
from ..model.config import ModelConfig
from ..model.encoder import encode_image, pool_slots
from ..model.ivcl_model import ENCODER_SCOPE
from ..nn.blocks import (
    BlockConfig,
    causal_bias,
    cross_attention_block,
    embedding_lookup,
    init_cross_attention_block,
    init_layer_norm,
    init_linear,
    layer_norm,
    linear,
    patchify,
)
from ..nn.params import ParamBuilder, Scope
from ..random_number_generator import as_generator
from ..toyworlds.attributes import Shape
from ..toyworlds.shell_game import ShellGameEpisode
from ..utils import round_half_up
from .config import BaselineConfig

logger = logging.getLogger(__name__)

DETECTION_SCOPE = "detection"
NUM_DETECTION_CLASSES = len(Shape) + 1
"""The three shapes and the snitch"""
SNITCH_CLASS = len(Shape)


@dataclass(frozen=True)
class DetectionVocab:
    """Coordinate bins first, then the classes, EOS last."""

    n_bins: int = 128
    n_classes: int = NUM_DETECTION_CLASSES

    def __post_init__(self):
        if self.n_bins < 2 or self.n_classes < 1:
            raise ConfigurationError(f"Invalid detection vocabulary {self}.")

    @property
    def eos(self) -> int:
        return self.n_bins + self.n_classes

    @property
    def size(self) -> int:
        return self.n_bins + self.n_classes + 1

    def class_token(self, class_id: int) -> int:
        if not 0 <= class_id < self.n_classes:
            raise DataError(f"Class {class_id} out of [0, {self.n_classes}).")
        return self.n_bins + class_id


@dataclass(frozen=True)
class BoxAnnotation:
    ymin: float
    xmin: float
    ymax: float
    xmax: float
    class_id: int

    def __post_init__(self):
        coords = (self.ymin, self.xmin, self.ymax, self.xmax)
        if any(not 0.0 <= c <= 1.0 for c in coords):
            raise DataError(f"Box coordinates must lie in [0, 1], got {coords}.")
        if self.ymin > self.ymax or self.xmin > self.xmax:
            raise DataError(f"Box corners are inverted: {coords}.")


def box_to_tokens(box: BoxAnnotation, vocab: DetectionVocab) -> Tuple[int, int, int, int, int]:
    """ymin, xmin, ymax, xmax quantized to round(coord * (n_bins - 1)), halves up, then the class."""
    scale = vocab.n_bins - 1
    y0, x0, y1, x1 = (round_half_up(c * scale) for c in (box.ymin, box.xmin, box.ymax, box.xmax))
    return (y0, x0, y1, x1, vocab.class_token(box.class_id))


def tokens_to_box(tokens: Sequence[int], vocab: DetectionVocab) -> BoxAnnotation:
    if len(tokens) != 5:
        raise DataError(f"A box is 5 tokens, got {len(tokens)}.")
    *coords, cls = (int(t) for t in tokens)
    if any(not 0 <= c < vocab.n_bins for c in coords) or not vocab.n_bins <= cls < vocab.eos:
        raise DataError(f"Invalid box tokens {list(tokens)}.")
    scale = vocab.n_bins - 1
    return BoxAnnotation(*(c / scale for c in coords), cls - vocab.n_bins)


def build_sequence(
    boxes: Sequence[BoxAnnotation], vocab: DetectionVocab, rng: np.random.Generator
) -> List[int]:
    """Boxes in random order, 5 tokens each, terminated by EOS."""
    tokens: List[int] = []
    for i in rng.permutation(len(boxes)):
        tokens.extend(box_to_tokens(boxes[int(i)], vocab))
    tokens.append(vocab.eos)
    return tokens


def parse_sequence(tokens: Sequence[int], vocab: DetectionVocab) -> List[BoxAnnotation]:
    """Boxes of a token sequence, up to the first EOS.

    Raises:
        DataError: a group of tokens is not a box
    """
    tokens = list(tokens)
    end = tokens.index(vocab.eos) if vocab.eos in tokens else len(tokens)
    if end % 5:
        raise DataError(f"{end} tokens before EOS do not make whole boxes.")
    return [tokens_to_box(tokens[i : i + 5], vocab) for i in range(0, end, 5)]


def shell_game_boxes(episode: ShellGameEpisode, frame: int) -> List[BoxAnnotation]:
    """Boxes of the objects drawn in a frame, in image coordinates."""
    state = episode.states[frame]
    g = episode.grid_size
    boxes = []
    for obj, cell, visible in zip(episode.objects, state.cells, state.visible):
        if not visible:
            continue
        row, col = divmod(cell, g)
        margin = (1.0 - obj.size.scale) / 2
        class_id = SNITCH_CLASS if obj.is_snitch else list(Shape).index(obj.shape)
        boxes.append(
            BoxAnnotation(
                (row + margin) / g, (col + margin) / g, (row + 1 - margin) / g, (col + 1 - margin) / g, class_id
            )
        )
    return boxes


def _block(model_cfg: ModelConfig, cfg: BaselineConfig) -> BlockConfig:
    return BlockConfig(model_cfg.hidden_dim, cfg.decoder_heads, model_cfg.mlp_dim, model_cfg.dropout)


def init_detection_decoder(builder: ParamBuilder, model_cfg: ModelConfig, cfg: BaselineConfig) -> None:
    vocab = DetectionVocab(cfg.n_bins)
    d = model_cfg.hidden_dim
    builder.normal("tokens", (vocab.size, d))
    builder.normal("start", (d,))
    builder.normal("positions", (cfg.max_sequence_length, d))
    for layer in range(cfg.decoder_layers):
        init_cross_attention_block(builder.child(f"block{layer}"), _block(model_cfg, cfg))
    init_layer_norm(builder.child("norm"), d)
    init_linear(builder.child("head"), d, vocab.size)


def pad_sequences(
    sequences: Sequence[Sequence[int]], vocab: DetectionVocab, max_length: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Targets (B, n) padded with EOS and their weights, 0 on padding.

    Sequences longer than `max_length` are truncated with a warning.
    """
    longest = max(len(s) for s in sequences)
    if longest > max_length:
        logger.warning("Truncating target sequences of %d tokens to %d.", longest, max_length)
    n = min(longest, max_length)
    targets = np.full((len(sequences), n), vocab.eos, dtype=np.int64)
    weights = np.zeros((len(sequences), n), dtype=np.float32)
    for i, seq in enumerate(sequences):
        seq = list(seq)[:n]
        targets[i, : len(seq)] = seq
        weights[i, : len(seq)] = 1.0
    return targets, weights


def detection_logits(
    params: Scope,
    memory: Tensor,
    targets: np.ndarray,
    model_cfg: ModelConfig,
    cfg: BaselineConfig,
    *,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Next-token logits (B, n, V) with teacher forcing.

    Position t sees the start token and the targets before t only.
    """
    batch, n = targets.shape
    d = model_cfg.hidden_dim
    start = ops.add(params["start"], np.zeros((batch, 1, d)))
    previous = embedding_lookup(params["tokens"], targets[:, : n - 1])
    x = ops.concat([start, previous], axis=1) if n > 1 else start
    x = ops.add(x, ops.take(params["positions"], range(n), axis=0))
    bias = causal_bias(n)
    for layer in range(cfg.decoder_layers):
        x = cross_attention_block(x, memory, params / f"block{layer}", _block(model_cfg, cfg), bias=bias, rng=rng)
    return linear(layer_norm(x, params / "norm"), params / "head")


def encode_slots(
    params: ParamTable,
    frames: np.ndarray,
    model_cfg: ModelConfig,
    *,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Pooled slots (B, S, d) of unmasked frames (B, H, W, C)."""
    table = Scope(params) / ENCODER_SCOPE
    encoded = encode_image(table, patchify(frames, model_cfg.patch_size), None, model_cfg, rng=rng)
    return pool_slots(table, encoded, model_cfg, rng=rng)


def probe_random_slot(slots: Tensor, rng: np.random.Generator) -> Tensor:
    """One randomly sampled slot per frame (B, 1, d)."""
    batch, num_slots, _ = slots.shape
    return ops.gather_rows(slots, rng.integers(num_slots, size=(batch, 1)))


def detection_loss(
    params: ParamTable,
    frames: np.ndarray,
    sequences: Sequence[Sequence[int]],
    model_cfg: ModelConfig,
    cfg: BaselineConfig,
    *,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Dict[str, float]]:
    """Next-token cross-entropy over the target tokens, and the next-token accuracy."""
    vocab = DetectionVocab(cfg.n_bins)
    targets, weights = pad_sequences(sequences, vocab, cfg.max_sequence_length)
    slots = encode_slots(params, frames, model_cfg, rng=rng)
    if cfg.probe_random_slot:
        slots = probe_random_slot(slots, as_generator(rng))
    logits = detection_logits(Scope(params) / DETECTION_SCOPE, slots, targets, model_cfg, cfg, rng=rng)
    hits = (logits.data.argmax(axis=-1) == targets) * weights
    return ops.cross_entropy(logits, targets, weights), {"accuracy": float(hits.sum() / weights.sum())}


def detection_pretrain_step(
    params: ParamTable,
    state: OptimizerState,
    frames: np.ndarray,
    sequences: Sequence[Sequence[int]],
    model_cfg: ModelConfig,
    cfg: BaselineConfig,
    *,
    step: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> StepOutcome:
    return minimize_step(
        params,
        state,
        lambda p: detection_loss(p, frames, sequences, model_cfg, cfg, rng=rng),
        step=step,
    )
