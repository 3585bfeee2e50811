from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import ParamTable, Tensor
from ..nn.blocks import patchify
from ..nn.params import ParamBuilder, Scope
from ..random_number_generator import RandomNumberGenerator, Stream
from .config import ModelConfig
from .decoder import init_decoder
from .encoder import encode_image, init_encoder, pool_slots
from .temporal import init_temporal, temporal_encode

ENCODER_SCOPE = "encoder"
TEMPORAL_SCOPE = "temporal"
DECODER_SCOPE = "decoder"


def init_ivcl_params(
    cfg: ModelConfig,
    seed: int,
    *,
    with_slots: bool = True,
    with_decoder: bool = True,
) -> ParamTable:
    """Randomly initialized image encoder, temporal transformer and image decoder.

    Every table entry is named `<scope>/<path>` with the scopes `encoder`,
    `temporal` and `decoder`.
    """
    builder = ParamBuilder(RandomNumberGenerator(seed).child(Stream.INIT))
    init_encoder(builder.child(ENCODER_SCOPE), cfg, with_slots=with_slots)
    init_temporal(builder.child(TEMPORAL_SCOPE), cfg)
    if with_decoder:
        init_decoder(builder.child(DECODER_SCOPE), cfg)
    return builder.build()


@dataclass(frozen=True)
class TransferEncoding:
    pooled: Tensor
    """Mean of the temporal output tokens (B, d)"""
    tokens: Tensor
    """Temporal output tokens (B, F·S, d), frame-major"""
    slots: Tensor
    """Per-frame slots (B, F, S, d) before the temporal transformer"""


def encode_video_for_transfer(
    params: ParamTable,
    frames: np.ndarray,
    cfg: ModelConfig,
    *,
    frame_ids: Optional[Sequence[int]] = None,
    rng: Optional[np.random.Generator] = None,
) -> TransferEncoding:
    """Pooled representation of unmasked clips, fed to the task heads.

    Args:
        params: model parameters
        frames: (B, F, H, W, C) clips
        cfg: model configuration
        frame_ids: temporal index of every frame, 0..F-1 by default
        rng: dropout / Gumbel noise generator
    """
    batch, num_frames = frames.shape[:2]
    table = Scope(params)
    patches = patchify(frames, cfg.patch_size)
    flat = patches.reshape(batch * num_frames, *patches.shape[2:])
    encoded = encode_image(table / ENCODER_SCOPE, flat, None, cfg, rng=rng)
    slots = pool_slots(table / ENCODER_SCOPE, encoded, cfg, rng=rng)
    num_slots = slots.shape[1]
    slots = ops.reshape(slots, (batch, num_frames, num_slots, cfg.hidden_dim))
    if frame_ids is None:
        frame_ids = range(num_frames)
    ids = np.repeat(np.asarray(frame_ids, dtype=np.int64), num_slots)
    tokens = temporal_encode(
        table / TEMPORAL_SCOPE,
        ops.reshape(slots, (batch, num_frames * num_slots, cfg.hidden_dim)),
        np.broadcast_to(ids, (batch, ids.size)),
        cfg,
        rng=rng,
    ).tokens
    return TransferEncoding(pooled=ops.mean(tokens, axis=1), tokens=tokens, slots=slots)

