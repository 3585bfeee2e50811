from .config import ModelConfig, PoolMethod
from .decoder import decode_frame
from .encoder import EncodedFrame, encode_image, gumbel_max_select, pool_slots
from .ivcl_model import (
    DECODER_SCOPE,
    ENCODER_SCOPE,
    TEMPORAL_SCOPE,
    TransferEncoding,
    encode_video_for_transfer,
    init_ivcl_params,
)
from .temporal import temporal_encode, temporal_forward

__all__ = [
    "DECODER_SCOPE",
    "ENCODER_SCOPE",
    "EncodedFrame",
    "ModelConfig",
    "PoolMethod",
    "TEMPORAL_SCOPE",
    "TransferEncoding",
    "decode_frame",
    "encode_image",
    "encode_video_for_transfer",
    "gumbel_max_select",
    "init_ivcl_params",
    "pool_slots",
    "temporal_encode",
    "temporal_forward",
]
