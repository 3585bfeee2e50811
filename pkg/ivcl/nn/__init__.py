from .blocks import (
    BlockConfig,
    causal_bias,
    embedding_lookup,
    linear,
    multi_head_self_attention,
    patchify,
    sinusoidal_positions,
    transformer_block,
    unpatchify,
)
from .params import ParamBuilder, Scope

__all__ = [
    "BlockConfig",
    "ParamBuilder",
    "Scope",
    "causal_bias",
    "embedding_lookup",
    "linear",
    "multi_head_self_attention",
    "patchify",
    "sinusoidal_positions",
    "transformer_block",
    "unpatchify",
]
