from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..constants import ATTENTION_MASK_VALUE, POSITION_FREQUENCY_BASE
from ..exceptions import ConfigurationError
from .params import ParamBuilder, Scope


@dataclass(frozen=True)
class BlockConfig:
    """Width and depth parameters of a transformer block."""

    hidden_dim: int
    num_heads: int
    mlp_dim: int
    dropout: float = 0.0

    def __post_init__(self):
        if self.hidden_dim < 1 or self.num_heads < 1 or self.mlp_dim < 1:
            raise ConfigurationError(f"Block dimensions must be positive: {self}.")
        if self.hidden_dim % self.num_heads:
            raise ConfigurationError(
                f"hidden_dim {self.hidden_dim} is not divisible "
                f"by num_heads {self.num_heads}."
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must lie in [0, 1), got {self.dropout}.")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.num_heads


def patchify(frames: np.ndarray, patch_size: int) -> np.ndarray:
    """Split images into non-overlapping square patches.

    Args:
        frames: images of shape (..., H, W, C)
        patch_size: side P of a patch

    Returns:
        patches of shape (..., (H/P)·(W/P), P·P·C) in row-major patch order
    """
    *lead, h, w, c = frames.shape
    if h % patch_size or w % patch_size:
        raise ConfigurationError(
            f"Image size {h}x{w} is not divisible by patch size {patch_size}."
        )
    gh, gw = h // patch_size, w // patch_size
    x = frames.reshape(*lead, gh, patch_size, gw, patch_size, c)
    x = np.moveaxis(x, -4, -3)
    return x.reshape(*lead, gh * gw, patch_size * patch_size * c)


def unpatchify(
    patches: np.ndarray, patch_size: int, height: int, width: int
) -> np.ndarray:
    """Inverse of `patchify`."""
    *lead, n, dim = patches.shape
    gh, gw = height // patch_size, width // patch_size
    c = dim // (patch_size * patch_size)
    if gh * gw != n or c * patch_size * patch_size != dim:
        raise ConfigurationError(
            f"{n} patches of dimension {dim} do not tile a "
            f"{height}x{width} image with patch size {patch_size}."
        )
    x = patches.reshape(*lead, gh, gw, patch_size, patch_size, c)
    x = np.moveaxis(x, -3, -4)
    return x.reshape(*lead, height, width, c)


def sinusoidal_positions(n: int, d: int) -> np.ndarray:
    """Fixed position encodings, interleaved as [sin(p·w0), cos(p·w0), sin(p·w1), ...]

    with w_i = 10000^(-2i/d).
    """
    if d % 2:
        raise ConfigurationError(f"Position encoding dimension must be even, got {d}.")
    positions = np.arange(n, dtype=np.float64)[:, None]
    frequencies = POSITION_FREQUENCY_BASE ** (-np.arange(0, d, 2, dtype=np.float64) / d)
    table = np.empty((n, d), dtype=np.float64)
    table[:, 0::2] = np.sin(positions * frequencies)
    table[:, 1::2] = np.cos(positions * frequencies)
    return table.astype(np.float32)


def causal_bias(n: int) -> np.ndarray:
    """Additive attention bias forbidding attention to later positions."""
    return np.triu(np.full((n, n), ATTENTION_MASK_VALUE, dtype=np.float32), k=1)


def init_linear(builder: ParamBuilder, d_in: int, d_out: int, *, zero: bool = False) -> None:
    if zero:
        builder.zeros("w", (d_in, d_out))
    else:
        builder.normal("w", (d_in, d_out))
    builder.zeros("b", (d_out,))


def linear(x: Tensor, p: Scope) -> Tensor:
    return ops.add(ops.matmul(x, p["w"]), p["b"])


def init_layer_norm(builder: ParamBuilder, d: int) -> None:
    builder.ones("gamma", (d,))
    builder.zeros("beta", (d,))


def layer_norm(x: Tensor, p: Scope) -> Tensor:
    return ops.layer_norm(x, p["gamma"], p["beta"])


def _split_heads(x: Tensor, num_heads: int) -> Tensor:
    *lead, n, d = x.shape
    x = ops.reshape(x, (*lead, n, num_heads, d // num_heads))
    return ops.swapaxes(x, -3, -2)


def _merge_heads(x: Tensor) -> Tensor:
    x = ops.swapaxes(x, -3, -2)
    *lead, n, h, dh = x.shape
    return ops.reshape(x, (*lead, n, h * dh))


def init_attention(builder: ParamBuilder, cfg: BlockConfig, *, zero_output: bool = False) -> None:
    for name in ("query", "key", "value"):
        init_linear(builder.child(name), cfg.hidden_dim, cfg.hidden_dim)
    init_linear(builder.child("out"), cfg.hidden_dim, cfg.hidden_dim, zero=zero_output)


def multi_head_attention(
    queries: Tensor,
    keys: Tensor,
    p: Scope,
    cfg: BlockConfig,
    *,
    bias: Optional[np.ndarray] = None,
) -> Tuple[Tensor, Tensor]:
    """Scaled dot-product attention of `queries` over `keys`.

    Returns:
        the output tokens (..., n_q, d) and the attention weights (..., h, n_q, n_k)
    """
    q = _split_heads(linear(queries, p / "query"), cfg.num_heads)
    k = _split_heads(linear(keys, p / "key"), cfg.num_heads)
    v = _split_heads(linear(keys, p / "value"), cfg.num_heads)
    scores = ops.mul(ops.matmul(q, ops.swapaxes(k, -1, -2)), 1.0 / np.sqrt(cfg.head_dim))
    if bias is not None:
        scores = ops.add(scores, bias)
    attn = ops.softmax(scores, axis=-1)
    out = linear(_merge_heads(ops.matmul(attn, v)), p / "out")
    return out, attn


def multi_head_self_attention(
    x: Tensor, p: Scope, cfg: BlockConfig, *, bias: Optional[np.ndarray] = None
) -> Tuple[Tensor, Tensor]:
    return multi_head_attention(x, x, p, cfg, bias=bias)


def init_mlp(builder: ParamBuilder, cfg: BlockConfig, *, zero_output: bool = False) -> None:
    init_linear(builder.child("fc1"), cfg.hidden_dim, cfg.mlp_dim)
    init_linear(builder.child("fc2"), cfg.mlp_dim, cfg.hidden_dim, zero=zero_output)


def mlp(x: Tensor, p: Scope) -> Tensor:
    return linear(ops.gelu(linear(x, p / "fc1")), p / "fc2")


def init_transformer_block(
    builder: ParamBuilder, cfg: BlockConfig, *, zero_output: bool = False
) -> None:
    init_layer_norm(builder.child("ln1"), cfg.hidden_dim)
    init_attention(builder.child("attn"), cfg, zero_output=zero_output)
    init_layer_norm(builder.child("ln2"), cfg.hidden_dim)
    init_mlp(builder.child("mlp"), cfg, zero_output=zero_output)


def transformer_block(
    x: Tensor,
    p: Scope,
    cfg: BlockConfig,
    *,
    bias: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Tensor]:
    """Pre-norm encoder layer: x + MHSA(LN(x)), then + MLP(LN(.)).

    Returns:
        the output tokens and the attention weights of the layer
    """
    out, attn = multi_head_self_attention(layer_norm(x, p / "ln1"), p / "attn", cfg, bias=bias)
    x = ops.add(x, ops.dropout(out, cfg.dropout, rng))
    out = mlp(layer_norm(x, p / "ln2"), p / "mlp")
    return ops.add(x, ops.dropout(out, cfg.dropout, rng)), attn


def init_cross_attention_block(builder: ParamBuilder, cfg: BlockConfig) -> None:
    init_layer_norm(builder.child("ln1"), cfg.hidden_dim)
    init_attention(builder.child("self_attn"), cfg)
    init_layer_norm(builder.child("ln2"), cfg.hidden_dim)
    init_layer_norm(builder.child("ln_memory"), cfg.hidden_dim)
    init_attention(builder.child("cross_attn"), cfg)
    init_layer_norm(builder.child("ln3"), cfg.hidden_dim)
    init_mlp(builder.child("mlp"), cfg)


def cross_attention_block(
    x: Tensor,
    memory: Tensor,
    p: Scope,
    cfg: BlockConfig,
    *,
    bias: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Pre-norm decoder layer: self-attention, cross-attention to `memory`, MLP."""
    out, _ = multi_head_self_attention(layer_norm(x, p / "ln1"), p / "self_attn", cfg, bias=bias)
    x = ops.add(x, ops.dropout(out, cfg.dropout, rng))
    out, _ = multi_head_attention(
        layer_norm(x, p / "ln2"), layer_norm(memory, p / "ln_memory"), p / "cross_attn", cfg
    )
    x = ops.add(x, ops.dropout(out, cfg.dropout, rng))
    out = mlp(layer_norm(x, p / "ln3"), p / "mlp")
    return ops.add(x, ops.dropout(out, cfg.dropout, rng))


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    return ops.embedding_lookup(table, ids)
