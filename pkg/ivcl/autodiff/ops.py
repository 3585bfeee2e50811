"""Differentiable primitives.

Every primitive computes its value with numpy, then registers a backward
rule on the active tape. Rules skip the gradients of untracked inputs.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf

from ..constants import LAYER_NORM_EPS
from ..exceptions import DataError
from .exceptions import DimensionError, EmbeddingIndexError
from .tensor import Operand, Tensor, as_tensor, record

Axis = Optional[Union[int, Tuple[int, ...]]]

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back to the shape of a broadcast operand."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(
            f"{op}: cannot broadcast shapes {a.shape} and {b.shape}."
        ) from None


def _check_axis(op: str, x: Tensor, axis: int) -> int:
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"{op}: axis {axis} invalid for shape {x.shape}.")
    return axis % x.ndim


def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def backward(g: np.ndarray):
        return (
            _unbroadcast(g, a.shape) if a.tracked else None,
            _unbroadcast(g, b.shape) if b.tracked else None,
        )

    return record("add", (a, b), a.data + b.data, backward)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def backward(g: np.ndarray):
        return (
            _unbroadcast(g, a.shape) if a.tracked else None,
            _unbroadcast(-g, b.shape) if b.tracked else None,
        )

    return record("sub", (a, b), a.data - b.data, backward)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def backward(g: np.ndarray):
        return (
            _unbroadcast(g * b.data, a.shape) if a.tracked else None,
            _unbroadcast(g * a.data, b.shape) if b.tracked else None,
        )

    return record("mul", (a, b), a.data * b.data, backward)


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)

    def backward(g: np.ndarray):
        return (
            _unbroadcast(g / b.data, a.shape) if a.tracked else None,
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
            if b.tracked
            else None,
        )

    return record("div", (a, b), a.data / b.data, backward)


def neg(x: Operand) -> Tensor:
    x = as_tensor(x)
    return record("neg", (x,), -x.data, lambda g: (-g,))


def exp(x: Operand) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return record("exp", (x,), y, lambda g: (g * y,))


def log(x: Operand) -> Tensor:
    x = as_tensor(x)
    return record("log", (x,), np.log(x.data), lambda g: (g / x.data,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(
            f"matmul: operands need at least 2 dimensions, got {a.shape} and {b.shape}."
        )
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul: inner dimensions of {a.shape} and {b.shape} differ."
        )
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(
            f"matmul: batch dimensions of {a.shape} and {b.shape} differ."
        ) from None

    def backward(g: np.ndarray):
        return (
            _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
            if a.tracked
            else None,
            _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
            if b.tracked
            else None,
        )

    return record("matmul", (a, b), np.matmul(a.data, b.data), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _check_axis("softmax", x, axis)
    shifted = np.exp(x.data - x.data.max(axis=axis, keepdims=True))
    y = shifted / shifted.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return record("softmax", (x,), y, backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _check_axis("log_softmax", x, axis)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    y = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g: np.ndarray):
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)

    return record("log_softmax", (x,), y, backward)


def layer_norm(
    x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS
) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then scale and shift.

    A constant vector normalizes to zeros.
    """
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(
            f"layer_norm: gamma {gamma.shape} and beta {beta.shape} "
            f"must match the last dimension of {x.shape}."
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    lead = tuple(range(x.ndim - 1))

    def backward(g: np.ndarray):
        gx = None
        if x.tracked:
            gxhat = g * gamma.data
            gx = inv_std * (
                gxhat
                - gxhat.mean(axis=-1, keepdims=True)
                - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
            )
        return (
            gx,
            (g * xhat).sum(axis=lead) if gamma.tracked else None,
            g.sum(axis=lead) if beta.tracked else None,
        )

    return record(
        "layer_norm", (x, gamma, beta), xhat * gamma.data + beta.data, backward
    )


def gelu(x: Tensor) -> Tensor:
    """x·Φ(x) with the exact Gaussian CDF."""
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT_2))

    def backward(g: np.ndarray):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return record("gelu", (x,), x.data * cdf, backward)


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    def backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return record("sum", (x,), x.data.sum(axis=axis, keepdims=keepdims), backward)


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot reshape {x.shape} into {tuple(shape)}.") from None
    return record("reshape", (x,), y, lambda g: (g.reshape(x.shape),))


def swapaxes(x: Tensor, axis1: int, axis2: int) -> Tensor:
    return record(
        "swapaxes",
        (x,),
        np.swapaxes(x.data, axis1, axis2),
        lambda g: (np.swapaxes(g, axis1, axis2),),
    )


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        y = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError(
            f"concat: shapes {[t.shape for t in tensors]} differ outside axis {axis}."
        ) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=axis))

    return record("concat", tensors, y, backward)


def take(x: Tensor, indices: Sequence[int], axis: int) -> Tensor:
    """Select entries along one axis with a 1-D integer index."""
    axis = _check_axis("take", x, axis)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 1:
        raise DimensionError(f"take: indices must be 1-D, got shape {indices.shape}.")

    def backward(g: np.ndarray):
        gx = np.zeros_like(x.data)
        np.add.at(np.moveaxis(gx, axis, 0), indices, np.moveaxis(g, axis, 0))
        return (gx,)

    return record("take", (x,), np.take(x.data, indices, axis=axis), backward)


def gather_rows(x: Tensor, ids: np.ndarray) -> Tensor:
    """Per batch row, gather tokens: x (..., N, D), ids (..., u) -> (..., u, D)."""
    ids = np.asarray(ids, dtype=np.int64)
    if x.ndim < 2 or x.shape[:-2] != ids.shape[:-1]:
        raise DimensionError(
            f"gather_rows: leading dimensions of {x.shape} and ids {ids.shape} differ."
        )
    n, d = x.shape[-2:]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise EmbeddingIndexError(f"gather_rows: ids outside of [0, {n}).")
    flat_x = x.data.reshape(-1, n, d)
    flat_ids = ids.reshape(flat_x.shape[0], -1)
    rows = np.arange(flat_x.shape[0])[:, None]

    def backward(g: np.ndarray):
        gx = np.zeros_like(flat_x)
        np.add.at(gx, (rows, flat_ids), g.reshape(flat_ids.shape + (d,)))
        return (gx.reshape(x.shape),)

    y = flat_x[rows, flat_ids].reshape(ids.shape + (d,))
    return record("gather_rows", (x,), y, backward)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of a (V, d) table; the gradient scatters back additively."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise DimensionError(f"embedding_lookup: table must be 2-D, got {table.shape}.")
    vocab = table.shape[0]
    if ids.size and ((bad := ids[(ids < 0) | (ids >= vocab)]).size):
        raise EmbeddingIndexError(
            f"embedding_lookup: id {int(bad[0])} outside of table with {vocab} rows."
        )

    def backward(g: np.ndarray):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return record("embedding_lookup", (table,), table.data[ids], backward)


def straight_through(hard: np.ndarray, soft: Tensor) -> Tensor:
    """Value of `hard`, gradient of `soft`."""
    if hard.shape != soft.shape:
        raise DimensionError(
            f"straight_through: shapes {hard.shape} and {soft.shape} differ."
        )
    return record("straight_through", (soft,), hard, lambda g: (g,))


def stop_gradient(x: Tensor) -> Tensor:
    return x.detach()


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when `rate` is 0 or no generator is given."""
    if rate == 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, keep)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DataError(
            f"Labels must lie in [0, {num_classes}), "
            f"got values in [{labels.min()}, {labels.max()}]."
        )
    return np.eye(num_classes)[labels]


def cross_entropy(
    logits: Tensor, labels: np.ndarray, weights: Optional[np.ndarray] = None
) -> Tensor:
    """Softmax cross-entropy averaged over the (optionally weighted) positions."""
    picked = sum(
        mul(log_softmax(logits, axis=-1), one_hot(labels, logits.shape[-1])), axis=-1
    )
    if weights is None:
        return neg(mean(picked))
    weights = np.asarray(weights)
    return neg(mul(sum(mul(picked, weights)), 1.0 / float(weights.sum())))
