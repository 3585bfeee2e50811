import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import (
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from .exceptions import NotOnTapeError, NotScalarError

_local = threading.local()

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def get_dtype() -> type:
    """Floating type of every tensor created in the current thread."""
    return getattr(_local, "dtype", np.float32)


@contextmanager
def float64_mode() -> Iterator[None]:
    """Evaluate in double precision for the duration of the context."""
    previous = get_dtype()
    _local.dtype = np.float64
    try:
        yield
    finally:
        _local.dtype = previous


class Tensor:
    """n-dimensional array, optionally tracked by the active GradTape.

    Tensors are never mutated: operations return new tensors, and tracking
    is obtained by `GradTape.watch`, which returns a tracked copy.
    """

    __slots__ = ("data", "node")

    def __init__(self, data: Any, node: Optional[int] = None) -> None:
        self.data: np.ndarray = np.asarray(data, dtype=get_dtype())
        self.node = node

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def tracked(self) -> bool:
        return self.node is not None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        node = "" if self.node is None else f", node={self.node}"
        return f"Tensor(shape={self.shape}{node})"

    def __add__(self, other: "Operand") -> "Tensor":
        from .ops import add

        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: "Operand") -> "Tensor":
        from .ops import sub

        return sub(self, other)

    def __rsub__(self, other: "Operand") -> "Tensor":
        from .ops import sub

        return sub(other, self)

    def __mul__(self, other: "Operand") -> "Tensor":
        from .ops import mul

        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: "Operand") -> "Tensor":
        from .ops import div

        return div(self, other)

    def __neg__(self) -> "Tensor":
        from .ops import neg

        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from .ops import matmul

        return matmul(self, other)


Operand = Union[Tensor, np.ndarray, float, int]
ParamTable = Dict[str, Tensor]


def as_tensor(value: Operand) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass(frozen=True)
class TapeEntry:
    """A recorded primitive operation"""

    op: str
    inputs: Tuple[Optional[int], ...]
    output: int
    backward: BackwardFn


class GradTape:
    """Define-by-run record of the primitive operations of one step.

    The tape is active inside its `with` block, for the current thread only.
    """

    def __init__(self) -> None:
        self.entries: List[TapeEntry] = []
        self._next_node = 0

    def __enter__(self) -> "GradTape":
        _stack().append(self)
        return self

    def __exit__(self, *_: Any) -> None:
        _stack().pop()

    def _new_node(self) -> int:
        node, self._next_node = self._next_node, self._next_node + 1
        return node

    def watch(self, tensor: Tensor) -> Tensor:
        """Return a tracked tensor sharing the data of `tensor`."""
        return Tensor(tensor.data, self._new_node())

    def watch_all(self, params: Mapping[str, Tensor]) -> ParamTable:
        return {name: self.watch(tensor) for name, tensor in params.items()}

    def record(
        self,
        op: str,
        inputs: Sequence[Tensor],
        output: np.ndarray,
        backward: BackwardFn,
    ) -> Tensor:
        if all(t.node is None for t in inputs):
            return Tensor(output)
        node = self._new_node()
        self.entries.append(
            TapeEntry(op, tuple(t.node for t in inputs), node, backward)
        )
        return Tensor(output, node)

    def backward(self, loss: Tensor) -> Dict[int, np.ndarray]:
        """Propagate the gradient of a scalar loss to every recorded node.

        Returns:
            the gradients, indexed by node id; nodes the loss does not depend
            on are absent
        """
        if loss.size != 1:
            raise NotScalarError(f"Loss must be a scalar, got shape {loss.shape}.")
        if loss.node is None or loss.node >= self._next_node:
            raise NotOnTapeError("Loss was not computed on this tape.")
        grads: Dict[int, np.ndarray] = {loss.node: np.ones_like(loss.data)}
        for entry in reversed(self.entries):
            if (grad := grads.pop(entry.output, None)) is None:
                continue
            for node, input_grad in zip(entry.inputs, entry.backward(grad)):
                if node is None or input_grad is None:
                    continue
                if node in grads:
                    grads[node] = grads[node] + input_grad
                else:
                    grads[node] = input_grad
        return grads

    def gradients(
        self, loss: Tensor, watched: Mapping[str, Tensor]
    ) -> Dict[str, np.ndarray]:
        """Gradients of `loss` with respect to watched tensors, by name.

        Tensors the loss does not depend on get a zero gradient.
        """
        grads = self.backward(loss)
        dtype = get_dtype()
        return {
            name: (
                grads[t.node].astype(dtype, copy=False)
                if t.node in grads
                else np.zeros_like(t.data)
            )
            for name, t in watched.items()
        }


def _stack() -> List[GradTape]:
    if (stack := getattr(_local, "tapes", None)) is None:
        stack = _local.tapes = []
    return stack


def active_tape() -> Optional[GradTape]:
    return stack[-1] if (stack := _stack()) else None


def record(
    op: str, inputs: Sequence[Tensor], output: np.ndarray, backward: BackwardFn
) -> Tensor:
    """Wrap the result of a primitive, recording it when a tape is active."""
    output = np.asarray(output, dtype=get_dtype())
    if (tape := active_tape()) is None:
        return Tensor(output)
    return tape.record(op, inputs, output, backward)
