from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Collection, Dict, Mapping, Optional, Tuple

import numpy as np
from typing_extensions import Self

from .exceptions import DimensionError, NonFiniteGradientError, NonFiniteLossError
from .tensor import GradTape, ParamTable, Tensor


class OptimizerKind(str, Enum):
    ADAM = "adam"
    ADAMW = "adamw"

    __str__ = str.__str__


@dataclass(frozen=True)
class OptimizerState:
    """Step count, moment buffers and hyperparameters of Adam / AdamW."""

    kind: OptimizerKind
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        params: Mapping[str, Tensor],
        kind: OptimizerKind,
        lr: float,
        *,
        trainable: Optional[Collection[str]] = None,
        **hyperparameters: float,
    ) -> Self:
        """Zero-initialized moments for every trainable parameter."""
        names = [n for n in params if trainable is None or n in trainable]
        return cls(
            kind=OptimizerKind(kind),
            lr=lr,
            m={n: np.zeros_like(params[n].data) for n in names},
            v={n: np.zeros_like(params[n].data) for n in names},
            **hyperparameters,
        )

    @property
    def trainable(self) -> Tuple[str, ...]:
        return tuple(self.m)


def optimizer_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
) -> Tuple[ParamTable, OptimizerState]:
    """Apply one Adam (or AdamW) update with bias correction.

    Parameters without moment buffers in `state` are frozen and returned
    unchanged. The update is aborted, leaving everything untouched, when a
    gradient is not finite.

    Returns:
        the updated parameter table and optimizer state
    """
    for name in state.m:
        if (grad := grads.get(name)) is None:
            raise KeyError(f"No gradient for parameter '{name}'.")
        if grad.shape != params[name].shape or grad.shape != state.m[name].shape:
            raise DimensionError(
                f"Parameter '{name}': shape {params[name].shape}, "
                f"gradient {grad.shape}, moments {state.m[name].shape}."
            )
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(
                f"Non-finite gradient for parameter '{name}' at step {state.t + 1}."
            )

    t = state.t + 1
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    new_params = dict(params)
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    for name in state.m:
        grad = grads[name]
        theta = params[name].data
        new_m[name] = m = state.beta1 * state.m[name] + (1.0 - state.beta1) * grad
        new_v[name] = v = state.beta2 * state.v[name] + (1.0 - state.beta2) * grad * grad
        if state.kind is OptimizerKind.ADAMW:
            theta = theta * (1.0 - state.lr * state.weight_decay)
        update = (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        new_params[name] = Tensor(theta - state.lr * update)
    return new_params, replace(state, t=t, m=new_m, v=new_v)


@dataclass(frozen=True)
class StepOutcome:
    loss: float
    params: ParamTable
    state: OptimizerState
    aux: Dict[str, float] = field(default_factory=dict)


LossFn = Callable[[ParamTable], Tuple[Tensor, Dict[str, float]]]


def minimize_step(
    params: Mapping[str, Tensor],
    state: OptimizerState,
    loss_fn: LossFn,
    *,
    step: Optional[int] = None,
) -> StepOutcome:
    """Record `loss_fn` on a fresh tape, back-propagate and update.

    Args:
        params: current parameter table
        state: optimizer state; its moment buffers select the trainable parameters
        loss_fn: builds the scalar loss and auxiliary metrics from the parameters
        step: step number reported in diagnostics

    Raises:
        NonFiniteLossError: the loss is NaN or infinite
        NonFiniteGradientError: a gradient is NaN or infinite
    """
    with GradTape() as tape:
        watched = tape.watch_all({n: params[n] for n in state.m})
        loss, aux = loss_fn({**params, **watched})
    value = loss.item()
    if not np.isfinite(value):
        raise NonFiniteLossError(
            f"Loss is {value} at step {step if step is not None else state.t + 1}."
        )
    grads = tape.gradients(loss, watched)
    new_params, new_state = optimizer_step(params, grads, state)
    return StepOutcome(loss=value, params=new_params, state=new_state, aux=aux)
