from contextlib import nullcontext
from typing import Any, ContextManager

import numpy as np
import pytest

from ivcl.autodiff import ops
from ivcl.autodiff.exceptions import DimensionError, NonFiniteGradientError, NonFiniteLossError
from ivcl.autodiff.optim import OptimizerKind, OptimizerState, minimize_step, optimizer_step
from ivcl.autodiff.tensor import Tensor


@pytest.mark.parametrize(
    "kind, weight_decay, expected",
    [
        pytest.param(OptimizerKind.ADAM, 0.5, 0.9, id="adam_ignores_decay"),
        pytest.param(OptimizerKind.ADAMW, 0.5, 0.85, id="adamw_decays_first"),
        pytest.param(OptimizerKind.ADAMW, 0.0, 0.9, id="adamw_without_decay"),
    ],
)
def test_first_step(kind: OptimizerKind, weight_decay: float, expected: float):
    params = {"w": Tensor([1.0])}
    state = OptimizerState.create(params, kind, 0.1, weight_decay=weight_decay)
    new_params, new_state = optimizer_step(params, {"w": np.array([0.5], dtype=np.float32)}, state)
    assert new_params["w"].item() == pytest.approx(expected, abs=1e-6)
    assert new_state.t == 1
    assert state.t == 0


def test_frozen_parameters_are_untouched():
    params = {"a": Tensor([1.0]), "b": Tensor([2.0])}
    state = OptimizerState.create(params, OptimizerKind.ADAM, 0.1, trainable=["a"])
    assert state.trainable == ("a",)
    new_params, _ = optimizer_step(params, {"a": np.ones(1, dtype=np.float32)}, state)
    assert new_params["b"] is params["b"]
    assert new_params["a"].item() != 1.0


@pytest.mark.parametrize(
    "grads, context",
    [
        pytest.param({"w": np.ones(2)}, nullcontext(), id="ok"),
        pytest.param({}, pytest.raises(KeyError), id="missing"),
        pytest.param({"w": np.ones(3)}, pytest.raises(DimensionError), id="shape"),
        pytest.param({"w": np.array([1.0, np.nan])}, pytest.raises(NonFiniteGradientError), id="nan"),
        pytest.param({"w": np.array([np.inf, 1.0])}, pytest.raises(NonFiniteGradientError), id="inf"),
    ],
)
def test_gradient_checks(grads: dict, context: ContextManager[Any]):
    params = {"w": Tensor([1.0, 2.0])}
    state = OptimizerState.create(params, OptimizerKind.ADAMW, 1e-3)
    with context:
        optimizer_step(params, grads, state)


def test_minimize_step_reduces_quadratic():
    params = {"w": Tensor([3.0, -2.0])}
    state = OptimizerState.create(params, OptimizerKind.ADAM, 0.1)

    def loss_fn(t):
        return ops.sum(ops.mul(t["w"], t["w"])), {"norm": float(np.abs(t["w"].data).sum())}

    losses = []
    for step in range(1, 21):
        outcome = minimize_step(params, state, loss_fn, step=step)
        params, state = outcome.params, outcome.state
        losses.append(outcome.loss)
    assert losses[0] == pytest.approx(13.0)
    assert losses[-1] < losses[0]
    assert state.t == 20
    assert outcome.aux["norm"] > 0


def test_minimize_step_rejects_non_finite_loss():
    params = {"w": Tensor([1.0])}
    state = OptimizerState.create(params, OptimizerKind.ADAM, 0.1)
    with pytest.raises(NonFiniteLossError, match="step 7"):
        minimize_step(params, state, lambda t: (ops.mul(ops.sum(t["w"]), np.nan), {}), step=7)
