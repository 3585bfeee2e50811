import threading

import numpy as np
import pytest

from ivcl.autodiff import ops
from ivcl.autodiff.exceptions import NotOnTapeError, NotScalarError
from ivcl.autodiff.tensor import GradTape, Tensor, active_tape, float64_mode, get_dtype


def test_operations_without_tape_are_untracked():
    a = Tensor([1.0, 2.0])
    out = a * a + 1.0
    assert not out.tracked
    np.testing.assert_allclose(out.data, [2.0, 5.0])


def test_square_gradient():
    with GradTape() as tape:
        x = tape.watch(Tensor([1.0, -2.0, 3.0]))
        loss = ops.sum(x * x)
    grads = tape.backward(loss)
    np.testing.assert_allclose(grads[x.node], [2.0, -4.0, 6.0])


def test_broadcast_gradient_is_summed_back():
    with GradTape() as tape:
        params = tape.watch_all({"a": Tensor(np.ones((2, 3))), "b": Tensor(np.zeros(3))})
        loss = ops.sum(params["a"] + params["b"])
    grads = tape.gradients(loss, params)
    assert grads["b"].shape == (3,)
    np.testing.assert_allclose(grads["b"], [2.0, 2.0, 2.0])
    np.testing.assert_allclose(grads["a"], np.ones((2, 3)))


def test_reused_tensor_accumulates_gradient():
    with GradTape() as tape:
        x = tape.watch(Tensor([2.0]))
        loss = ops.sum(x * x * x)
    np.testing.assert_allclose(tape.backward(loss)[x.node], [12.0])


def test_unused_watched_tensor_gets_zero_gradient():
    with GradTape() as tape:
        params = tape.watch_all({"used": Tensor([1.0]), "unused": Tensor([[1.0, 2.0]])})
        loss = ops.sum(params["used"] * 3.0)
    grads = tape.gradients(loss, params)
    np.testing.assert_allclose(grads["used"], [3.0])
    np.testing.assert_array_equal(grads["unused"], np.zeros((1, 2)))


def test_non_scalar_loss():
    with GradTape() as tape:
        x = tape.watch(Tensor([1.0, 2.0]))
        y = x * 2.0
    with pytest.raises(NotScalarError):
        tape.backward(y)


def test_loss_not_on_tape():
    loss = ops.sum(Tensor([1.0, 2.0]))
    with GradTape() as tape:
        pass
    with pytest.raises(NotOnTapeError):
        tape.backward(loss)


def test_detach_stops_tracking():
    with GradTape() as tape:
        x = tape.watch(Tensor([1.0]))
        loss = ops.sum(x * ops.stop_gradient(x))
    np.testing.assert_allclose(tape.backward(loss)[x.node], [1.0])


def test_float64_mode_is_scoped():
    assert get_dtype() is np.float32
    with float64_mode():
        assert Tensor([1.0]).data.dtype == np.float64
    assert Tensor([1.0]).data.dtype == np.float32


def test_tape_is_thread_local():
    seen = []
    with GradTape():
        thread = threading.Thread(target=lambda: seen.append(active_tape()))
        thread.start()
        thread.join()
        assert active_tape() is not None
    assert seen == [None]
    assert active_tape() is None
