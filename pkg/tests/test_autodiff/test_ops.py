import numpy as np
import pytest

from ivcl.autodiff import ops
from ivcl.autodiff.exceptions import DimensionError, EmbeddingIndexError
from ivcl.autodiff.tensor import GradTape, Tensor
from ivcl.exceptions import DataError


@pytest.mark.parametrize(
    "a_shape, b_shape",
    [
        pytest.param((3,), (3, 2), id="vector"),
        pytest.param((2, 3), (4, 2), id="inner"),
        pytest.param((2, 2, 3), (3, 3, 2), id="batch"),
    ],
)
def test_matmul_dimension_errors(a_shape, b_shape):
    with pytest.raises(DimensionError):
        ops.matmul(Tensor(np.ones(a_shape)), Tensor(np.ones(b_shape)))


def test_add_incompatible_shapes():
    with pytest.raises(DimensionError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones(4)))


def test_softmax_rows_sum_to_one():
    x = Tensor(np.random.default_rng(0).standard_normal((4, 7)) * 10)
    np.testing.assert_allclose(ops.softmax(x).data.sum(axis=-1), np.ones(4), rtol=1e-5)


def test_log_softmax_is_stable():
    out = ops.log_softmax(Tensor([[1000.0, 0.0]]))
    assert np.all(np.isfinite(out.data))
    assert out.data[0, 0] == pytest.approx(0.0, abs=1e-6)


def test_layer_norm_of_constant_rows_is_beta():
    x = Tensor(np.full((2, 4), 3.0))
    out = ops.layer_norm(x, Tensor(np.ones(4)), Tensor(np.full(4, 0.5)))
    np.testing.assert_allclose(out.data, np.full((2, 4), 0.5))


def test_layer_norm_normalizes():
    x = Tensor(np.random.default_rng(1).standard_normal((3, 16)) * 5 + 2)
    out = ops.layer_norm(x, Tensor(np.ones(16)), Tensor(np.zeros(16))).data
    np.testing.assert_allclose(out.mean(axis=-1), np.zeros(3), atol=1e-5)
    np.testing.assert_allclose(out.std(axis=-1), np.ones(3), rtol=1e-3)


def test_gelu_values():
    out = ops.gelu(Tensor([0.0, 10.0, -10.0])).data
    np.testing.assert_allclose(out, [0.0, 10.0, 0.0], atol=1e-5)


def test_embedding_lookup_out_of_range():
    with pytest.raises(EmbeddingIndexError):
        ops.embedding_lookup(Tensor(np.ones((3, 2))), np.array([0, 3]))


def test_embedding_gradient_scatters_additively():
    with GradTape() as tape:
        table = tape.watch(Tensor(np.zeros((3, 2))))
        loss = ops.sum(ops.embedding_lookup(table, np.array([1, 1, 2])))
    np.testing.assert_allclose(tape.backward(loss)[table.node], [[0.0, 0.0], [2.0, 2.0], [1.0, 1.0]])


def test_take_repeated_indices_gradient():
    with GradTape() as tape:
        x = tape.watch(Tensor(np.ones((2, 3))))
        loss = ops.sum(ops.take(x, [2, 0, 2], axis=1))
    np.testing.assert_allclose(tape.backward(loss)[x.node], [[1.0, 0.0, 2.0], [1.0, 0.0, 2.0]])


def test_gather_rows():
    x = Tensor(np.arange(12.0).reshape(1, 4, 3))
    out = ops.gather_rows(x, np.array([[3, 0]]))
    np.testing.assert_array_equal(out.data, [[[9.0, 10.0, 11.0], [0.0, 1.0, 2.0]]])


def test_straight_through_uses_soft_gradient():
    with GradTape() as tape:
        soft = tape.watch(Tensor([0.2, 0.8]))
        out = ops.straight_through(np.array([0.0, 1.0]), soft)
        loss = ops.sum(out * Tensor([3.0, 5.0]))
    np.testing.assert_array_equal(out.data, [0.0, 1.0])
    np.testing.assert_allclose(tape.backward(loss)[soft.node], [3.0, 5.0])


def test_straight_through_shape_mismatch():
    with pytest.raises(DimensionError):
        ops.straight_through(np.zeros(3), Tensor(np.zeros(2)))


def test_dropout_identity_without_rate():
    x = Tensor(np.ones(5))
    assert ops.dropout(x, 0.0, np.random.default_rng(0)) is x
    assert ops.dropout(x, 0.5, None) is x


def test_dropout_preserves_expectation():
    out = ops.dropout(Tensor(np.ones(20000)), 0.25, np.random.default_rng(0)).data
    assert np.all((out == 0.0) | np.isclose(out, 4.0 / 3.0))
    assert out.mean() == pytest.approx(1.0, abs=0.03)


def test_one_hot_out_of_range():
    with pytest.raises(DataError):
        ops.one_hot(np.array([0, 4]), 4)


def test_cross_entropy_of_uniform_logits():
    loss = ops.cross_entropy(Tensor(np.zeros((3, 5))), np.array([0, 1, 4]))
    assert loss.item() == pytest.approx(np.log(5.0), rel=1e-5)


def test_weighted_cross_entropy_ignores_zero_weights():
    logits = Tensor([[10.0, 0.0], [0.0, 10.0]])
    loss = ops.cross_entropy(logits, np.array([0, 0]), np.array([1.0, 0.0]))
    assert loss.item() == pytest.approx(np.log1p(np.exp(-10.0)), rel=1e-2)
