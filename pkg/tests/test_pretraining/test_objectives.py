import numpy as np
import pytest

from ivcl.autodiff.optim import OptimizerKind, OptimizerState
from ivcl.autodiff.tensor import Tensor
from ivcl.exceptions import ConfigurationError
from ivcl.model.ivcl_model import init_ivcl_params
from ivcl.nn.blocks import patchify, unpatchify
from ivcl.pretraining.masking import make_mask_plan
from ivcl.pretraining.objectives import (
    image_mae_loss,
    image_mae_step,
    ivcl_loss,
    pretrain_step,
    reconstruction_loss,
    video_mae_loss,
    video_mae_step,
)


def _plans(count: int, total: int, context: int, rng: np.random.Generator, patches: int = 4):
    return [make_mask_plan(total, context, patches, 0.5, rng) for _ in range(count)]


def test_reconstruction_loss_of_perfect_prediction(rng):
    plans = _plans(2, 3, 1, rng)
    target = rng.random((2, 2, 4, 6))
    assert reconstruction_loss(Tensor(target), target, plans).item() == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("masked_only", [True, False])
def test_reconstruction_loss_is_a_mean(rng, masked_only):
    plans = _plans(2, 3, 1, rng)
    target = np.full((2, 2, 4, 6), 2.0)
    loss = reconstruction_loss(Tensor(np.zeros((2, 2, 4, 6))), target, plans, masked_only=masked_only)
    assert loss.item() == pytest.approx(4.0)


def test_reconstruction_loss_only_counts_masked_patches():
    plan = make_mask_plan(1, 0, 4, 0.5, np.random.default_rng(0))
    target = np.zeros((1, 1, 4, 2))
    for patch in range(4):
        if patch not in plan.masked(0):
            target[0, 0, patch] = 100.0
    assert reconstruction_loss(Tensor(np.zeros_like(target)), target, [plan]).item() == 0.0
    assert reconstruction_loss(Tensor(np.zeros_like(target)), target, [plan], masked_only=False).item() > 0.0


def test_reconstruction_loss_shape_mismatch(rng):
    plans = _plans(2, 3, 1, rng)
    with pytest.raises(ConfigurationError):
        reconstruction_loss(Tensor(np.zeros((2, 2, 4, 6))), np.zeros((2, 2, 4, 5)), plans)
    with pytest.raises(ConfigurationError):
        reconstruction_loss(Tensor(np.zeros((2, 3, 4, 6))), np.zeros((2, 3, 4, 6)), plans)


def test_ivcl_loss(toy_model, rng):
    params = init_ivcl_params(toy_model, seed=0)
    clips = rng.random((2, 4, 8, 8, 3))
    plans = _plans(2, 4, 1, rng)
    output = ivcl_loss(params, clips, plans, toy_model)
    assert output.predictions.shape == (2, 3, 4, 48)
    assert output.targets.shape == (2, 3, 4, 48)
    assert output.weights.shape == (2, 3, 4)
    assert np.isfinite(output.loss.item())
    again = ivcl_loss(params, clips, plans, toy_model)
    assert again.loss.item() == output.loss.item()
    dropped = ivcl_loss(params, clips, plans, toy_model, drop_context=True)
    assert dropped.loss.item() != output.loss.item()


def test_ivcl_loss_without_context(toy_model, rng):
    params = init_ivcl_params(toy_model, seed=0)
    output = ivcl_loss(params, rng.random((1, 2, 8, 8, 3)), _plans(1, 2, 0, rng), toy_model)
    assert output.predictions.shape == (1, 2, 4, 48)


def test_image_mae_loss(toy_model, rng):
    params = init_ivcl_params(toy_model, seed=0)
    frames = rng.random((2, 8, 8, 3))
    output = image_mae_loss(params, frames, _plans(2, 1, 0, rng), toy_model)
    assert output.predictions.shape == (2, 1, 4, 48)
    with pytest.raises(ConfigurationError):
        image_mae_loss(params, frames, _plans(2, 2, 0, rng), toy_model)


def test_video_mae_loss(toy_model, rng):
    params = init_ivcl_params(toy_model, seed=0, with_slots=False)
    clips = rng.random((2, 3, 8, 8, 3))
    output = video_mae_loss(params, clips, _plans(2, 3, 0, rng), toy_model)
    assert output.predictions.shape == (2, 3, 4, 48)
    with pytest.raises(ConfigurationError):
        video_mae_loss(params, clips, _plans(2, 3, 1, rng), toy_model)


def test_pretrain_step_updates_every_trainable_parameter(toy_model, rng):
    params = init_ivcl_params(toy_model, seed=0)
    state = OptimizerState.create(params, OptimizerKind.ADAM, 1e-3)
    clips = rng.random((2, 4, 8, 8, 3))
    plans = _plans(2, 4, 1, rng)
    outcome = pretrain_step(params, state, clips, plans, toy_model, step=1)
    assert outcome.state.t == 1
    assert outcome.loss == pytest.approx(ivcl_loss(params, clips, plans, toy_model).loss.item(), rel=1e-5)
    assert not np.array_equal(outcome.params["decoder/head/w"].data, params["decoder/head/w"].data)
    assert not np.array_equal(outcome.params["encoder/slots"].data, params["encoder/slots"].data)


def test_image_mae_step(toy_model, rng):
    params = init_ivcl_params(toy_model, seed=0)
    state = OptimizerState.create(params, OptimizerKind.ADAM, 1e-3)
    frames = rng.random((2, 8, 8, 3))
    plans = _plans(2, 1, 0, rng)
    outcome = image_mae_step(params, state, frames, plans, toy_model, step=1)
    assert outcome.loss == pytest.approx(image_mae_loss(params, frames, plans, toy_model).loss.item(), rel=1e-5)
    assert not np.array_equal(outcome.params["decoder/head/w"].data, params["decoder/head/w"].data)


def test_video_mae_step(toy_model, rng):
    params = init_ivcl_params(toy_model, seed=0, with_slots=False)
    state = OptimizerState.create(params, OptimizerKind.ADAM, 1e-3)
    clips = rng.random((2, 3, 8, 8, 3))
    plans = _plans(2, 3, 0, rng)
    outcome = video_mae_step(params, state, clips, plans, toy_model, step=1)
    assert outcome.loss == pytest.approx(video_mae_loss(params, clips, plans, toy_model).loss.item(), rel=1e-5)
    assert outcome.state.t == 1


def test_predictions_ignore_masked_pixels(toy_model):
    params = init_ivcl_params(toy_model, seed=0)
    gen = np.random.default_rng(11)
    size, patch = toy_model.image_size, toy_model.patch_size
    for _ in range(100):
        context = int(gen.integers(0, 3))
        ratio = float(gen.choice([0.25, 0.5, 0.75]))
        plans = [make_mask_plan(4, context, toy_model.num_patches, ratio, gen) for _ in range(2)]
        clips = gen.random((2, 4, size, size, 3))
        patches = patchify(clips, patch)
        for b, plan in enumerate(plans):
            for frame in plan.query_frame_ids:
                masked = list(plan.masked(frame))
                patches[b, frame, masked] = gen.random((len(masked), toy_model.patch_dim))
        scrambled = unpatchify(patches, patch, size, size)
        expected = ivcl_loss(params, clips, plans, toy_model).predictions.data
        actual = ivcl_loss(params, scrambled, plans, toy_model).predictions.data
        np.testing.assert_array_equal(actual, expected)
