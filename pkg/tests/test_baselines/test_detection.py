from contextlib import nullcontext
from typing import Any, ContextManager

import numpy as np
import pytest

from ivcl.autodiff.optim import OptimizerKind, OptimizerState
from ivcl.autodiff.tensor import Tensor
from ivcl.baselines.config import BaselineConfig
from ivcl.baselines.detection import (
    DETECTION_SCOPE,
    NUM_DETECTION_CLASSES,
    SNITCH_CLASS,
    BoxAnnotation,
    DetectionVocab,
    box_to_tokens,
    build_sequence,
    detection_logits,
    detection_loss,
    detection_pretrain_step,
    pad_sequences,
    parse_sequence,
    probe_random_slot,
    shell_game_boxes,
)
from ivcl.baselines.training import init_baseline_head
from ivcl.exceptions import ConfigurationError, DataError
from ivcl.model.ivcl_model import init_ivcl_params
from ivcl.nn.params import Scope
from ivcl.pretraining.config import PretrainObjective
from ivcl.toyworlds.config import ShellGameConfig
from ivcl.toyworlds.shell_game import gen_shell_game

VOCAB = DetectionVocab(128)
SMALL = BaselineConfig(n_bins=8, max_sequence_length=16, decoder_layers=1, decoder_heads=2)


def test_vocabulary_layout():
    assert VOCAB.eos == 128 + NUM_DETECTION_CLASSES
    assert VOCAB.size == VOCAB.eos + 1
    assert VOCAB.class_token(0) == 128
    with pytest.raises(DataError):
        VOCAB.class_token(NUM_DETECTION_CLASSES)
    with pytest.raises(ConfigurationError):
        DetectionVocab(1)


def test_coordinates_round_half_up():
    assert box_to_tokens(BoxAnnotation(0.5, 0.0, 1.0, 1.0, 2), VOCAB) == (64, 0, 127, 127, 130)


@pytest.mark.parametrize(
    "coords, context",
    [
        pytest.param((0.1, 0.1, 0.9, 0.9), nullcontext(), id="valid"),
        pytest.param((0.0, 0.0, 0.0, 0.0), nullcontext(), id="degenerate"),
        pytest.param((-0.1, 0.1, 0.9, 0.9), pytest.raises(DataError), id="negative"),
        pytest.param((0.1, 0.1, 0.9, 1.5), pytest.raises(DataError), id="above_one"),
        pytest.param((0.9, 0.1, 0.1, 0.9), pytest.raises(DataError), id="inverted"),
    ],
)
def test_box_validation(coords, context: ContextManager[Any]):
    with context:
        BoxAnnotation(*coords, 0)


def test_sequence_round_trip(rng):
    boxes = [BoxAnnotation(0.0, 0.0, 0.5, 0.5, 0), BoxAnnotation(0.5, 0.5, 1.0, 1.0, SNITCH_CLASS)]
    tokens = build_sequence(boxes, VOCAB, rng)
    assert len(tokens) == 11
    assert tokens[-1] == VOCAB.eos
    parsed = parse_sequence(tokens, VOCAB)
    assert sorted(b.class_id for b in parsed) == [0, SNITCH_CLASS]
    assert parse_sequence([VOCAB.eos], VOCAB) == []


def test_parse_sequence_errors():
    with pytest.raises(DataError):
        parse_sequence([1, 2, 3, VOCAB.eos], VOCAB)
    with pytest.raises(DataError):
        parse_sequence([1, 2, 3, 4, 5, VOCAB.eos], VOCAB)


def test_pad_sequences():
    targets, weights = pad_sequences([[1, 2, 3], [4]], VOCAB, 8)
    assert targets.tolist() == [[1, 2, 3], [4, VOCAB.eos, VOCAB.eos]]
    assert weights.tolist() == [[1, 1, 1], [1, 0, 0]]
    truncated, _ = pad_sequences([list(range(10))], VOCAB, 4)
    assert truncated.tolist() == [[0, 1, 2, 3]]


def test_shell_game_boxes():
    episode = gen_shell_game(0, ShellGameConfig(grid_size=2, num_objects=2, num_frames=4, image_size=8))
    for frame, state in enumerate(episode.states):
        boxes = shell_game_boxes(episode, frame)
        assert len(boxes) == state.visible_count
        assert (SNITCH_CLASS in [b.class_id for b in boxes]) == state.visible[0]
    box = shell_game_boxes(episode, 0)[0]
    row, col = divmod(episode.states[0].cells[0], 2)
    assert row / 2 < box.ymin < box.ymax < (row + 1) / 2
    assert col / 2 < box.xmin < box.xmax < (col + 1) / 2


def test_probe_random_slot(rng):
    slots = Tensor(np.arange(24, dtype=np.float32).reshape(2, 3, 4))
    probed = probe_random_slot(slots, rng)
    assert probed.shape == (2, 1, 4)
    for b in range(2):
        assert any(np.array_equal(probed.data[b, 0], slots.data[b, s]) for s in range(3))


@pytest.mark.parametrize("probe", [False, True])
def test_detection_loss(toy_model, rng, probe: bool):
    cfg = SMALL.copy(update={"probe_random_slot": probe})
    params = {
        **init_ivcl_params(toy_model, 0, with_decoder=False),
        **init_baseline_head(PretrainObjective.DETECTION, toy_model, cfg, 2, 0),
    }
    vocab = DetectionVocab(cfg.n_bins)
    sequences = [build_sequence([BoxAnnotation(0.0, 0.0, 0.5, 0.5, 1)], vocab, rng), [vocab.eos]]
    loss, aux = detection_loss(params, rng.random((2, 8, 8, 3)), sequences, toy_model, cfg, rng=rng)
    assert np.isfinite(loss.item())
    assert 0.0 <= aux["accuracy"] <= 1.0


def test_unsupervised_objectives_have_no_baseline_head(toy_model):
    with pytest.raises(ConfigurationError):
        init_baseline_head(PretrainObjective.IVCL, toy_model, SMALL, 2, 0)


def test_detection_logits_are_causal(toy_model, rng):
    head = Scope(init_baseline_head(PretrainObjective.DETECTION, toy_model, SMALL, 2, 0)) / DETECTION_SCOPE
    memory = Tensor(rng.standard_normal((1, 2, toy_model.hidden_dim)))
    targets = np.array([[1, 2, 3, 4, 5, 6]])
    changed = targets.copy()
    changed[0, 3] = 7
    logits = detection_logits(head, memory, targets, toy_model, SMALL)
    logits_changed = detection_logits(head, memory, changed, toy_model, SMALL)
    assert logits.shape == (1, 6, DetectionVocab(SMALL.n_bins).size)
    np.testing.assert_allclose(logits.data[0, :4], logits_changed.data[0, :4], rtol=1e-5, atol=1e-6)
    assert not np.allclose(logits.data[0, 4:], logits_changed.data[0, 4:])


def test_detection_pretrain_step(toy_model, rng):
    params = {
        **init_ivcl_params(toy_model, 0, with_decoder=False),
        **init_baseline_head(PretrainObjective.DETECTION, toy_model, SMALL, 2, 0),
    }
    vocab = DetectionVocab(SMALL.n_bins)
    frames = rng.random((2, 8, 8, 3))
    sequences = [build_sequence([BoxAnnotation(0.0, 0.0, 0.5, 0.5, 1)], vocab, rng), [vocab.eos]]
    state = OptimizerState.create(params, OptimizerKind.ADAM, 1e-3)
    outcome = detection_pretrain_step(params, state, frames, sequences, toy_model, SMALL, step=1)
    expected, _ = detection_loss(params, frames, sequences, toy_model, SMALL)
    assert outcome.loss == pytest.approx(expected.item(), rel=1e-5)
    assert outcome.state.t == 1
    assert not np.array_equal(outcome.params["detection/head/w"].data, params["detection/head/w"].data)


def _one_box_frames():
    """One colored patch per frame: its quadrant gives the box and its color the class."""
    frames, boxes = [], []
    colors = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1.0, 1.0, 0.0)]
    for class_id, color in enumerate(colors):
        for row, col in [(0, 0), (0, 1), (1, 0), (1, 1)]:
            frame = np.zeros((8, 8, 3))
            frame[4 * row : 4 * row + 4, 4 * col : 4 * col + 4] = color
            frames.append(frame)
            boxes.append(BoxAnnotation(row / 2, col / 2, (row + 1) / 2, (col + 1) / 2, class_id))
    return np.stack(frames), boxes


@pytest.mark.slow
def test_detection_overfits_a_small_set(toy_model, rng):
    model = toy_model.copy(update={"hidden_dim": 32, "mlp_dim": 64})
    frames, boxes = _one_box_frames()
    vocab = DetectionVocab(SMALL.n_bins)
    sequences = [build_sequence([box], vocab, rng) for box in boxes]
    params = {
        **init_ivcl_params(model, 0, with_decoder=False),
        **init_baseline_head(PretrainObjective.DETECTION, model, SMALL, 2, 0),
    }
    state = OptimizerState.create(params, OptimizerKind.ADAM, 5e-3)
    accuracy = 0.0
    for step in range(1, 3001):
        outcome = detection_pretrain_step(params, state, frames, sequences, model, SMALL, step=step)
        params, state, accuracy = outcome.params, outcome.state, outcome.aux["accuracy"]
        if accuracy >= 0.99:
            break
    assert accuracy >= 0.99
