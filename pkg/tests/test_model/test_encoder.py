import numpy as np
import pytest
from scipy.stats import chisquare

from ivcl.autodiff.tensor import Tensor
from ivcl.exceptions import ConfigurationError, ContractViolationError
from ivcl.model.config import ModelConfig, PoolMethod
from ivcl.model.decoder import decode_frame
from ivcl.model.encoder import encode_image, gumbel_max_select, pool_slots, pooling_weights
from ivcl.model.ivcl_model import (
    DECODER_SCOPE,
    ENCODER_SCOPE,
    TEMPORAL_SCOPE,
    encode_video_for_transfer,
    init_ivcl_params,
)
from ivcl.model.temporal import temporal_encode, temporal_forward
from ivcl.nn.blocks import patchify
from ivcl.nn.params import Scope


def _patches(cfg: ModelConfig, rng: np.random.Generator, batch: int = 2) -> np.ndarray:
    return patchify(rng.random((batch, cfg.image_size, cfg.image_size, cfg.channels)), cfg.patch_size)


def test_init_scopes_and_determinism(toy_model):
    a = init_ivcl_params(toy_model, seed=3)
    b = init_ivcl_params(toy_model, seed=3)
    assert {name.split("/")[0] for name in a} == {ENCODER_SCOPE, TEMPORAL_SCOPE, DECODER_SCOPE}
    for name in a:
        np.testing.assert_array_equal(a[name].data, b[name].data)
    c = init_ivcl_params(toy_model, seed=4)
    assert not np.array_equal(a["encoder/slots"].data, c["encoder/slots"].data)


def test_init_without_slots_or_decoder(toy_model):
    params = init_ivcl_params(toy_model, seed=0, with_slots=False, with_decoder=False)
    assert "encoder/slots" not in params
    assert not any(name.startswith(f"{DECODER_SCOPE}/") for name in params)


def test_encode_image_shapes(toy_model, rng):
    encoder = Scope(init_ivcl_params(toy_model, seed=0)) / ENCODER_SCOPE
    encoded = encode_image(encoder, _patches(toy_model, rng), np.array([[3, 1], [0, 2]]), toy_model)
    assert encoded.slots.shape == (2, 2, 8)
    assert encoded.patches.shape == (2, 2, 8)
    np.testing.assert_array_equal(encoded.patch_ids, [[1, 3], [0, 2]])
    assert len(encoded.layer_states) == toy_model.encoder_layers
    assert encoded.attentions[0].shape == (2, 2, 4, 4)


def test_encode_image_without_slots(toy_model, rng):
    encoder = Scope(init_ivcl_params(toy_model, seed=0, with_slots=False)) / ENCODER_SCOPE
    encoded = encode_image(encoder, _patches(toy_model, rng), None, toy_model, with_slots=False)
    assert encoded.slots.shape == (2, 0, 8)
    assert encoded.patches.shape == (2, 4, 8)
    with pytest.raises(ContractViolationError):
        pool_slots(encoder, encoded, toy_model)


@pytest.mark.parametrize(
    "ids",
    [
        pytest.param(np.zeros((2, 0), dtype=np.int64), id="empty"),
        pytest.param(np.array([[1, 1], [0, 2]]), id="duplicate"),
        pytest.param(np.array([[0, 4], [0, 2]]), id="out_of_range"),
        pytest.param(np.array([[0, 1]]), id="batch"),
    ],
)
def test_encode_image_rejects_ids(toy_model, rng, ids):
    encoder = Scope(init_ivcl_params(toy_model, seed=0)) / ENCODER_SCOPE
    with pytest.raises(ContractViolationError):
        encode_image(encoder, _patches(toy_model, rng), ids, toy_model)


def test_slice_pooling_at_last_layer_matches_final_slots(toy_model, rng):
    cfg = toy_model.copy(update={"pool_layer": toy_model.encoder_layers - 1})
    encoder = Scope(init_ivcl_params(cfg, seed=0)) / ENCODER_SCOPE
    encoded = encode_image(encoder, _patches(cfg, rng), None, cfg)
    np.testing.assert_allclose(pool_slots(encoder, encoded, cfg).data, encoded.slots.data, rtol=1e-6, atol=1e-6)


def test_slice_pooling_at_earlier_layer(toy_model, rng):
    encoder = Scope(init_ivcl_params(toy_model, seed=0)) / ENCODER_SCOPE
    encoded = encode_image(encoder, _patches(toy_model, rng), None, toy_model)
    assert pool_slots(encoder, encoded, toy_model).shape == (2, 2, 8)
    assert pooling_weights(encoder, encoded, toy_model) is None


@pytest.mark.parametrize("method", [PoolMethod.SOFT_ATTENTION, PoolMethod.GUMBEL_MAX])
def test_attention_pooling(toy_model, rng, method):
    cfg = toy_model.copy(update={"pool_method": method})
    encoder = Scope(init_ivcl_params(cfg, seed=0)) / ENCODER_SCOPE
    encoded = encode_image(encoder, _patches(cfg, rng), None, cfg)
    assert pool_slots(encoder, encoded, cfg, rng=np.random.default_rng(1)).shape == (2, 2, 8)
    weights = pooling_weights(encoder, encoded, cfg)
    assert weights.shape == (2, 2, 4)
    np.testing.assert_allclose(weights.sum(axis=-1), np.ones((2, 2)), rtol=1e-5)


def test_gumbel_max_select_is_one_hot():
    scores = Tensor([[0.1, 2.0, -1.0], [3.0, 0.0, 0.5]])
    np.testing.assert_array_equal(gumbel_max_select(scores).data, [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    noisy = gumbel_max_select(scores, np.random.default_rng(0)).data
    np.testing.assert_array_equal(noisy.sum(axis=-1), [1.0, 1.0])
    assert set(np.unique(noisy)) <= {0.0, 1.0}


def test_temporal_encode_rejects_late_frames(toy_model):
    temporal = Scope(init_ivcl_params(toy_model, seed=0)) / TEMPORAL_SCOPE
    tokens = Tensor(np.zeros((1, 2, 8)))
    assert temporal_encode(temporal, tokens, np.array([0, 7]), toy_model).tokens.shape == (1, 2, 8)
    with pytest.raises(ConfigurationError, match="model.max_frames"):
        temporal_encode(temporal, tokens, np.array([0, 8]), toy_model)


def test_temporal_forward_without_context(toy_model, rng):
    temporal = Scope(init_ivcl_params(toy_model, seed=0)) / TEMPORAL_SCOPE
    queries = Tensor(rng.standard_normal((2, 3, 2, 8)))
    ids = np.array([[0, 1, 2], [1, 2, 3]])
    with_none = temporal_forward(temporal, None, np.zeros((2, 0)), queries, ids, toy_model)
    with_empty = temporal_forward(temporal, Tensor(np.zeros((2, 0, 2, 8))), np.zeros((2, 0)), queries, ids, toy_model)
    assert with_none.shape == (2, 3, 2, 8)
    np.testing.assert_array_equal(with_none.data, with_empty.data)


def test_temporal_forward_uses_context(toy_model, rng):
    temporal = Scope(init_ivcl_params(toy_model, seed=0)) / TEMPORAL_SCOPE
    queries = Tensor(rng.standard_normal((1, 1, 2, 8)))
    context = Tensor(rng.standard_normal((1, 2, 2, 8)))
    out = temporal_forward(temporal, context, np.array([[0, 1]]), queries, np.array([[2]]), toy_model)
    alone = temporal_forward(temporal, None, np.zeros((1, 0)), queries, np.array([[2]]), toy_model)
    assert out.shape == (1, 1, 2, 8)
    assert not np.allclose(out.data, alone.data)


def test_decode_frame_restores_patch_order(toy_model, rng):
    decoder = Scope(init_ivcl_params(toy_model, seed=0)) / DECODER_SCOPE
    tokens = Tensor(rng.standard_normal((2, 2, 8)))
    out = decode_frame(decoder, tokens, np.array([[0, 3], [1, 2]]), toy_model.num_patches, toy_model)
    assert out.shape == (2, toy_model.num_patches, toy_model.patch_dim)
    full = decode_frame(decoder, Tensor(rng.standard_normal((1, 4, 8))), np.array([[0, 1, 2, 3]]), 4, toy_model)
    assert full.shape == (1, 4, toy_model.patch_dim)


@pytest.mark.parametrize(
    "ids, perm",
    [
        pytest.param([[0, 2, 3]], [2, 0, 1], id="masked"),
        pytest.param([[0, 1, 2, 3]], [3, 1, 0, 2], id="full"),
    ],
)
def test_decode_frame_follows_patch_ids(toy_model, rng, ids, perm):
    decoder = Scope(init_ivcl_params(toy_model, seed=0)) / DECODER_SCOPE
    ids = np.array(ids)
    tokens = rng.standard_normal((1, ids.shape[1], 8))
    out = decode_frame(decoder, Tensor(tokens), ids, toy_model.num_patches, toy_model)
    shuffled = decode_frame(decoder, Tensor(tokens[:, perm]), ids[:, perm], toy_model.num_patches, toy_model)
    np.testing.assert_allclose(shuffled.data, out.data, rtol=1e-6, atol=1e-7)


def test_temporal_embedding_follows_frame_ids(toy_model, rng):
    temporal = Scope(init_ivcl_params(toy_model, seed=0)) / TEMPORAL_SCOPE
    tokens = rng.standard_normal((1, 3, 8))
    ids = np.array([[0, 1, 5]])
    out = temporal_encode(temporal, Tensor(tokens), ids, toy_model).tokens.data
    perm = [2, 0, 1]
    shuffled = temporal_encode(temporal, Tensor(tokens[:, perm]), ids[:, perm], toy_model).tokens.data
    np.testing.assert_allclose(shuffled, out[:, perm], rtol=1e-5, atol=1e-6)
    moved = temporal_encode(temporal, Tensor(tokens), np.array([[0, 1, 6]]), toy_model).tokens.data
    assert not np.allclose(moved, out)


def test_temporal_forward_depends_on_query_frame_ids(toy_model, rng):
    temporal = Scope(init_ivcl_params(toy_model, seed=0)) / TEMPORAL_SCOPE
    queries = Tensor(rng.standard_normal((1, 1, 2, 8)))
    context = Tensor(rng.standard_normal((1, 1, 2, 8)))
    early = temporal_forward(temporal, context, np.array([[0]]), queries, np.array([[1]]), toy_model)
    late = temporal_forward(temporal, context, np.array([[0]]), queries, np.array([[5]]), toy_model)
    assert not np.allclose(early.data, late.data)


def test_encode_video_for_transfer(toy_model, rng):
    params = init_ivcl_params(toy_model, seed=0, with_decoder=False)
    frames = rng.random((2, 3, 8, 8, 3))
    encoding = encode_video_for_transfer(params, frames, toy_model)
    assert encoding.pooled.shape == (2, 8)
    assert encoding.tokens.shape == (2, 6, 8)
    assert encoding.slots.shape == (2, 3, 2, 8)
    strided = encode_video_for_transfer(params, frames, toy_model, frame_ids=[1, 4, 7])
    assert not np.allclose(strided.pooled.data, encoding.pooled.data)


@pytest.mark.slow
def test_gumbel_max_frequencies_follow_the_softmax():
    probs = np.array([0.5, 0.3, 0.2])
    draws = 20000
    scores = Tensor(np.tile(np.log(probs), (draws, 1)))
    counts = gumbel_max_select(scores, np.random.default_rng(0)).data.sum(axis=0)
    assert counts.sum() == draws
    assert chisquare(counts, draws * probs).pvalue > 1e-3
