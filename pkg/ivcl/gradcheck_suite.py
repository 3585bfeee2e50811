"""Finite-difference checks of every primitive and composite block.

All checks run on a toy model small enough for the whole suite to finish
in minutes on a CPU. Functions are read out through fixed random
projections so that no gradient vanishes by symmetry.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .autodiff import ops
from .autodiff.gradcheck import GradCheckResult, check_gradients
from .autodiff.tensor import ParamTable, Tensor
from .baselines.classification import CLASSIFIER_SCOPE, classification_loss, init_classifier
from .baselines.config import BaselineConfig
from .baselines.detection import DETECTION_SCOPE, DetectionVocab, detection_loss, init_detection_decoder
from .exceptions import IVCLError
from .logging_utils import LogIter
from .model.config import ModelConfig, PoolMethod
from .model.decoder import decode_frame
from .model.encoder import encode_image, gumbel_max_select, pool_slots
from .model.ivcl_model import DECODER_SCOPE, ENCODER_SCOPE, TEMPORAL_SCOPE, init_ivcl_params
from .model.temporal import temporal_forward
from .nn.blocks import (
    causal_bias,
    cross_attention_block,
    init_cross_attention_block,
    init_linear,
    init_transformer_block,
    linear,
    multi_head_self_attention,
    patchify,
    transformer_block,
)
from .nn.params import ParamBuilder, Scope
from .parallel import parallel_map
from .pretraining.masking import make_mask_plan
from .pretraining.objectives import ivcl_loss, reconstruction_loss
from .transfer.finetune import finetune_loss, init_task_head

logger = logging.getLogger(__name__)

TOY_MODEL = ModelConfig(
    image_size=8,
    patch_size=4,
    hidden_dim=8,
    encoder_layers=2,
    encoder_heads=2,
    mlp_dim=16,
    num_slots=2,
    pool_layer=0,
    temporal_layers=1,
    temporal_heads=2,
    decoder_layers=1,
    decoder_heads=2,
    max_frames=4,
)

TOY_BASELINE = BaselineConfig(n_bins=4, max_sequence_length=6, decoder_layers=1, decoder_heads=2)


class GradientCheckFailedError(IVCLError):
    """An analytic gradient disagrees with central differences."""


@dataclass(frozen=True)
class GradCheck:
    name: str
    fn: Callable[[ParamTable], Tensor]
    inputs: Dict[str, np.ndarray]


def _projected(fn: Callable[[ParamTable], Tensor], shape_seed: int) -> Callable[[ParamTable], Tensor]:
    """Scalar readout of `fn` through a projection fixed once per check."""
    projections: Dict[tuple, np.ndarray] = {}

    def scalar(t: ParamTable) -> Tensor:
        out = fn(t)
        if out.shape not in projections:
            projections[out.shape] = np.random.default_rng(shape_seed).standard_normal(out.shape)
        return ops.sum(ops.mul(out, projections[out.shape]))

    return scalar


def _subset(params: Mapping[str, Tensor], *prefixes: str) -> Dict[str, np.ndarray]:
    return {n: np.array(t.data) for n, t in params.items() if n.startswith(prefixes)}


def primitive_checks(rng: np.random.Generator) -> List[GradCheck]:
    def normal(*shape: int) -> np.ndarray:
        return rng.standard_normal(shape)

    def positive(*shape: int) -> np.ndarray:
        return rng.uniform(0.5, 2.0, shape)

    labels = rng.integers(5, size=4)
    weights = rng.uniform(0.0, 1.0, 4)
    gather_ids = np.array([[2, 0, 2], [1, 1, 3]])
    lookup_ids = np.array([[0, 3, 3], [4, 0, 1]])

    checks = [
        ("add_broadcast", lambda t: ops.add(t["a"], t["b"]), {"a": normal(3, 4), "b": normal(4)}),
        ("sub_broadcast", lambda t: ops.sub(t["a"], t["b"]), {"a": normal(2, 3, 4), "b": normal(3, 1)}),
        ("mul_broadcast", lambda t: ops.mul(t["a"], t["b"]), {"a": normal(3, 4), "b": normal(3, 1)}),
        ("div", lambda t: ops.div(t["a"], t["b"]), {"a": normal(3, 4), "b": positive(3, 4)}),
        ("neg", lambda t: ops.neg(t["a"]), {"a": normal(5)}),
        ("exp", lambda t: ops.exp(t["a"]), {"a": normal(3, 4)}),
        ("log", lambda t: ops.log(t["a"]), {"a": positive(3, 4)}),
        ("matmul", lambda t: ops.matmul(t["a"], t["b"]), {"a": normal(3, 4), "b": normal(4, 2)}),
        ("matmul_batched", lambda t: ops.matmul(t["a"], t["b"]), {"a": normal(2, 3, 4), "b": normal(4, 5)}),
        ("softmax", lambda t: ops.softmax(t["a"], axis=-1), {"a": normal(3, 5)}),
        ("log_softmax", lambda t: ops.log_softmax(t["a"], axis=0), {"a": normal(4, 3)}),
        (
            "layer_norm",
            lambda t: ops.layer_norm(t["x"], t["gamma"], t["beta"]),
            {"x": normal(3, 6), "gamma": normal(6), "beta": normal(6)},
        ),
        ("gelu", lambda t: ops.gelu(t["a"]), {"a": normal(4, 4)}),
        ("sum_axis", lambda t: ops.sum(t["a"], axis=1, keepdims=True), {"a": normal(3, 4, 2)}),
        ("mean", lambda t: ops.mean(t["a"], axis=(0, 2)), {"a": normal(3, 4, 2)}),
        ("reshape", lambda t: ops.reshape(t["a"], (4, 6)), {"a": normal(2, 3, 4)}),
        ("swapaxes", lambda t: ops.swapaxes(t["a"], 0, 2), {"a": normal(2, 3, 4)}),
        (
            "concat",
            lambda t: ops.concat([t["a"], t["b"]], axis=1),
            {"a": normal(2, 3), "b": normal(2, 4)},
        ),
        ("take_repeated", lambda t: ops.take(t["a"], [2, 0, 2], axis=1), {"a": normal(2, 4, 3)}),
        ("gather_rows", lambda t: ops.gather_rows(t["a"], gather_ids), {"a": normal(2, 4, 3)}),
        ("embedding_lookup", lambda t: ops.embedding_lookup(t["table"], lookup_ids), {"table": normal(5, 3)}),
        (
            "dropout",
            lambda t: ops.dropout(t["a"], 0.5, np.random.default_rng(7)),
            {"a": normal(4, 4)},
        ),
        (
            "cross_entropy",
            lambda t: ops.cross_entropy(t["logits"], labels),
            {"logits": normal(4, 5)},
        ),
        (
            "cross_entropy_weighted",
            lambda t: ops.cross_entropy(t["logits"], labels, weights),
            {"logits": normal(4, 5)},
        ),
    ]
    return [
        GradCheck(name, _projected(fn, index), inputs)
        for index, (name, fn, inputs) in enumerate(checks)
    ]


def _toy_frames(rng: np.random.Generator, *lead: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, (*lead, TOY_MODEL.image_size, TOY_MODEL.image_size, TOY_MODEL.channels))


def _pooling_check(method: PoolMethod, params: ParamTable, patches: np.ndarray) -> GradCheck:
    cfg = TOY_MODEL.copy(update={"pool_method": method, "pool_layer": 0})
    table = {**params}
    if method is not PoolMethod.SLICE:
        builder = ParamBuilder(np.random.default_rng(3), prefix=f"{ENCODER_SCOPE}/pool/")
        builder.normal("queries", (cfg.num_slots, cfg.hidden_dim))
        builder.ones("norm/gamma", (cfg.hidden_dim,))
        builder.zeros("norm/beta", (cfg.hidden_dim,))
        init_linear(builder.child("key"), cfg.hidden_dim, cfg.hidden_dim)
        table.update(builder.build())

    def fn(t: ParamTable) -> Tensor:
        encoder = Scope(t) / ENCODER_SCOPE
        return pool_slots(encoder, encode_image(encoder, t["patches"], None, cfg), cfg)

    return GradCheck(
        f"slot_pool_{method.value}",
        _projected(fn, 100),
        {**_subset(table, f"{ENCODER_SCOPE}/"), "patches": patches},
    )


def _gumbel_value_check(rng: np.random.Generator) -> GradCheck:
    """Gumbel-max pooling along the patch values; the selection itself has no finite difference."""
    d = TOY_MODEL.hidden_dim
    scores = Tensor(rng.standard_normal((2, TOY_MODEL.num_slots, 4)))

    def fn(t: ParamTable) -> Tensor:
        weights = gumbel_max_select(scores)
        return ops.layer_norm(ops.matmul(weights, t["patches"]), t["gamma"], t["beta"])

    return GradCheck(
        "slot_pool_gumbel_max",
        _projected(fn, 101),
        {"patches": rng.standard_normal((2, 4, d)), "gamma": rng.standard_normal(d), "beta": rng.standard_normal(d)},
    )


def composite_checks(rng: np.random.Generator) -> List[GradCheck]:
    cfg = TOY_MODEL
    params = init_ivcl_params(cfg, seed=0)
    block = cfg.encoder_block
    d = cfg.hidden_dim
    patches = patchify(_toy_frames(rng, 2), cfg.patch_size)

    builder = ParamBuilder(np.random.default_rng(1))
    init_linear(builder.child("embed"), cfg.patch_dim, d)
    for layer in range(2):
        init_transformer_block(builder.child(f"block{layer}"), block)
    init_cross_attention_block(builder.child("cross"), block)
    blocks = builder.build()

    def patch_embed(t: ParamTable) -> Tensor:
        return linear(t["patches"], Scope(t) / "embed")

    def mhsa(t: ParamTable) -> Tensor:
        out, _ = multi_head_self_attention(t["x"], Scope(t) / "block0" / "attn", block)
        return out

    def transformer(t: ParamTable) -> Tensor:
        out, _ = transformer_block(t["x"], Scope(t) / "block0", block)
        return out

    def two_layer_stack(t: ParamTable) -> Tensor:
        x = t["x"]
        for layer in range(2):
            x, _ = transformer_block(x, Scope(t) / f"block{layer}", block, bias=causal_bias(x.shape[1]))
        return x

    def cross_attention(t: ParamTable) -> Tensor:
        return cross_attention_block(t["x"], t["memory"], Scope(t) / "cross", block, bias=causal_bias(3))

    def temporal(t: ParamTable) -> Tensor:
        return temporal_forward(
            Scope(t) / TEMPORAL_SCOPE,
            t["context"],
            np.array([[0], [2]]),
            t["queries"],
            np.array([[1, 3], [0, 1]]),
            cfg,
        )

    unmasked = np.array([[0, 2, 3], [1, 2, 3]])

    def decoder(t: ParamTable) -> Tensor:
        return decode_frame(Scope(t) / DECODER_SCOPE, t["tokens"], unmasked, cfg.num_patches, cfg)

    def encoder_masked(t: ParamTable) -> Tensor:
        return encode_image(Scope(t) / ENCODER_SCOPE, t["patches"], unmasked, cfg).patches

    x = rng.standard_normal((2, 3, d))
    checks = [
        GradCheck("patch_embed", _projected(patch_embed, 200), {**_subset(blocks, "embed/"), "patches": patches}),
        GradCheck("mhsa", _projected(mhsa, 201), {**_subset(blocks, "block0/attn/"), "x": x}),
        GradCheck("transformer_block", _projected(transformer, 202), {**_subset(blocks, "block0/"), "x": x}),
        GradCheck("two_layer_stack", _projected(two_layer_stack, 203), {**_subset(blocks, "block"), "x": x}),
        GradCheck(
            "cross_attention_block",
            _projected(cross_attention, 204),
            {**_subset(blocks, "cross/"), "x": x, "memory": rng.standard_normal((2, 2, d))},
        ),
        GradCheck(
            "image_encoder_masked",
            _projected(encoder_masked, 205),
            {**_subset(params, f"{ENCODER_SCOPE}/"), "patches": patches},
        ),
        _pooling_check(PoolMethod.SLICE, params, patches),
        _pooling_check(PoolMethod.SOFT_ATTENTION, params, patches),
        _gumbel_value_check(rng),
        GradCheck(
            "temporal_forward",
            _projected(temporal, 206),
            {
                **_subset(params, f"{TEMPORAL_SCOPE}/"),
                "context": rng.standard_normal((2, 1, cfg.num_slots, d)),
                "queries": rng.standard_normal((2, 2, 3, d)),
            },
        ),
        GradCheck(
            "decoder",
            _projected(decoder, 207),
            {**_subset(params, f"{DECODER_SCOPE}/"), "tokens": rng.standard_normal((2, 3, d))},
        ),
    ]
    return checks


def loss_checks(rng: np.random.Generator) -> List[GradCheck]:
    cfg = TOY_MODEL
    params = init_ivcl_params(cfg, seed=0)

    plans = [make_mask_plan(3, 1, cfg.num_patches, 0.5, rng) for _ in range(2)]
    clips = _toy_frames(rng, 2, 3)
    targets = patchify(clips, cfg.patch_size)[np.arange(2)[:, None], [p.query_frame_ids for p in plans]]

    def reconstruction_head(t: ParamTable) -> Tensor:
        return reconstruction_loss(t["predictions"], targets, plans)

    def pretraining(t: ParamTable) -> Tensor:
        return ivcl_loss(t, clips, plans, cfg).loss

    head = init_task_head(cfg, 4, seed=0)
    transfer_params = {**init_ivcl_params(cfg, seed=0, with_decoder=False), **head}
    transfer_frames = _toy_frames(rng, 2, 2)
    transfer_labels = np.array([1, 3])

    def transfer(t: ParamTable) -> Tensor:
        loss, _ = finetune_loss(t, transfer_frames, np.array([0, 1]), transfer_labels, cfg)
        return loss

    builder = ParamBuilder(np.random.default_rng(2))
    init_classifier(builder.child(CLASSIFIER_SCOPE), cfg, 3)
    init_detection_decoder(builder.child(DETECTION_SCOPE), cfg, TOY_BASELINE)
    heads = builder.build()
    frames = _toy_frames(rng, 2)
    counts = np.array([0, 2])
    vocab = DetectionVocab(TOY_BASELINE.n_bins)
    sequences = [[1, 2, 3, 3, vocab.class_token(1), vocab.eos], [0, 0, 1, 1, vocab.class_token(3), vocab.eos]]

    def classification_head(t: ParamTable) -> Tensor:
        loss, _ = classification_loss({**params, **t}, frames, counts, cfg)
        return loss

    def detection_head(t: ParamTable) -> Tensor:
        loss, _ = detection_loss({**params, **t}, frames, sequences, cfg, TOY_BASELINE)
        return loss

    return [
        GradCheck(
            "reconstruction_loss",
            reconstruction_head,
            {"predictions": rng.standard_normal(targets.shape)},
        ),
        GradCheck("pretraining_end_to_end", pretraining, _subset(params, "")),
        GradCheck("transfer_end_to_end", transfer, _subset(transfer_params, "")),
        GradCheck("classification_head", classification_head, _subset(heads, f"{CLASSIFIER_SCOPE}/")),
        GradCheck("detection_head", detection_head, _subset(heads, f"{DETECTION_SCOPE}/")),
    ]


def build_suite(seed: int = 0) -> List[GradCheck]:
    rng = np.random.default_rng(seed)
    return [*primitive_checks(rng), *composite_checks(rng), *loss_checks(rng)]


def run_suite(
    checks: Optional[Sequence[GradCheck]] = None,
    *,
    max_entries: Optional[int] = 4,
    seed: int = 0,
    workers: Optional[int] = None,
) -> List[GradCheckResult]:
    """Run the checks on a thread pool.

    Args:
        checks: checks to run, the whole suite by default
        max_entries: entries checked per input tensor, all when None
        seed: seed of the inputs and of the checked entries
        workers: number of threads
    """
    checks = list(checks) if checks is not None else build_suite(seed)

    def run(check: GradCheck) -> GradCheckResult:
        result = check_gradients(
            check.fn,
            check.inputs,
            name=check.name,
            max_entries=max_entries,
            rng=np.random.default_rng(seed),
        )
        logger.info("%s", result)
        return result

    return parallel_map(run, checks, workers=workers)


def assert_all_passed(results: Sequence[GradCheckResult]) -> None:
    """
    Raises:
        GradientCheckFailedError: at least one check failed
    """
    if failed := [r.name for r in results if not r.passed]:
        raise GradientCheckFailedError(
            f"{len(failed)} of {len(results)} gradient checks failed: {LogIter(failed, sep=', ')}"
        )
