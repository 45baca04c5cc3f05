"""Reconstruction losses and the self-supervised pretraining loops.

The continuous pipeline resamples edge masks every epoch, propagates over
the perturbed train-edge adjacency, and trains the shared decoder to
predict each edge's retained weight (with fresh negative pairs as zero
targets).  The discrete baseline masks edges out entirely and
reconstructs the removed ones.  Early stopping watches the validation
AUC of dot-product probing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import masking
from .evaluation import auc, pair_scores
from .graph import Graph, subgraph_with_edges
from .model import ModelParams, decode_edge_scores, encode, init_params
from .optim import Adam, NonFiniteGradient
from .splits import EdgeSplit, sample_negative_edges
from .tensor import (Tape, Tensor, add, affine, backward, clip, log,
                     mean_all, mul_const)

LAYERWISE_MODES = ("lwp", "lwm", "last")
_CLAMP = 1e-12


@dataclass
class TrainConfig:
    num_layers: int = 2
    hidden_dim: int = 256
    out_dim: int = 256
    lr: float = 1e-2
    temperature: float = 0.9
    mask_kind: str = "bandwidth"
    mask_ratio: float | None = None  # discrete/ablation kinds; None = structural ratio
    encoder_dropout: float = 0.8
    decoder_dropout: float = 0.0
    weight_decay: float = 5e-5
    max_epochs: int = 1000
    patience: int = 30
    neg_per_pos: float = 1.0
    seed: int = 0
    layerwise_mode: str = "last"
    decoder_hidden: int = 64

    def validate(self) -> None:
        if not 1 <= self.num_layers <= 8:
            raise ValueError("num_layers must be in [1, 8]")
        for rate in (self.encoder_dropout, self.decoder_dropout):
            if not 0.0 <= rate < 1.0:
                raise ValueError("dropout rates must be in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.mask_kind not in masking.MASK_KINDS:
            raise ValueError(f"unknown mask kind {self.mask_kind!r}")
        if self.layerwise_mode not in LAYERWISE_MODES:
            raise ValueError(f"unknown layerwise mode {self.layerwise_mode!r}")
        if self.neg_per_pos <= 0:
            raise ValueError("neg_per_pos must be positive")
        if (self.layerwise_mode == "lwp" and self.num_layers > 1
                and self.hidden_dim != self.out_dim):
            raise ValueError("layer-wise prediction shares one decoder, so every "
                             "layer must have the same width (hidden_dim == out_dim)")


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)
    val_metrics: list = field(default_factory=list)
    best_epoch: int = -1
    stop_reason: str = "not_started"

    @property
    def num_epochs(self) -> int:
        return len(self.losses)

    def to_rows(self):
        return [(e, l, v) for e, (l, v) in enumerate(zip(self.losses, self.val_metrics))]


def _clamped_log(scores: Tensor, complement: bool) -> Tensor:
    """log(r) or log(1-r) with scores clamped away from {0, 1}."""
    data = scores.data
    if np.any(data <= _CLAMP) or np.any(data >= 1.0 - _CLAMP):
        warnings.warn("edge scores clamped away from {0,1} before log")
    r = clip(scores, _CLAMP, 1.0 - _CLAMP)
    return log(affine(r, -1.0, 1.0)) if complement else log(r)


def bandwidth_loss(pos_scores: Tensor, pos_targets: np.ndarray,
                   neg_scores: Tensor | None) -> Tensor:
    """Soft-target cross-entropy on positive edges plus a zero-target term
    on negatives, the two means weighted equally."""
    t = np.asarray(pos_targets, dtype=np.float64).reshape(-1, 1)
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("bandwidth targets must lie in [0, 1]")
    if t.shape[0] != pos_scores.shape[0]:
        raise ValueError("target/score length mismatch")
    pos_term = mean_all(add(mul_const(_clamped_log(pos_scores, False), -t),
                            mul_const(_clamped_log(pos_scores, True), -(1.0 - t))))
    if neg_scores is None or neg_scores.shape[0] == 0:
        return pos_term
    neg_term = mean_all(mul_const(_clamped_log(neg_scores, True), -1.0))
    return add(pos_term, neg_term)


def discrete_ce_loss(masked_pos_scores: Tensor | None, neg_scores: Tensor | None) -> Tensor:
    """Binary link reconstruction: -log r on masked edges, -log(1-r) on
    negatives, means weighted equally."""
    terms = []
    if masked_pos_scores is not None and masked_pos_scores.shape[0] > 0:
        terms.append(mean_all(mul_const(_clamped_log(masked_pos_scores, False), -1.0)))
    if neg_scores is not None and neg_scores.shape[0] > 0:
        terms.append(mean_all(mul_const(_clamped_log(neg_scores, True), -1.0)))
    if not terms:
        raise ValueError("discrete loss needs at least one non-empty score set")
    return terms[0] if len(terms) == 1 else add(terms[0], terms[1])


def layerwise_loss(per_layer_z: list, per_layer_targets: list, edges: np.ndarray,
                   negatives: np.ndarray, params: ModelParams, train_mode: bool = True,
                   rng: np.random.Generator | None = None) -> Tensor:
    """Arithmetic mean of the bandwidth loss over layers, shared decoder."""
    if len(per_layer_z) != len(per_layer_targets):
        raise ValueError("layer count mismatch between representations and targets")
    k = len(per_layer_z)
    total = None
    for z, targets in zip(per_layer_z, per_layer_targets):
        pos = decode_edge_scores(z, edges, params, train_mode, rng)
        neg = decode_edge_scores(z, negatives, params, train_mode, rng) if len(negatives) else None
        term = bandwidth_loss(pos, targets, neg)
        total = term if total is None else add(total, term)
    return affine(total, 1.0 / k, 0.0) if k > 1 else total


# ---------------------------------------------------------------------------
# pretraining loops
# ---------------------------------------------------------------------------

def _rng_streams(seed: int):
    init, mask, drop, neg = np.random.SeedSequence(seed).spawn(4)
    return (np.random.default_rng(init), np.random.default_rng(mask),
            np.random.default_rng(drop), np.random.default_rng(neg))


def _val_auc(train_graph: Graph, params: ModelParams, split: EdgeSplit) -> float:
    z = encode(train_graph, None, params, train_mode=False)[-1].data
    return auc(pair_scores(z, split.val_pos), pair_scores(z, split.val_neg))


def embed(train_graph: Graph, params: ModelParams) -> np.ndarray:
    """Eval-mode final-layer embeddings on the unmasked propagation graph."""
    return encode(train_graph, None, params, train_mode=False)[-1].data


def _sample_masks(train_graph: Graph, config: TrainConfig, rng) -> masking.BandwidthMaskSet:
    num = config.num_layers if config.layerwise_mode in ("lwp", "lwm") else 1
    if config.mask_kind == "bandwidth":
        return masking.sample_bandwidth_masks(train_graph, config.temperature, num, rng)
    ratio = config.mask_ratio
    if ratio is None:
        ratio = masking.calculated_mask_ratio(train_graph, train_graph.undirected_edges())
    if config.mask_kind == "uniform":
        return masking.sample_uniform_masks(train_graph, ratio, rng, num)
    if config.mask_kind == "truncgauss":
        return masking.sample_truncgauss_masks(train_graph, ratio, rng, num)
    raise ValueError(f"pretrain does not handle mask kind {config.mask_kind!r}; "
                     "use pretrain_discrete_baseline for bernoulli")


def _run_loop(train_graph: Graph, split: EdgeSplit, config: TrainConfig,
              epoch_loss_fn) -> tuple[ModelParams, TrainHistory]:
    """Shared epoch loop: resample, step, validate, early-stop, restore best."""
    init_rng, mask_rng, drop_rng, neg_rng = _rng_streams(config.seed)
    params = init_params(config, train_graph.num_features, init_rng)
    history = TrainHistory(stop_reason="max_epochs")
    if config.max_epochs == 0:
        history.stop_reason = "max_epochs"
        return params, history
    tensors = list(params.all_tensors().values())
    opt = Adam(tensors, lr=config.lr, weight_decay=config.weight_decay,
               decay_params=params.encoder_weight_tensors())
    best_state, best_metric, since_best = None, -np.inf, 0
    for epoch in range(config.max_epochs):
        opt.zero_grad()
        with Tape() as tape:
            loss = epoch_loss_fn(params, mask_rng, drop_rng, neg_rng)
        loss_val = loss.item()
        if not np.isfinite(loss_val):
            history.stop_reason = "diverged"
            break
        backward(tape, loss)
        try:
            opt.step()
        except NonFiniteGradient:
            history.stop_reason = "diverged"
            history.losses.append(loss_val)
            history.val_metrics.append(np.nan)
            break
        metric = _val_auc(train_graph, params, split)
        history.losses.append(loss_val)
        history.val_metrics.append(metric)
        if metric > best_metric:
            best_metric, since_best = metric, 0
            history.best_epoch = epoch
            best_state = params.snapshot()
        else:
            since_best += 1
            if since_best >= config.patience:
                history.stop_reason = "early_stopping"
                break
    if best_state is not None:
        params.restore(best_state)
    return params, history


def pretrain(graph: Graph, split: EdgeSplit, config: TrainConfig) -> tuple[ModelParams, TrainHistory]:
    """Pretrain with continuous masks (bandwidth / uniform / truncgauss).

    Per epoch: resample per-layer masks on the train-edge subgraph,
    encode, decode every directed train edge plus fresh negatives, and
    average the per-layer losses according to the layerwise mode.
    """
    config.validate()
    if config.mask_kind == "bernoulli":
        return pretrain_discrete_baseline(graph, split, config)
    if len(split.train_pos) == 0:
        raise ValueError("empty train edge set")
    train_graph = subgraph_with_edges(graph, split.train_pos, name=graph.name + "/train")
    pat = masking._pattern(train_graph)
    rows = pat.rows[pat.edge_slots]
    cols = pat.base.col_indices[pat.edge_slots]
    pos_pairs = np.stack([rows, cols], axis=1)
    n_neg = max(1, int(round(config.neg_per_pos * len(pos_pairs))))

    def epoch_loss(params, mask_rng, drop_rng, neg_rng):
        masks = _sample_masks(train_graph, config, mask_rng)
        negatives = sample_negative_edges(train_graph, n_neg, exclude=None, rng=neg_rng)
        zs = encode(train_graph, masks, params, train_mode=True, rng=drop_rng)
        if config.layerwise_mode == "lwp":
            targets = [layer.values[pat.edge_slots] for layer in masks.layers]
            return layerwise_loss(zs, targets, pos_pairs, negatives, params, True, drop_rng)
        # lwm: per-layer masks, prediction on the last layer only
        # last: a single mask set shared by every layer
        targets = [masks.layers[-1].values[pat.edge_slots]]
        return layerwise_loss(zs[-1:], targets, pos_pairs, negatives, params, True, drop_rng)

    return _run_loop(train_graph, split, config, epoch_loss)


def pretrain_discrete_baseline(graph: Graph, split: EdgeSplit,
                               config: TrainConfig) -> tuple[ModelParams, TrainHistory]:
    """Discrete baseline: Bernoulli edge masks, propagation on surviving
    edges only, cross-entropy reconstruction of the masked-out edges."""
    config.validate()
    if len(split.train_pos) == 0:
        raise ValueError("empty train edge set")
    train_graph = subgraph_with_edges(graph, split.train_pos, name=graph.name + "/train")
    pat = masking._pattern(train_graph)
    rows = pat.rows[pat.edge_slots]
    cols = pat.base.col_indices[pat.edge_slots]
    ratio = config.mask_ratio
    if ratio is None:
        ratio = masking.calculated_mask_ratio(train_graph, split.train_pos)
    if ratio == 0.0:
        warnings.warn("degenerate config: p=0 masks nothing; loss uses negatives only")
    fallback_neg = max(1, int(round(config.neg_per_pos * len(pat.edge_slots))))

    def epoch_loss(params, mask_rng, drop_rng, neg_rng):
        masks = masking.sample_bernoulli_masks(train_graph, ratio, mask_rng)
        dropped = masks.layers[0].values[pat.edge_slots] == 0.0
        masked_pairs = np.stack([rows[dropped], cols[dropped]], axis=1)
        n_neg = (max(1, int(round(config.neg_per_pos * len(masked_pairs))))
                 if len(masked_pairs) else fallback_neg)
        negatives = sample_negative_edges(train_graph, n_neg, exclude=None, rng=neg_rng)
        zs = encode(train_graph, masks, params, train_mode=True, rng=drop_rng)
        z = zs[-1]
        pos = (decode_edge_scores(z, masked_pairs, params, True, drop_rng)
               if len(masked_pairs) else None)
        neg = decode_edge_scores(z, negatives, params, True, drop_rng)
        return discrete_ce_loss(pos, neg)

    return _run_loop(train_graph, split, config, epoch_loss)


def config_with(config: TrainConfig, **overrides) -> TrainConfig:
    return replace(config, **overrides)
