"""Probing-based evaluation: ranking metrics for link prediction and a
linear probe for node classification.

Both probes operate on frozen embeddings.  Link prediction discards the
trained decoder entirely and scores pairs by sigmoid(z_i . z_j); node
classification trains only a single linear layer.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .graph import Graph
from .model import glorot
from .optim import Adam
from .tensor import (Tape, Tensor, add_bias, backward, matmul,
                     softmax_cross_entropy)


@dataclass
class Metrics:
    auc: float | None = None
    ap: float | None = None
    hits_at_k: dict = field(default_factory=dict)
    micro_f1: float | None = None
    macro_f1: float | None = None
    accuracy: float | None = None

    def to_dict(self) -> dict:
        out = {}
        for name in ("auc", "ap", "micro_f1", "macro_f1", "accuracy"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        for k, v in sorted(self.hits_at_k.items()):
            out[f"hits@{k}"] = v
        return out


def auc(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Exact rank statistic P(pos > neg) + 0.5 P(pos = neg)."""
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ValueError("auc needs non-empty score sets")
    ranks = rankdata(np.concatenate([pos, neg]), method="average")
    pos_rank_sum = ranks[:pos.size].sum()
    return float((pos_rank_sum - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size))


def average_precision(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Mean precision at each positive's rank, descending score order.

    Ties are broken pessimistically: at equal score, negatives precede
    positives.
    """
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size == 0:
        raise ValueError("average precision needs at least one positive")
    scores = np.concatenate([pos, neg])
    is_pos = np.concatenate([np.ones(pos.size, bool), np.zeros(neg.size, bool)])
    order = np.lexsort((is_pos, -scores))  # descending score; negatives first on ties
    hits = is_pos[order]
    cum_pos = np.cumsum(hits)
    precision_at_pos = cum_pos[hits] / (np.flatnonzero(hits) + 1)
    return float(precision_at_pos.mean())


def hits_at_k(pos_scores: np.ndarray, neg_scores: np.ndarray, k: int) -> float:
    """Fraction of positives scoring strictly above the k-th best negative."""
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if not 1 <= k <= neg.size:
        raise ValueError(f"k={k} out of range for {neg.size} negatives")
    threshold = np.sort(neg)[-k]
    return float(np.mean(pos > threshold))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    p = x >= 0
    out[p] = 1.0 / (1.0 + np.exp(-x[p]))
    e = np.exp(x[~p])
    out[~p] = e / (1.0 + e)
    return out


def pair_scores(z: np.ndarray, edges: np.ndarray) -> np.ndarray:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return _sigmoid(np.einsum("ij,ij->i", z[edges[:, 0]], z[edges[:, 1]]))


def dot_product_probe(z, pos_edges: np.ndarray, neg_edges: np.ndarray,
                      hits_ks: tuple = ()) -> Metrics:
    """AUC/AP of sigmoid(z_i . z_j) separating positive from negative pairs."""
    z = z.data if isinstance(z, Tensor) else np.asarray(z, dtype=np.float64)
    if len(pos_edges) == 0 or len(neg_edges) == 0:
        raise ValueError("probe needs non-empty edge sets")
    pos = pair_scores(z, pos_edges)
    neg = pair_scores(z, neg_edges)
    metrics = Metrics(auc=auc(pos, neg), ap=average_precision(pos, neg))
    for k in hits_ks:
        metrics.hits_at_k[k] = hits_at_k(pos, neg, k)
    return metrics


def micro_macro_f1(predictions: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Micro-F1 (= accuracy for single-label) and unweighted macro-F1."""
    predictions = np.asarray(predictions, dtype=np.int64).ravel()
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    micro = float(np.mean(predictions == labels))
    f1s = []
    for c in np.unique(labels):
        tp = np.sum((predictions == c) & (labels == c))
        fp = np.sum((predictions == c) & (labels != c))
        fn = np.sum((predictions != c) & (labels == c))
        f1s.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return micro, float(np.mean(f1s))


@dataclass(frozen=True)
class NodeSplit:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    seed: int


def node_split(graph: Graph, train_frac: float = 0.1, val_frac: float = 0.1,
               label_ratio: float = 1.0, seed: int = 0) -> NodeSplit:
    """Uniform node split; label_ratio subsamples the train set only."""
    if not (0 < train_frac < 1 and 0 < val_frac < 1 and train_frac + val_frac < 1):
        raise ValueError("fractions must lie in (0,1) and sum below 1")
    if not 0 < label_ratio <= 1:
        raise ValueError("label_ratio must be in (0, 1]")
    n = graph.num_nodes
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(np.floor(train_frac * n))
    n_val = int(np.floor((train_frac + val_frac) * n)) - n_train
    train_idx = np.sort(perm[:n_train])
    if label_ratio < 1.0:
        keep = int(np.floor(label_ratio * len(train_idx)))
        if keep == 0:
            raise ValueError("label_ratio leaves an empty train set")
        train_idx = np.sort(rng.choice(train_idx, size=keep, replace=False))
    return NodeSplit(train_idx, np.sort(perm[n_train:n_train + n_val]),
                     np.sort(perm[n_train + n_val:]), seed)


def linear_probe(z, labels: np.ndarray, split: NodeSplit, epochs: int = 100,
                 lr: float = 1e-2, weight_decay: float = 0.0,
                 rng: np.random.Generator | None = None) -> Metrics:
    """Train a single linear layer on frozen embeddings; report test F1.

    Full-batch Adam, fixed learning rate, fixed epoch budget; the probe
    never touches the embeddings themselves.
    """
    z = z.data if isinstance(z, Tensor) else np.asarray(z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.shape[0] != z.shape[0]:
        raise ValueError("labels must cover every embedded node")
    rng = rng if rng is not None else np.random.default_rng(0)
    num_classes = int(labels.max()) + 1
    train_classes = np.unique(labels[split.train_idx])
    if train_classes.size < np.unique(labels).size:
        warnings.warn("some classes are absent from the probe train set; "
                      "their F1 contributes 0 to macro-F1")

    w = Tensor(glorot(rng, z.shape[1], num_classes), requires_grad=True)
    b = Tensor(np.zeros((1, num_classes)), requires_grad=True)
    x_train = Tensor(z[split.train_idx])
    y_train = labels[split.train_idx]
    opt = Adam([w, b], lr=lr, weight_decay=weight_decay, decay_params=[w])
    for _ in range(epochs):
        opt.zero_grad()
        with Tape() as tape:
            loss = softmax_cross_entropy(add_bias(matmul(x_train, w), b), y_train)
        backward(tape, loss)
        opt.step()
    test_logits = z[split.test_idx] @ w.data + b.data
    preds = test_logits.argmax(axis=1)
    micro, macro = micro_macro_f1(preds, labels[split.test_idx])
    return Metrics(micro_f1=micro, macro_f1=macro, accuracy=micro)
