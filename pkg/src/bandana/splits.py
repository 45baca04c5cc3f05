"""Edge splitting into train/val/test and uniform negative sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph


@dataclass(frozen=True)
class EdgeSplit:
    """Disjoint positive edge sets plus frozen evaluation negatives.

    All edge arrays hold canonical (min, max) pairs, shape (k, 2).
    """

    train_pos: np.ndarray
    val_pos: np.ndarray
    test_pos: np.ndarray
    val_neg: np.ndarray
    test_neg: np.ndarray
    seed: int

    def __post_init__(self):
        for arr in (self.train_pos, self.val_pos, self.test_pos, self.val_neg, self.test_neg):
            arr.setflags(write=False)


def _pair_key(edges: np.ndarray, n: int) -> np.ndarray:
    """Encode canonical pairs as scalars for set membership tests."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    return lo * np.int64(n) + hi


def sample_negative_edges(graph: Graph, count: int, exclude: np.ndarray | None,
                          seed: int | None = None,
                          rng: np.random.Generator | None = None) -> np.ndarray:
    """Uniform without-replacement sample of non-edge node pairs.

    Pairs (i, j) satisfy i != j, (i, j) not an edge of ``graph`` and not in
    ``exclude``.  Returned as canonical (min, max) pairs.  Raises if
    ``count`` exceeds the number of available non-edges.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    n = graph.num_nodes
    forbidden = set(_pair_key(graph.undirected_edges(), n).tolist())
    if exclude is not None and len(exclude):
        forbidden |= set(_pair_key(exclude, n).tolist())
    total_pairs = n * (n - 1) // 2
    available = total_pairs - len(forbidden)
    if count > available:
        raise ValueError(f"requested {count} negatives but only {available} non-edges available")
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)

    # dense regime: enumerate every candidate pair and choose exactly
    if n <= 2048 or count > available // 2:
        iu, ju = np.triu_indices(n, k=1)
        keys = iu.astype(np.int64) * n + ju
        mask = ~np.isin(keys, np.fromiter(forbidden, dtype=np.int64, count=len(forbidden)))
        cand = np.stack([iu[mask], ju[mask]], axis=1)
        pick = rng.choice(len(cand), size=count, replace=False)
        return cand[np.sort(pick)].astype(np.int64)

    # sparse regime: rejection sampling (still exactly uniform)
    chosen: list[int] = []
    seen = set(forbidden)
    while len(chosen) < count:
        need = count - len(chosen)
        batch = rng.integers(0, n, size=(2 * need + 32, 2))
        batch = batch[batch[:, 0] != batch[:, 1]]
        keys = _pair_key(batch, n)
        for k in keys.tolist():
            if k in seen:
                continue
            seen.add(k)
            chosen.append(k)
            if len(chosen) == count:
                break
    out = np.asarray(chosen, dtype=np.int64)
    return np.stack([out // n, out % n], axis=1)


def split_edges(graph: Graph, train_frac: float, val_frac: float, seed: int) -> EdgeSplit:
    """Uniform random partition of the undirected edges, plus frozen negatives.

    Set sizes follow cumulative flooring of the fractions, so they always
    sum to the total edge count.  ``|val_neg| = |val_pos|`` and
    ``|test_neg| = |test_pos|``; negatives avoid the full edge set.
    """
    if not (0 < train_frac < 1 and 0 < val_frac < 1 and train_frac + val_frac < 1):
        raise ValueError("fractions must lie in (0,1) and sum below 1")
    edges = graph.undirected_edges()
    m = len(edges)
    if m < 10:
        raise ValueError("graph too small to split (need >= 10 undirected edges)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    n_train = int(np.floor(train_frac * m))
    n_val = int(np.floor((train_frac + val_frac) * m)) - n_train
    n_test = m - n_train - n_val
    if min(n_train, n_val, n_test) == 0:
        raise ValueError("graph too small to populate all three edge sets")
    train_pos = edges[np.sort(perm[:n_train])]
    val_pos = edges[np.sort(perm[n_train:n_train + n_val])]
    test_pos = edges[np.sort(perm[n_train + n_val:])]
    negs = sample_negative_edges(graph, n_val + n_test, exclude=None, rng=rng)
    return EdgeSplit(train_pos, val_pos, test_pos,
                     negs[:n_val].copy(), negs[n_val:].copy(), seed)


def save_split(split: EdgeSplit, path: str | Path) -> None:
    payload = {
        "seed": split.seed,
        "train_pos": split.train_pos.tolist(),
        "val_pos": split.val_pos.tolist(),
        "test_pos": split.test_pos.tolist(),
        "val_neg": split.val_neg.tolist(),
        "test_neg": split.test_neg.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_split(path: str | Path) -> EdgeSplit:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    as_arr = lambda key: np.asarray(payload[key], dtype=np.int64).reshape(-1, 2)
    return EdgeSplit(as_arr("train_pos"), as_arr("val_pos"), as_arr("test_pos"),
                     as_arr("val_neg"), as_arr("test_neg"), int(payload["seed"]))
