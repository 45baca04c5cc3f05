"""Synthetic dataset generators: swiss roll, two moons, karate club.

The manifold datasets are point clouds on the standard surfaces turned
into symmetrized k-nearest-neighbor graphs with identity node features.
Exact brute-force distances are used for the kNN construction; at a few
thousand points that is both simpler and deterministic.
"""

from __future__ import annotations

import numpy as np

from .graph import Graph, graph_from_edges


def identity_features(graph: Graph) -> Graph:
    """Replace node features with the n-by-n identity matrix."""
    return graph.with_features(np.eye(graph.num_nodes, dtype=np.float64))


def _knn_edges(points: np.ndarray, k_neighbors: int) -> np.ndarray:
    """Symmetrized kNN edge list from exact pairwise distances."""
    n = points.shape[0]
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    # ties broken by node index (argsort is stable on the last axis values)
    nn = np.argsort(d2, axis=1, kind="stable")[:, :k_neighbors]
    src = np.repeat(np.arange(n), k_neighbors)
    return np.stack([src, nn.ravel()], axis=1)


def gen_swiss_roll(n: int, k_neighbors: int, seed: int) -> Graph:
    """Sample n points on the standard swiss-roll surface in 3-space.

    The surface is (t cos t, h, t sin t) with t in [1.5*pi, 4.5*pi] and
    height h in [0, 21].  Returns the symmetrized kNN graph with identity
    features.
    """
    if n < k_neighbors + 1:
        raise ValueError("need n >= k_neighbors + 1")
    rng = np.random.default_rng(seed)
    t = 1.5 * np.pi * (1.0 + 2.0 * rng.random(n))
    h = 21.0 * rng.random(n)
    points = np.stack([t * np.cos(t), h, t * np.sin(t)], axis=1)
    g = graph_from_edges(n, _knn_edges(points, k_neighbors), name="swiss-roll")
    return identity_features(g)


def gen_two_moon(n: int, k_neighbors: int, noise: float, seed: int) -> Graph:
    """Sample n points on the standard two-moons layout in 2-space.

    Two interleaved half-circle arcs (n split evenly), plus isotropic
    Gaussian jitter of scale ``noise``.  Arc membership is stored as the
    node label.
    """
    if n < k_neighbors + 1:
        raise ValueError("need n >= k_neighbors + 1")
    rng = np.random.default_rng(seed)
    n_out = n // 2
    n_in = n - n_out
    theta_out = np.pi * rng.random(n_out)
    theta_in = np.pi * rng.random(n_in)
    outer = np.stack([np.cos(theta_out), np.sin(theta_out)], axis=1)
    inner = np.stack([1.0 - np.cos(theta_in), 0.5 - np.sin(theta_in)], axis=1)
    points = np.concatenate([outer, inner], axis=0)
    if noise > 0:
        points = points + rng.normal(scale=noise, size=points.shape)
    labels = np.concatenate([np.zeros(n_out, dtype=np.int64), np.ones(n_in, dtype=np.int64)])
    g = graph_from_edges(n, _knn_edges(points, k_neighbors), labels=labels, name="two-moon")
    return identity_features(g)


# Zachary's karate club: the canonical 78-pair edge list.
_KARATE_EDGES = [
    (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 10),
    (0, 11), (0, 12), (0, 13), (0, 17), (0, 19), (0, 21), (0, 31), (1, 2),
    (1, 3), (1, 7), (1, 13), (1, 17), (1, 19), (1, 21), (1, 30), (2, 3),
    (2, 7), (2, 8), (2, 9), (2, 13), (2, 27), (2, 28), (2, 32), (3, 7),
    (3, 12), (3, 13), (4, 6), (4, 10), (5, 6), (5, 10), (5, 16), (6, 16),
    (8, 30), (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33),
    (15, 32), (15, 33), (18, 32), (18, 33), (19, 33), (20, 32), (20, 33),
    (22, 32), (22, 33), (23, 25), (23, 27), (23, 29), (23, 32), (23, 33),
    (24, 25), (24, 27), (24, 31), (25, 31), (26, 29), (26, 33), (27, 33),
    (28, 31), (28, 33), (29, 32), (29, 33), (30, 32), (30, 33), (31, 32),
    (31, 33), (32, 33),
]

# Standard 4-community partition (modal Louvain modularity split), hardcoded.
_KARATE_LABELS = [
    0, 0, 0, 0, 1, 1, 1, 0, 2, 2, 1, 0, 0, 0, 2, 2, 1, 0, 2, 0, 2, 0, 2, 2,
    3, 3, 2, 2, 3, 2, 2, 3, 2, 2,
]


def gen_karate_club() -> Graph:
    """The fixed Zachary karate club graph: 34 nodes, 78 undirected edges.

    Identity features; 4-class community labels.
    """
    edges = np.asarray(_KARATE_EDGES, dtype=np.int64)
    labels = np.asarray(_KARATE_LABELS, dtype=np.int64)
    g = graph_from_edges(34, edges, labels=labels, name="karate")
    return identity_features(g)
