"""Diagnostics: Dirichlet energies, ego-entropy histograms, connectivity
damage under masking, and embedding export.

These quantify what masking does to a graph: discrete masks shrink the
per-node Dirichlet energy (an over-smoothing risk) and fragment the
graph into more components, while bandwidth masks keep the sparsity
pattern, and with it the component structure, intact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .tensor import SparseMatrix, Tensor


@dataclass
class DiagnosticsReport:
    ego_energies: np.ndarray | None = None
    global_energy: float | None = None
    entropy_bin_edges: np.ndarray | None = None
    entropy_counts: np.ndarray | None = None
    entropy_median: float | None = None
    num_components: int | None = None
    giant_component_size: int | None = None
    mask_ratio_calculated: float | None = None
    mask_ratio_measured: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = dict(self.extras)
        for name in ("global_energy", "entropy_median", "num_components",
                     "giant_component_size", "mask_ratio_calculated",
                     "mask_ratio_measured"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        return out


def ego_dirichlet_energy(graph: Graph, features: np.ndarray, node: int) -> float:
    """Mean squared feature difference to the neighbors, over the ego size.

    For node i with neighbors N_i this is
    ``sum_{j in N_i} ||x_i - x_j||^2 / (|N_i| + 1)``; an isolated node
    has zero energy.
    """
    if not 0 <= node < graph.num_nodes:
        raise IndexError("node out of range")
    nbrs = graph.neighbors(node)
    if nbrs.size == 0:
        return 0.0
    diffs = features[node] - features[nbrs]
    return float(np.sum(diffs * diffs) / (nbrs.size + 1))


def global_dirichlet_energy(graph: Graph, features: np.ndarray) -> float:
    """Sum of ego energies over all ego-graphs."""
    return float(sum(ego_dirichlet_energy(graph, features, i)
                     for i in range(graph.num_nodes)))


@dataclass
class EnergyTheoremReport:
    trials: int
    violations: int
    equality_violations: int


def verify_energy_theorem(trials: int, rng: np.random.Generator,
                          keep_probs=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
                          max_neighbors: int = 12) -> EnergyTheoremReport:
    """Randomized check that Bernoulli masking never raises ego energy.

    Each trial builds a star ego-graph whose leaves share one feature
    vector (the setting in which the monotonicity is guaranteed), masks
    each spoke independently, and compares the energy of the component
    that still contains the center.  Keeping every edge must preserve the
    energy exactly.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    from .graph import graph_from_edges

    violations = 0
    equality_violations = 0
    for _ in range(trials):
        m = int(rng.integers(1, max_neighbors + 1))
        dim = int(rng.integers(1, 5))
        x_center = rng.normal(size=dim)
        x_leaf = rng.normal(size=dim)
        features = np.concatenate([[x_center], np.tile(x_leaf, (m, 1))], axis=0)
        edges = np.stack([np.zeros(m, dtype=np.int64), np.arange(1, m + 1)], axis=1)
        original = graph_from_edges(m + 1, edges, features=features)
        e_orig = ego_dirichlet_energy(original, features, 0)

        keep_prob = keep_probs[int(rng.integers(0, len(keep_probs)))]
        kept = edges[rng.random(m) < keep_prob]
        masked = graph_from_edges(m + 1, kept, features=features) if len(kept) else None
        e_masked = ego_dirichlet_energy(masked, features, 0) if masked is not None else 0.0
        if e_masked > e_orig + 1e-12:
            violations += 1

        # keep probability 1 keeps every edge: energy must match exactly
        remasked = graph_from_edges(m + 1, edges[rng.random(m) < 1.0], features=features)
        if abs(ego_dirichlet_energy(remasked, features, 0) - e_orig) > 1e-12:
            equality_violations += 1
    return EnergyTheoremReport(trials, violations, equality_violations)


@dataclass
class EntropyHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    median: float
    entropies: np.ndarray


def ego_entropy_histogram(weight_matrix: SparseMatrix, bins: int = 30) -> EntropyHistogram:
    """Shannon entropy (natural log) of each node's incoming edge weights.

    Self-loop slots are excluded and the remaining weights renormalized
    to sum to one.  Nodes with at most one incoming edge are skipped
    (their entropy is trivially zero).
    """
    if np.any(weight_matrix.values < 0):
        raise ValueError("weights must be non-negative")
    n = weight_matrix.shape[0]
    rows = np.repeat(np.arange(n), np.diff(weight_matrix.row_offsets))
    off = rows != weight_matrix.col_indices
    entropies = []
    for i in range(n):
        lo, hi = weight_matrix.row_offsets[i], weight_matrix.row_offsets[i + 1]
        w = weight_matrix.values[lo:hi][off[lo:hi]]
        if w.size <= 1:
            continue
        total = w.sum()
        if total == 0:
            raise ValueError(f"all-zero weight row at node {i}")
        p = w / total
        nz = p[p > 0]
        entropies.append(float(-(nz * np.log(nz)).sum()))
    entropies = np.asarray(entropies)
    if entropies.size == 0:
        raise ValueError("no node has two or more incoming edges")
    counts, edges = np.histogram(entropies, bins=bins)
    return EntropyHistogram(edges, counts, float(np.median(entropies)), entropies)


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:  # path compression
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def count_components(graph: Graph, surviving_mask: SparseMatrix | None = None,
                     threshold: float = 0.0) -> tuple[int, int]:
    """Connected components over edges whose mask value exceeds threshold.

    Without a mask, counts the components of the graph itself.  Returns
    (number of components, giant component size).
    """
    n = graph.num_nodes
    uf = UnionFind(n)
    if surviving_mask is None:
        src = np.repeat(np.arange(n), graph.degrees())
        dst = graph.col_indices
        keep = np.ones(src.shape[0], dtype=bool)
    else:
        src = np.repeat(np.arange(n), np.diff(surviving_mask.row_offsets))
        dst = surviving_mask.col_indices
        keep = (surviving_mask.values > threshold) & (src != dst)
    for a, b in zip(src[keep].tolist(), dst[keep].tolist()):
        uf.union(a, b)
    roots = [uf.find(i) for i in range(n)]
    _, counts = np.unique(roots, return_counts=True)
    return int(counts.size), int(counts.max()) if n else 0


def pca2d(z, max_iter: int = 2000, tol: float = 1e-13) -> np.ndarray:
    """Top-2 principal component projection via power iteration.

    Deterministic start vectors; the second component is found on the
    deflated covariance.  Constant input maps to all-zero coordinates.
    """
    z = z.data if isinstance(z, Tensor) else np.asarray(z, dtype=np.float64)
    centered = z - z.mean(axis=0)
    cov = centered.T @ centered / max(z.shape[0], 1)
    d = cov.shape[0]
    if d == 1:
        return np.concatenate([centered, np.zeros_like(centered)], axis=1)

    def top_eigvec(mat, start):
        v = start / np.linalg.norm(start)
        lam = 0.0
        for _ in range(max_iter):
            w = mat @ v
            norm = np.linalg.norm(w)
            if norm < 1e-300:
                return v, 0.0
            w = w / norm
            if np.linalg.norm(w - v) < tol or np.linalg.norm(w + v) < tol:
                v = w
                break
            v = w
        lam = float(v @ mat @ v)
        return v, lam

    start1 = np.cos(np.arange(1, d + 1))
    v1, lam1 = top_eigvec(cov, start1)
    deflated = cov - lam1 * np.outer(v1, v1)
    start2 = np.sin(np.arange(1, d + 1))
    start2 = start2 - (start2 @ v1) * v1
    if np.linalg.norm(start2) < 1e-12:
        start2 = np.roll(start2, 1) + 1e-3
    v2, _ = top_eigvec(deflated, start2)
    v2 = v2 - (v2 @ v1) * v1
    norm2 = np.linalg.norm(v2)
    if norm2 > 1e-300:
        v2 = v2 / norm2
    return centered @ np.stack([v1, v2], axis=1)


def export_embeddings(z, path) -> None:
    """CSV dump: node,dim0,dim1,..."""
    z = z.data if isinstance(z, Tensor) else np.asarray(z, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node," + ",".join(f"dim{i}" for i in range(z.shape[1])) + "\n")
        for i, row in enumerate(z):
            fh.write(str(i) + "," + ",".join(f"{v:.10g}" for v in row) + "\n")
