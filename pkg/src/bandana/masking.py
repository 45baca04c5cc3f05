"""Edge mask sampling and perturbed adjacencies.

All mask kinds live on the same sparse pattern: the graph adjacency plus
the diagonal.  Row i holds the weights on node i's incoming edges plus
its self-loop slot.

Bandwidth masks assign each target node a probabilistic simplex over its
incoming edges: i.i.d. standard Gaussian scores pass through a
temperature softmax per target.  The self-loop slot does not compete in
the softmax; it is fixed at 1, as are the self-loop slots of the three
ablation kinds.  With that convention the mean retained weight per edge
is 1/deg of the target, which makes the measured mask ratio of a graph
with no isolated nodes coincide with the calculated ratio
1 - n / (2 |E_train|); isolated nodes push the measured ratio above the
calculated one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .tensor import SparseMatrix, grouped_softmax

MASK_KINDS = ("bandwidth", "bernoulli", "uniform", "truncgauss")


@dataclass(frozen=True)
class BandwidthMaskSet:
    """Per-layer sparse masks sharing the self-looped adjacency pattern."""

    layers: list
    kind: str
    temperature: float | None = None
    ratio: float | None = None
    seed: int | None = None

    @property
    def num_layers(self) -> int:
        return len(self.layers)


def adjacency_with_loops(graph: Graph, values: float = 1.0) -> SparseMatrix:
    """CSR of A + I with constant values (diagonal inserted in sorted position)."""
    n = graph.num_nodes
    deg = graph.degrees()
    src = np.repeat(np.arange(n), deg)
    rows = np.concatenate([src, np.arange(n)])
    cols = np.concatenate([graph.col_indices, np.arange(n)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, rows + 1, 1)
    offsets = np.cumsum(offsets)
    return SparseMatrix((n, n), offsets, cols.copy(),
                        np.full(cols.shape[0], values, dtype=np.float64))


class _Pattern:
    """Precomputed slot structure of A + I for fast per-epoch sampling."""

    def __init__(self, graph: Graph):
        self.graph = graph
        self.base = adjacency_with_loops(graph)
        n = graph.num_nodes
        rows = np.repeat(np.arange(n), np.diff(self.base.row_offsets))
        cols = self.base.col_indices
        self.rows = rows
        self.is_diag = rows == cols
        self.edge_slots = np.flatnonzero(~self.is_diag)
        # contiguous group offsets of off-diagonal slots per row
        edge_rows = rows[self.edge_slots]
        counts = np.bincount(edge_rows, minlength=n)
        self.group_offsets = np.concatenate([[0], np.cumsum(counts)])
        self.rows_with_edges = np.flatnonzero(counts > 0)
        # canonical undirected pair id of each off-diagonal slot
        lo = np.minimum(edge_rows, cols[self.edge_slots])
        hi = np.maximum(edge_rows, cols[self.edge_slots])
        _, self.pair_index = np.unique(lo * np.int64(n) + hi, return_inverse=True)
        self.num_pairs = int(self.pair_index.max()) + 1 if self.pair_index.size else 0

    def assemble(self, edge_values: np.ndarray) -> SparseMatrix:
        values = np.ones(self.base.col_indices.shape[0])
        values[self.edge_slots] = edge_values
        return self.base.with_values(values)


_PATTERN_CACHE: dict[int, _Pattern] = {}


def _pattern(graph: Graph) -> _Pattern:
    # single-slot cache; the pattern pins its graph so the id stays valid
    pat = _PATTERN_CACHE.get(id(graph))
    if pat is None or pat.graph is not graph:
        pat = _Pattern(graph)
        _PATTERN_CACHE.clear()
        _PATTERN_CACHE[id(graph)] = pat
    return pat


def sample_bandwidth_masks(graph: Graph, temperature: float, num_layers: int,
                           rng: np.random.Generator) -> BandwidthMaskSet:
    """Independent per-layer Boltzmann-Gibbs bandwidths.

    Each target node's incoming edge weights are softmax(N(0,1)/tau) over
    its incoming edges, so the two directions of every edge carry
    different bandwidth values.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if num_layers < 1:
        raise ValueError("need at least one layer")
    pat = _pattern(graph)
    nontrivial = np.diff(pat.group_offsets) > 0
    offsets = np.concatenate([[0], np.cumsum(np.diff(pat.group_offsets)[nontrivial])])
    layers = []
    for _ in range(num_layers):
        scores = rng.standard_normal(pat.edge_slots.shape[0])
        layers.append(pat.assemble(grouped_softmax(scores, offsets, temperature)))
    return BandwidthMaskSet(layers, "bandwidth", temperature=temperature)


def sample_bernoulli_masks(graph: Graph, p: float, rng: np.random.Generator,
                           num_layers: int = 1) -> BandwidthMaskSet:
    """Discrete masks: each undirected edge kept with probability 1 - p,
    both directions identically.  Self-loop slots stay 1."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("mask ratio p must be in [0, 1]")
    pat = _pattern(graph)
    layers = []
    for _ in range(num_layers):
        keep = (rng.random(pat.num_pairs) >= p).astype(np.float64)
        layers.append(pat.assemble(keep[pat.pair_index]))
    return BandwidthMaskSet(layers, "bernoulli", ratio=p)


def sample_uniform_masks(graph: Graph, p: float, rng: np.random.Generator,
                         num_layers: int = 1) -> BandwidthMaskSet:
    """Each directed edge weight ~ U(0, 2-2p) independently; mean 1 - p."""
    if not 0.5 < p < 1.0:
        raise ValueError("uniform masks require p in (0.5, 1)")
    pat = _pattern(graph)
    width = 2.0 - 2.0 * p
    layers = [pat.assemble(width * rng.random(pat.edge_slots.shape[0]))
              for _ in range(num_layers)]
    return BandwidthMaskSet(layers, "uniform", ratio=p)


def sample_truncgauss_masks(graph: Graph, p: float, rng: np.random.Generator,
                            num_layers: int = 1) -> BandwidthMaskSet:
    """Each directed edge weight ~ N(1-p, 1) truncated to [0, 2-2p].

    Rejection sampling from the untruncated normal; the window is
    symmetric about the mean so the acceptance rate is erf-bounded and
    the truncated mean stays exactly 1 - p.
    """
    if not 0.5 < p < 1.0:
        raise ValueError("truncated-Gaussian masks require p in (0.5, 1)")
    pat = _pattern(graph)
    mu, hi = 1.0 - p, 2.0 - 2.0 * p
    count = pat.edge_slots.shape[0]
    layers = []
    for _ in range(num_layers):
        vals = np.empty(count)
        filled = 0
        while filled < count:
            need = count - filled
            accept_rate = math.erf(mu / math.sqrt(2.0))
            draw = rng.normal(mu, 1.0, size=int(need / max(accept_rate, 1e-3)) + 16)
            draw = draw[(draw >= 0.0) & (draw <= hi)]
            take = min(need, draw.shape[0])
            vals[filled:filled + take] = draw[:take]
            filled += take
        layers.append(pat.assemble(vals))
    return BandwidthMaskSet(layers, "truncgauss", ratio=p)


def perturbed_adjacency(graph: Graph, mask_layer: SparseMatrix) -> SparseMatrix:
    """The layer's perturbed adjacency: mask values on the pattern of A + I.

    Masks are sampled directly on that pattern, so this validates pattern
    compatibility and returns the masked matrix.
    """
    base = _pattern(graph).base
    if not base.same_pattern(mask_layer):
        raise ValueError("mask pattern does not match the graph's self-looped adjacency")
    return mask_layer


def calculated_mask_ratio(graph: Graph, train_edges: np.ndarray) -> float:
    """Structural mask ratio 1 - n / (2 |E_train|) of bandwidth masking."""
    m = np.asarray(train_edges).reshape(-1, 2).shape[0]
    if m == 0:
        raise ValueError("empty train edge set")
    return 1.0 - graph.num_nodes / (2.0 * m)


def measured_mask_ratio(masks: BandwidthMaskSet) -> float:
    """1 minus the mean mask weight over off-diagonal edge slots, averaged
    over layers.  Only defined for bandwidth masks."""
    if masks.kind != "bandwidth":
        raise ValueError("measured mask ratio is defined for bandwidth masks")
    means = []
    for layer in masks.layers:
        rows = np.repeat(np.arange(layer.shape[0]), np.diff(layer.row_offsets))
        off = rows != layer.col_indices
        if not np.any(off):
            raise ValueError("graph has no edges; measured ratio undefined")
        means.append(layer.values[off].mean())
    return 1.0 - float(np.mean(means))


def dump_masks_csv(masks: BandwidthMaskSet, path) -> None:
    """Diagnostic dump: one line per (src, dst, layer, value)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("src,dst,layer,value\n")
        for k, layer in enumerate(masks.layers):
            rows = np.repeat(np.arange(layer.shape[0]), np.diff(layer.row_offsets))
            for i, j, v in zip(rows, layer.col_indices, layer.values):
                fh.write(f"{j},{i},{k},{v:.10g}\n")
