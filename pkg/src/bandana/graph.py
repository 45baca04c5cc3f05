"""Immutable sparse graph type and dataset file IO.

Graphs are stored as CSR adjacency over undirected edges (every edge
appears as two directed entries), with dense float64 node features and
optional integer labels.  Self-loops are never stored in the adjacency;
they are added logically by masking and normalization.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed dataset files, with file/line context."""


@dataclass(frozen=True)
class Graph:
    """Undirected graph in CSR form with node features.

    Attributes
    ----------
    num_nodes : int
    row_offsets : np.ndarray
        CSR index pointers, length ``num_nodes + 1``.
    col_indices : np.ndarray
        CSR column indices; sorted ascending within each row, no
        duplicates, no diagonal entries.
    features : np.ndarray
        Dense ``(num_nodes, d)`` float64 matrix.
    labels : np.ndarray | None
        Integer class labels, length ``num_nodes``.
    name : str
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    name: str = "graph"

    def __post_init__(self):
        for arr in (self.row_offsets, self.col_indices, self.features, self.labels):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def num_directed_entries(self) -> int:
        return int(self.col_indices.shape[0])

    @property
    def num_undirected_edges(self) -> int:
        return self.num_directed_entries // 2

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors(self, node: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[node]:self.row_offsets[node + 1]]

    def undirected_edges(self) -> np.ndarray:
        """All edges as canonical (min, max) pairs, shape (m, 2)."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees())
        dst = self.col_indices
        keep = src < dst
        return np.stack([src[keep], dst[keep]], axis=1)

    def validate(self) -> None:
        """Check CSR well-formedness, symmetry, and shape invariants."""
        n = self.num_nodes
        if self.row_offsets.shape != (n + 1,) or self.row_offsets[0] != 0:
            raise ValueError("malformed row_offsets")
        if not np.all(np.diff(self.row_offsets) >= 0):
            raise ValueError("row_offsets not monotone")
        if self.col_indices.size and (self.col_indices.min() < 0 or self.col_indices.max() >= n):
            raise ValueError("column index out of range")
        src = np.repeat(np.arange(n), self.degrees())
        if np.any(src == self.col_indices):
            raise ValueError("self-loop stored in adjacency")
        # within-row ascending and duplicate-free: strict increase except at row starts
        if self.col_indices.size > 1:
            same_row = src[1:] == src[:-1]
            if np.any(same_row & (np.diff(self.col_indices) <= 0)):
                raise ValueError("row indices not strictly sorted / duplicates present")
        if self.features.shape[0] != n:
            raise ValueError("feature row count != num_nodes")
        # symmetry: the transposed pattern equals the pattern itself
        fwd = np.stack([src, self.col_indices], axis=1)
        rev = np.stack([self.col_indices, src], axis=1)
        rev = rev[np.lexsort((rev[:, 1], rev[:, 0]))]
        if not np.array_equal(fwd, rev):
            raise ValueError("adjacency pattern is not symmetric")

    def with_features(self, features: np.ndarray) -> "Graph":
        if features.shape[0] != self.num_nodes:
            raise ValueError("feature row count != num_nodes")
        return Graph(self.num_nodes, self.row_offsets, self.col_indices,
                     np.asarray(features, dtype=np.float64), self.labels, self.name)


def build_csr(num_nodes: int, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Symmetrize, deduplicate and drop self-loops; return CSR arrays.

    Returns (row_offsets, col_indices, num_self_loops_dropped).
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size:
        loops = edges[:, 0] == edges[:, 1]
        n_loops = int(np.count_nonzero(loops))
        edges = edges[~loops]
    else:
        n_loops = 0
    if edges.size == 0:
        return np.zeros(num_nodes + 1, dtype=np.int64), np.zeros(0, dtype=np.int64), n_loops
    both = np.concatenate([edges, edges[:, ::-1]], axis=0)
    both = np.unique(both, axis=0)  # sorts lexicographically (row, col)
    row_offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(row_offsets, both[:, 0] + 1, 1)
    row_offsets = np.cumsum(row_offsets)
    return row_offsets, both[:, 1].copy(), n_loops


def graph_from_edges(num_nodes: int, edges: np.ndarray,
                     features: np.ndarray | None = None,
                     labels: np.ndarray | None = None,
                     name: str = "graph") -> Graph:
    """Build a validated Graph from an edge array of (i, j) pairs.

    When ``features`` is omitted the n-by-n identity is used.
    """
    row_offsets, col_indices, n_loops = build_csr(num_nodes, edges)
    if n_loops:
        warnings.warn(f"dropped {n_loops} self-loop(s) while building '{name}'")
    if features is None:
        features = np.eye(num_nodes, dtype=np.float64)
    g = Graph(num_nodes, row_offsets, col_indices,
              np.asarray(features, dtype=np.float64),
              None if labels is None else np.asarray(labels, dtype=np.int64),
              name)
    g.validate()
    return g


def subgraph_with_edges(graph: Graph, edges: np.ndarray, name: str | None = None) -> Graph:
    """Same node set and features, adjacency restricted to the given edges."""
    row_offsets, col_indices, _ = build_csr(graph.num_nodes, edges)
    return Graph(graph.num_nodes, row_offsets, col_indices, graph.features,
                 graph.labels, name or graph.name + "/sub")


# ---------------------------------------------------------------------------
# file formats: manifest JSON, whitespace edge lists, CSV features
# ---------------------------------------------------------------------------

def read_edge_list(path: Path) -> np.ndarray:
    """Edge list: one edge per line, two 0-based ints; '#' lines ignored."""
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected two node indices, got {line!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer node index in {line!r}") from None
    return np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def read_feature_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DatasetError(f"{path}:{lineno}: expected {width} columns, got {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-numeric feature cell") from None
    return np.asarray(rows, dtype=np.float64)


def read_label_file(path: Path) -> np.ndarray:
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer label {line!r}") from None
    return np.asarray(labels, dtype=np.int64)


def load_dataset(manifest_path: str | Path) -> Graph:
    """Load a Graph from a manifest JSON.

    Manifest schema::

        {"name": str, "edges": path, "features": path | "identity",
         "labels": path | null}

    Paths are resolved relative to the manifest's directory.  Edges are
    symmetrized and deduplicated; self-loops are dropped with a warning.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DatasetError(f"manifest not found: {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    base = manifest_path.parent
    for key in ("name", "edges", "features"):
        if key not in manifest:
            raise DatasetError(f"{manifest_path}: manifest missing key {key!r}")

    edge_path = base / manifest["edges"]
    if not edge_path.exists():
        raise DatasetError(f"edge list not found: {edge_path}")
    edges = read_edge_list(edge_path)

    # node count: max index + 1, or overridden by explicit manifest entry
    num_nodes = int(manifest.get("num_nodes", edges.max() + 1 if edges.size else 0))
    if edges.size and edges.max() >= num_nodes:
        bad = int(edges.max())
        raise DatasetError(f"{edge_path}: node index {bad} out of range (num_nodes={num_nodes})")
    if edges.size and edges.min() < 0:
        raise DatasetError(f"{edge_path}: negative node index")

    if manifest["features"] == "identity":
        features = np.eye(num_nodes, dtype=np.float64)
    else:
        feat_path = base / manifest["features"]
        if not feat_path.exists():
            raise DatasetError(f"feature file not found: {feat_path}")
        features = read_feature_csv(feat_path)
        if features.shape[0] != num_nodes:
            raise DatasetError(
                f"{feat_path}: {features.shape[0]} feature rows for {num_nodes} nodes")

    labels = None
    if manifest.get("labels"):
        label_path = base / manifest["labels"]
        if not label_path.exists():
            raise DatasetError(f"label file not found: {label_path}")
        labels = read_label_file(label_path)
        if labels.shape[0] != num_nodes:
            raise DatasetError(f"{label_path}: {labels.shape[0]} labels for {num_nodes} nodes")

    return graph_from_edges(num_nodes, edges, features, labels, str(manifest["name"]))


def save_dataset(graph: Graph, out_dir: str | Path, identity_features: bool = False) -> Path:
    """Write a graph as manifest + edge list (+ features/labels); return manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    edges = graph.undirected_edges()
    with open(out_dir / "edges.txt", "w", encoding="utf-8") as fh:
        fh.write(f"# {graph.name}: {len(edges)} undirected edges\n")
        for i, j in edges:
            fh.write(f"{i} {j}\n")
    manifest = {"name": graph.name, "edges": "edges.txt", "num_nodes": graph.num_nodes}
    if identity_features:
        manifest["features"] = "identity"
    else:
        np.savetxt(out_dir / "features.csv", graph.features, delimiter=",", fmt="%.10g")
        manifest["features"] = "features.csv"
    if graph.labels is not None:
        with open(out_dir / "labels.txt", "w", encoding="utf-8") as fh:
            fh.writelines(f"{int(c)}\n" for c in graph.labels)
        manifest["labels"] = "labels.txt"
    else:
        manifest["labels"] = None
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest_path
