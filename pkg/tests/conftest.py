import os
from pathlib import Path

import numpy as np
import pytest

from bandana.graph import Graph, graph_from_edges, load_dataset

DATA_DIR = Path(os.environ.get("BANDANA_DATA", Path(__file__).resolve().parent.parent / "data"))


def require_dataset(name: str) -> Graph:
    """Load a real benchmark dataset or skip the test if it is not installed."""
    manifest = DATA_DIR / name / "manifest.json"
    if not manifest.exists():
        pytest.skip(f"dataset '{name}' not found under {DATA_DIR}; see data/README.md "
                    "for how to install the citation benchmarks")
    return load_dataset(manifest)


def random_graph(n: int, m: int, seed: int, features: int | None = None) -> Graph:
    """Random simple undirected graph with m edges (exactly, if possible)."""
    rng = np.random.default_rng(seed)
    edges = set()
    limit = n * (n - 1) // 2
    m = min(m, limit)
    while len(edges) < m:
        i, j = rng.integers(0, n, 2)
        if i != j:
            edges.add((min(int(i), int(j)), max(int(i), int(j))))
    x = rng.normal(size=(n, features)) if features else None
    return graph_from_edges(n, np.array(sorted(edges)), features=x, name=f"random-{seed}")


@pytest.fixture
def triangle() -> Graph:
    return graph_from_edges(3, np.array([[0, 1], [1, 2], [0, 2]]),
                            features=np.arange(6, dtype=float).reshape(3, 2),
                            name="triangle")


@pytest.fixture
def path3() -> Graph:
    return graph_from_edges(3, np.array([[0, 1], [1, 2]]), name="path3")


@pytest.fixture
def star5() -> Graph:
    """Center node 0 with four leaves."""
    edges = np.array([[0, i] for i in range(1, 5)])
    return graph_from_edges(5, edges, name="star5")
