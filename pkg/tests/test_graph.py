import json

import numpy as np
import pytest

from bandana.graph import (DatasetError, Graph, graph_from_edges, load_dataset,
                           save_dataset, subgraph_with_edges)

from conftest import random_graph


def test_triangle_csr(triangle):
    assert triangle.num_nodes == 3
    assert triangle.num_directed_entries == 6
    assert triangle.num_undirected_edges == 3
    assert np.array_equal(triangle.neighbors(0), [1, 2])
    assert np.array_equal(triangle.neighbors(1), [0, 2])


def test_duplicate_and_reversed_edges_collapse():
    g = graph_from_edges(3, np.array([[0, 1], [1, 0], [0, 1], [1, 2]]))
    assert g.num_undirected_edges == 2


def test_self_loop_dropped_with_warning():
    with pytest.warns(UserWarning, match="dropped 1 self-loop"):
        g = graph_from_edges(6, np.array([[0, 1], [5, 5], [1, 2]]))
    assert g.num_undirected_edges == 2
    assert not np.any(np.repeat(np.arange(6), g.degrees()) == g.col_indices)


def test_symmetry_validation_passes_on_random_graphs():
    for seed in range(10):
        g = random_graph(30, 60, seed)
        g.validate()  # raises on any violation


def test_validate_rejects_asymmetric_pattern():
    # handcrafted CSR with a one-directional entry
    g = Graph(num_nodes=2,
              row_offsets=np.array([0, 1, 1]),
              col_indices=np.array([1]),
              features=np.zeros((2, 1)))
    with pytest.raises(ValueError, match="symmetric"):
        g.validate()


def test_features_row_count_enforced(triangle):
    with pytest.raises(ValueError):
        triangle.with_features(np.zeros((4, 2)))


def test_graph_arrays_immutable(triangle):
    with pytest.raises(ValueError):
        triangle.col_indices[0] = 2


def test_subgraph_keeps_features(triangle):
    sub = subgraph_with_edges(triangle, np.array([[0, 1]]))
    assert sub.num_undirected_edges == 1
    assert np.array_equal(sub.features, triangle.features)
    assert sub.num_nodes == 3


def test_manifest_roundtrip(tmp_path, triangle):
    manifest = save_dataset(triangle, tmp_path / "tri")
    g = load_dataset(manifest)
    assert g.num_nodes == 3 and g.num_directed_entries == 6
    assert np.allclose(g.features, triangle.features)


def test_manifest_identity_features(tmp_path):
    g = graph_from_edges(4, np.array([[0, 1], [1, 2], [2, 3], [0, 3], [1, 3]]))
    manifest = save_dataset(g, tmp_path / "ident", identity_features=True)
    loaded = load_dataset(manifest)
    assert np.array_equal(loaded.features, np.eye(4))


def test_load_triangle_manifest(tmp_path):
    d = tmp_path / "tri"
    d.mkdir()
    (d / "edges.txt").write_text("# comment line\n0 1\n1 2\n2 0\n")
    (d / "features.csv").write_text("1,0\n0,1\n1,1\n")
    (d / "manifest.json").write_text(json.dumps(
        {"name": "tri", "edges": "edges.txt", "features": "features.csv", "labels": None}))
    g = load_dataset(d / "manifest.json")
    assert g.num_nodes == 3 and g.num_directed_entries == 6
    assert g.features.shape == (3, 2)


def test_load_reports_self_loop_count(tmp_path):
    d = tmp_path / "loops"
    d.mkdir()
    (d / "edges.txt").write_text("0 1\n5 5\n1 2\n2 3\n3 4\n4 5\n")
    (d / "manifest.json").write_text(json.dumps(
        {"name": "loops", "edges": "edges.txt", "features": "identity",
         "labels": None, "num_nodes": 6}))
    with pytest.warns(UserWarning, match="dropped 1 self-loop"):
        g = load_dataset(d / "manifest.json")
    assert g.num_nodes == 6


@pytest.mark.parametrize("bad_edges, message", [
    ("0 1\n9 1\n", "out of range"),
    ("0 1\nx 1\n", "non-integer"),
    ("0 1\n0 1 2\n", "expected two"),
])
def test_edge_file_errors_carry_location(tmp_path, bad_edges, message):
    d = tmp_path / "bad"
    d.mkdir()
    (d / "edges.txt").write_text(bad_edges)
    (d / "manifest.json").write_text(json.dumps(
        {"name": "bad", "edges": "edges.txt", "features": "identity",
         "labels": None, "num_nodes": 4}))
    with pytest.raises(DatasetError, match=message):
        load_dataset(d / "manifest.json")


def test_feature_errors_carry_location(tmp_path):
    d = tmp_path / "badfeat"
    d.mkdir()
    (d / "edges.txt").write_text("0 1\n")
    (d / "features.csv").write_text("1,2\n3,oops\n")
    (d / "manifest.json").write_text(json.dumps(
        {"name": "badfeat", "edges": "edges.txt", "features": "features.csv", "labels": None}))
    with pytest.raises(DatasetError, match="features.csv:2"):
        load_dataset(d / "manifest.json")


def test_feature_row_count_mismatch(tmp_path):
    d = tmp_path / "short"
    d.mkdir()
    (d / "edges.txt").write_text("0 1\n1 2\n")
    (d / "features.csv").write_text("1\n2\n")
    (d / "manifest.json").write_text(json.dumps(
        {"name": "short", "edges": "edges.txt", "features": "features.csv", "labels": None}))
    with pytest.raises(DatasetError, match="2 feature rows for 3 nodes"):
        load_dataset(d / "manifest.json")


def test_missing_files_reported(tmp_path):
    with pytest.raises(DatasetError, match="manifest not found"):
        load_dataset(tmp_path / "nope.json")
    (tmp_path / "manifest.json").write_text(json.dumps(
        {"name": "x", "edges": "edges.txt", "features": "identity"}))
    with pytest.raises(DatasetError, match="edge list not found"):
        load_dataset(tmp_path / "manifest.json")
