import os
from pathlib import Path

import numpy as np
import pytest

from graphpure.graphs import (
    Graph,
    ParseError,
    Split,
    degree_vector,
    load_graph,
    load_split,
    random_split,
    save_graph,
    save_split,
)

CORA_DIR = os.environ.get("GRAPHPURE_DATA", "")


def write_dataset(tmp_path: Path, edges, n, d=3, labels=None):
    edge_path = tmp_path / "edges.tsv"
    edge_path.write_text("".join(f"{u}\t{v}\n" for u, v in edges))
    feat_path = tmp_path / "features.csv"
    rng = np.random.default_rng(0)
    np.savetxt(feat_path, rng.random((n, d)), delimiter=",")
    label_path = tmp_path / "labels.txt"
    if labels is None:
        labels = [i % 2 for i in range(n)]
    label_path.write_text("".join(f"{c}\n" for c in labels))
    return edge_path, feat_path, label_path


def test_single_edge_graph(tmp_path):
    paths = write_dataset(tmp_path, [(0, 1)], n=2)
    g = load_graph(*paths)
    assert np.array_equal(g.adjacency, [[0, 1], [1, 0]])
    assert g.features.shape == (2, 3)


def test_duplicates_and_reversed_edges_collapse(tmp_path):
    paths = write_dataset(tmp_path, [(0, 1), (1, 0), (0, 1), (2, 1)], n=3)
    g = load_graph(*paths)
    assert g.num_edges == 2


def test_self_loop_rejected(tmp_path):
    paths = write_dataset(tmp_path, [(0, 0)], n=2)
    with pytest.raises(ValueError, match="self-loop"):
        load_graph(*paths)


def test_malformed_line_reports_line_number(tmp_path):
    paths = write_dataset(tmp_path, [(0, 1)], n=3)
    paths[0].write_text("0\t1\n0 1 2\n")
    with pytest.raises(ParseError, match=":2:"):
        load_graph(*paths)


def test_node_id_out_of_range(tmp_path):
    paths = write_dataset(tmp_path, [(0, 7)], n=3)
    with pytest.raises(ValueError, match="out of range"):
        load_graph(*paths)


def test_load_save_load_round_trip(tmp_path):
    paths = write_dataset(tmp_path, [(0, 1), (1, 2), (0, 3)], n=5)
    g = load_graph(*paths)
    out = (tmp_path / "e2.tsv", tmp_path / "f2.csv", tmp_path / "l2.txt")
    save_graph(g, *out)
    g2 = load_graph(*out)
    assert np.array_equal(g.adjacency, g2.adjacency)
    assert np.allclose(g.features, g2.features)
    assert np.array_equal(g.labels, g2.labels)


def test_graph_invariant_validation():
    feat = np.zeros((2, 1))
    labels = np.zeros(2, dtype=int)
    with pytest.raises(ValueError, match="symmetric"):
        Graph(np.array([[0, 1], [0, 0]]), feat, labels)
    with pytest.raises(ValueError, match="diagonal"):
        Graph(np.eye(2, dtype=int), feat, labels)
    with pytest.raises(ValueError, match="0 or 1"):
        Graph(np.array([[0, 2], [2, 0]]), feat, labels)


def test_degree_vector_cases():
    assert np.array_equal(degree_vector(np.array([[0, 1], [1, 0]])), [1, 1])
    assert np.array_equal(degree_vector(np.zeros((4, 4), int)), [0, 0, 0, 0])
    # path 0-1-2: hand count of row sums
    path = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert np.array_equal(degree_vector(path), [1, 2, 1])


def test_degree_sum_equals_twice_edge_count():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(4, 40))
        upper = np.triu((rng.random((n, n)) < 0.2), k=1).astype(np.uint8)
        a = upper + upper.T
        assert degree_vector(a).sum() == 2 * int(upper.sum())


def make_graph(n, seed=0):
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < 0.1, k=1).astype(np.uint8)
    a = upper + upper.T
    return Graph(a, rng.random((n, 2)), rng.integers(0, 3, n))


def test_split_proportions():
    split = random_split(make_graph(100), seed=0)
    assert split.train_mask.sum() == 10
    assert split.val_mask.sum() == 10
    assert split.test_mask.sum() == 80


def test_split_deterministic_and_seed_sensitive():
    g = make_graph(80)
    a = random_split(g, seed=0)
    b = random_split(g, seed=0)
    assert np.array_equal(a.train_mask, b.train_mask)
    differing = sum(
        not np.array_equal(
            random_split(g, seed=2 * s).train_mask,
            random_split(g, seed=2 * s + 1).train_mask,
        )
        for s in range(10)
    )
    assert differing >= 9


def test_split_partitions_for_random_sizes():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(10, 200))
        split = random_split(make_graph(n, seed=int(rng.integers(1000))),
                             seed=int(rng.integers(1000)))
        total = (split.train_mask.astype(int) + split.val_mask.astype(int)
                 + split.test_mask.astype(int))
        assert (total == 1).all()
        assert split.train_mask.sum() == n // 10
        assert split.test_mask.sum() == n - 2 * (n // 10)


def test_split_too_small():
    with pytest.raises(ValueError, match="at least 10"):
        random_split(make_graph(9), seed=0)


def test_split_mask_overlap_rejected():
    m = np.zeros(4, dtype=bool)
    with pytest.raises(ValueError, match="partition"):
        Split(~m, ~m, m)


def test_split_save_load_round_trip(tmp_path):
    split = random_split(make_graph(50), seed=3)
    save_split(split, tmp_path / "split.json")
    loaded = load_split(tmp_path / "split.json", n=50)
    assert np.array_equal(split.train_mask, loaded.train_mask)
    assert np.array_equal(split.val_mask, loaded.val_mask)
    assert np.array_equal(split.test_mask, loaded.test_mask)
    assert loaded.seed == 3


@pytest.mark.skipif(
    not (CORA_DIR and (Path(CORA_DIR) / "cora_edges.tsv").exists()),
    reason="Cora files not available",
)
def test_cora_statistics():
    g = load_graph(
        Path(CORA_DIR) / "cora_edges.tsv",
        Path(CORA_DIR) / "cora_features.csv",
        Path(CORA_DIR) / "cora_labels.txt",
    )
    assert g.n == 2708
    assert g.num_edges == 5278
