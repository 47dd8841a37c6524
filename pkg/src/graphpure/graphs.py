"""Graph containers, file IO and node splits.

Graphs are undirected, unweighted and stored as dense binary adjacency
matrices with a zero diagonal. Node features and integer class labels ride
along so a single object can be handed to attackers, the purifier and the
classifier.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import json
import numpy as np


class ParseError(ValueError):
    """A data file could not be parsed; the message carries the line number."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass
class Graph:
    """An undirected graph: adjacency (n x n, {0,1}), features (n x d), labels (n,)."""

    adjacency: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    name: str = "graph"

    def __post_init__(self) -> None:
        self.adjacency = _frozen(np.ascontiguousarray(self.adjacency, dtype=np.uint8))
        self.features = _frozen(np.ascontiguousarray(self.features, dtype=np.float64))
        self.labels = _frozen(np.ascontiguousarray(self.labels, dtype=np.int64))
        self.validate()

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return int(self.adjacency.sum()) // 2

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def validate(self) -> None:
        a = self.adjacency
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got {a.shape}")
        n = a.shape[0]
        if not np.isin(a, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if np.diag(a).any():
            raise ValueError("adjacency has nonzero diagonal (self-loops)")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency is not symmetric")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError(
                f"features must have {n} rows, got shape {self.features.shape}"
            )
        if self.labels.shape != (n,):
            raise ValueError(f"labels must have length {n}")

    def with_adjacency(self, adjacency: np.ndarray, name: str | None = None) -> "Graph":
        """A copy of this graph with a different edge set (features/labels shared)."""
        return Graph(adjacency, self.features, self.labels, name or self.name)


@dataclass
class Split:
    """Disjoint boolean train/val/test masks covering all nodes."""

    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        self.train_mask = _frozen(np.asarray(self.train_mask, dtype=bool))
        self.val_mask = _frozen(np.asarray(self.val_mask, dtype=bool))
        self.test_mask = _frozen(np.asarray(self.test_mask, dtype=bool))
        total = (
            self.train_mask.astype(int)
            + self.val_mask.astype(int)
            + self.test_mask.astype(int)
        )
        if not (total == 1).all():
            raise ValueError("split masks must partition the node set")


def degree_vector(adjacency: np.ndarray) -> np.ndarray:
    """Per-node degrees, i.e. row sums of a binary adjacency matrix."""
    return np.asarray(adjacency, dtype=np.int64).sum(axis=1)


def random_split(graph: Graph, seed: int) -> Split:
    """Random 10/10/80 train/val/test split; the rounding remainder goes to test."""
    n = graph.n
    if n < 10:
        raise ValueError(f"need at least 10 nodes to split, got {n}")
    n_train = n // 10
    n_val = n // 10
    order = np.random.default_rng(seed).permutation(n)
    train_mask = np.zeros(n, dtype=bool)
    val_mask = np.zeros(n, dtype=bool)
    test_mask = np.zeros(n, dtype=bool)
    train_mask[order[:n_train]] = True
    val_mask[order[n_train : n_train + n_val]] = True
    test_mask[order[n_train + n_val :]] = True
    return Split(train_mask, val_mask, test_mask, seed=seed)


# ---------------------------------------------------------------------------
# File IO. Canonical interchange formats:
#   edges:    one "u<TAB>v" pair per line, 0-based ids, undirected
#   features: CSV, row i = node i
#   labels:   one integer per line
#   split:    JSON with three index lists


def read_edge_list(path: str | Path, n: int) -> np.ndarray:
    """Parse an edge-list file into a symmetric adjacency matrix.

    Duplicate and reversed pairs collapse to a single undirected edge.
    Self-loops and out-of-range ids are rejected.
    """
    adjacency = np.zeros((n, n), dtype=np.uint8)
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'u<TAB>v', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-integer node id") from exc
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(
                    f"{path}:{lineno}: node id out of range [0, {n}): ({u}, {v})"
                )
            if u == v:
                raise ValueError(f"{path}:{lineno}: self-loop ({u}, {v}) not allowed")
            adjacency[u, v] = 1
            adjacency[v, u] = 1
    return adjacency


def write_edge_list(adjacency: np.ndarray, path: str | Path) -> None:
    """Write the upper-triangle edges as sorted "u<TAB>v" lines."""
    rows, cols = np.nonzero(np.triu(adjacency, k=1))
    with Path(path).open("w") as fh:
        for u, v in zip(rows.tolist(), cols.tolist()):
            fh.write(f"{u}\t{v}\n")


def load_graph(
    edge_path: str | Path,
    feature_path: str | Path,
    label_path: str | Path,
    name: str | None = None,
) -> Graph:
    """Load a graph from an edge list, a feature CSV and a label file."""
    labels = []
    with Path(label_path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError as exc:
                raise ParseError(f"{label_path}:{lineno}: non-integer label") from exc
    labels_arr = np.asarray(labels, dtype=np.int64)
    features = np.loadtxt(feature_path, delimiter=",", dtype=np.float64, ndmin=2)
    if features.shape[0] != labels_arr.shape[0]:
        raise ValueError(
            f"feature rows ({features.shape[0]}) != label count ({labels_arr.shape[0]})"
        )
    adjacency = read_edge_list(edge_path, n=labels_arr.shape[0])
    return Graph(adjacency, features, labels_arr, name or Path(edge_path).stem)


def save_graph(graph: Graph, edge_path: str | Path,
               feature_path: str | Path | None = None,
               label_path: str | Path | None = None) -> None:
    """Write a graph back out in the canonical interchange formats."""
    write_edge_list(graph.adjacency, edge_path)
    if feature_path is not None:
        np.savetxt(feature_path, graph.features, delimiter=",")
    if label_path is not None:
        with Path(label_path).open("w") as fh:
            for label in graph.labels.tolist():
                fh.write(f"{label}\n")


def save_split(split: Split, path: str | Path) -> None:
    payload = {
        "train": np.flatnonzero(split.train_mask).tolist(),
        "val": np.flatnonzero(split.val_mask).tolist(),
        "test": np.flatnonzero(split.test_mask).tolist(),
        "seed": split.seed,
    }
    Path(path).write_text(json.dumps(payload))


def load_split(path: str | Path, n: int) -> Split:
    payload = json.loads(Path(path).read_text())
    masks = {}
    for key in ("train", "val", "test"):
        mask = np.zeros(n, dtype=bool)
        mask[np.asarray(payload[key], dtype=np.int64)] = True
        masks[key] = mask
    return Split(masks["train"], masks["val"], masks["test"], seed=payload.get("seed", 0))
