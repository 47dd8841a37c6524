"""Stochastic-block-model graphs for benchmarks and tests.

Node features are noisy class indicators: the mean of block b sits at
scale * e_b and Gaussian noise controls how much the classifier must rely
on graph structure.
"""

from __future__ import annotations

import numpy as np

from .graphs import Graph


def sbm_graph(
    block_sizes: list[int] | tuple[int, ...],
    p_in: float,
    p_out: float,
    seed: int = 0,
    feature_dim: int | None = None,
    feature_scale: float = 1.0,
    feature_noise: float = 0.25,
    name: str = "sbm",
) -> Graph:
    """Sample an undirected SBM with Gaussian block-indicator features."""
    rng = np.random.default_rng(seed)
    sizes = np.asarray(block_sizes, dtype=np.int64)
    n = int(sizes.sum())
    labels = np.repeat(np.arange(sizes.size), sizes)
    prob = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    adjacency = upper.astype(np.uint8)
    adjacency += adjacency.T

    k = sizes.size
    dim = feature_dim if feature_dim is not None else k
    means = np.zeros((k, dim))
    means[:, : min(k, dim)] = feature_scale * np.eye(k)[:, : min(k, dim)]
    features = means[labels] + feature_noise * rng.standard_normal((n, dim))
    return Graph(adjacency, features, labels, name=name)


def inject_cross_block_edges(
    graph: Graph, fraction: float, seed: int = 0
) -> tuple[Graph, np.ndarray]:
    """Add `fraction * |E|` edges between different blocks; returns (graph, pairs).

    The injected pairs are reported so tests can score removal precision
    against the planted noise.
    """
    rng = np.random.default_rng(seed)
    n_add = int(np.ceil(fraction * graph.num_edges))
    adjacency = graph.adjacency.copy()
    added = []
    guard = 0
    while len(added) < n_add:
        u, v = rng.integers(0, graph.n, size=2)
        if u == v or graph.labels[u] == graph.labels[v] or adjacency[u, v]:
            guard += 1
            if guard > 100 * n_add + 10_000:
                raise RuntimeError("could not place the requested cross-block edges")
            continue
        adjacency[u, v] = adjacency[v, u] = 1
        added.append((min(u, v), max(u, v)))
    return graph.with_adjacency(adjacency), np.array(sorted(added), dtype=np.int64)
