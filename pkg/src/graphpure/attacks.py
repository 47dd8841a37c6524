"""Surrogate structural attackers and ingestion of external perturbed graphs.

Three desk-scale attackers cover the evaluation axes: uniform random edge
flips, cross-class edge injection biased toward low-degree endpoints (the
pattern real attacks exhibit), and a greedy per-target heuristic that wires
each target to its least feature-similar cross-class candidates. Perturbed
graphs produced elsewhere can be loaded from the canonical edge-list format
instead.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import json
import warnings

import numpy as np

from .graphs import Graph, Split, degree_vector, read_edge_list
from .purifier import AttackedGraph, feature_smoothness


@dataclass(frozen=True)
class AttackSpec:
    kind: str  # random-flip | degree-biased | targeted-heuristic | external-file
    ptb_rate: float | None = None
    ptb_num: int | None = None
    targets: tuple[int, ...] = ()
    seed: int = 0
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind in ("random-flip", "degree-biased"):
            if self.ptb_rate is None or self.ptb_num is not None:
                raise ValueError(f"{self.kind} attack takes ptb_rate only")
            if not 0.0 < self.ptb_rate <= 1.0:
                raise ValueError("ptb_rate must lie in (0, 1]")
        elif self.kind == "targeted-heuristic":
            if self.ptb_num is None or self.ptb_rate is not None:
                raise ValueError("targeted-heuristic attack takes ptb_num only")
            if self.ptb_num < 1:
                raise ValueError("ptb_num must be >= 1")
        elif self.kind == "external-file":
            if self.path is None:
                raise ValueError("external-file attack needs a path")
        else:
            raise ValueError(f"unknown attack kind {self.kind!r}")


def run_attack(graph: Graph, spec: AttackSpec) -> AttackedGraph:
    """Dispatch on the attack kind."""
    if spec.kind == "random-flip":
        return random_flip_attack(graph, spec)
    if spec.kind == "degree-biased":
        return degree_biased_attack(graph, spec)
    if spec.kind == "targeted-heuristic":
        return targeted_heuristic_attack(graph, spec)
    return load_perturbed(spec.path, graph)


def select_target_nodes(graph: Graph, split: Split) -> list[int]:
    """Test-mask nodes with degree above 10, in ascending id order."""
    degrees = degree_vector(graph.adjacency)
    targets = np.flatnonzero(split.test_mask & (degrees > 10))
    if targets.size == 0:
        warnings.warn("no test nodes with degree > 10; empty target list")
    return targets.tolist()


def _attacked(graph: Graph, adjacency: np.ndarray, achieved: int,
              spec: AttackSpec) -> AttackedGraph:
    return AttackedGraph(
        adjacency=adjacency,
        features=graph.features,
        labels=graph.labels,
        name=f"{graph.name}+{spec.kind}",
        achieved_perturbations=achieved,
    )


def random_flip_attack(graph: Graph, spec: AttackSpec) -> AttackedGraph:
    """Flip ceil(rate * |E|) uniformly chosen distinct node pairs."""
    rng = np.random.default_rng(spec.seed)
    n = graph.n
    budget = int(np.ceil(spec.ptb_rate * graph.num_edges))
    adjacency = graph.adjacency.copy()
    flipped: set[tuple[int, int]] = set()
    while len(flipped) < budget:
        u, v = rng.integers(0, n, size=2)
        if u == v:
            continue
        pair = (min(u, v), max(u, v))
        if pair in flipped:
            continue
        adjacency[pair] = adjacency[pair[::-1]] = 1 - adjacency[pair]
        flipped.add(pair)
    return _attacked(graph, adjacency, budget, spec)


def degree_biased_attack(graph: Graph, spec: AttackSpec) -> AttackedGraph:
    """Inject cross-class edges anchored at low-degree nodes.

    Anchors are nodes with degree below the graph median, picked with
    probability proportional to 1/(1+degree); the other endpoint is uniform
    over nodes of a different class. Mirrors the observation that real
    attacks concentrate on low-degree endpoints.
    """
    rng = np.random.default_rng(spec.seed)
    degrees = degree_vector(graph.adjacency)
    median = float(np.median(degrees))
    low = np.flatnonzero(degrees < median)
    if low.size == 0:
        low = np.flatnonzero(degrees <= median)
    weights = 1.0 / (1.0 + degrees[low])
    weights = weights / weights.sum()
    budget = int(np.ceil(spec.ptb_rate * graph.num_edges))
    adjacency = graph.adjacency.copy()
    added = 0
    tries = 0
    while added < budget:
        tries += 1
        if tries > 200 * budget + 10_000:
            warnings.warn(
                f"degree-biased attack placed only {added}/{budget} edges"
            )
            break
        u = int(rng.choice(low, p=weights))
        others = np.flatnonzero(graph.labels != graph.labels[u])
        if others.size == 0:
            continue
        v = int(rng.choice(others))
        if adjacency[u, v] or u == v:
            continue
        adjacency[u, v] = adjacency[v, u] = 1
        added += 1
    return _attacked(graph, adjacency, added, spec)


def targeted_heuristic_attack(graph: Graph, spec: AttackSpec) -> AttackedGraph:
    """Greedy per-target perturbations against feature smoothness.

    For each target, prefer adding an edge to the non-neighbor of a
    different class with the largest feature distance; when no addition is
    possible, drop the same-class neighbor with the smallest distance. Ties
    break on the lower node id, so the attack is reproducible.
    """
    if not spec.targets:
        raise ValueError("targeted-heuristic attack needs target nodes")
    n = graph.n
    for v in spec.targets:
        if not 0 <= v < n:
            raise ValueError(f"target node {v} out of range [0, {n})")
    adjacency = graph.adjacency.copy()
    X = graph.features
    achieved = 0
    for v in spec.targets:
        for _ in range(spec.ptb_num):
            gaps = np.einsum("ij,ij->i", X - X[v], X - X[v])
            non_neighbor = (adjacency[v] == 0) & (graph.labels != graph.labels[v])
            non_neighbor[v] = False
            if non_neighbor.any():
                cand = np.flatnonzero(non_neighbor)
                u = int(cand[np.argmax(gaps[cand])])
                adjacency[v, u] = adjacency[u, v] = 1
                achieved += 1
                continue
            same_neighbor = (adjacency[v] == 1) & (graph.labels == graph.labels[v])
            if same_neighbor.any():
                cand = np.flatnonzero(same_neighbor)
                u = int(cand[np.argmin(gaps[cand])])
                adjacency[v, u] = adjacency[u, v] = 0
                achieved += 1
            else:
                warnings.warn(f"target {v} has no legal perturbation left")
                break
    return _attacked(graph, adjacency, achieved, spec)


def load_perturbed(path: str | Path, clean: Graph) -> AttackedGraph:
    """Read an externally attacked adjacency over the clean graph's nodes."""
    adjacency = read_edge_list(path, n=clean.n)
    changed = int(np.triu(adjacency != clean.adjacency, k=1).sum())
    return AttackedGraph(
        adjacency=adjacency,
        features=clean.features,
        labels=clean.labels,
        name=f"{clean.name}+external",
        achieved_perturbations=changed,
    )


def write_attack_manifest(spec: AttackSpec, attacked: AttackedGraph,
                          path: str | Path) -> None:
    payload = asdict(spec)
    payload["achieved_perturbations"] = attacked.achieved_perturbations
    payload["edges"] = attacked.num_edges
    Path(path).write_text(json.dumps(payload, indent=2))
