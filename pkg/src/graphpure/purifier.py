"""Inference-phase purification of an attacked graph.

The reverse chain starts from an attack-specific matrix (empty for
non-targeted attacks; the attacked graph minus all target-incident edges
for targeted ones), repeatedly samples which nodes still owe degree, asks
the trained network for new edges among them, and intersects every proposal
with the attacked adjacency so nothing outside it can appear. When the
chain hits t=1 short of the requested size it restarts from its current
state at t = T/2. A final feature/degree filter drops the top-k least
feature-smooth edges that touch a low-degree node.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, field

import json
import numpy as np

from . import diffusion
from .denoiser import DenoiserParams, denoise_step
from .graphs import Graph, degree_vector


@dataclass
class AttackedGraph:
    """A perturbed adjacency with the clean features and labels riding along."""

    adjacency: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    name: str = "attacked"
    achieved_perturbations: int = 0

    def __post_init__(self) -> None:
        self.adjacency = np.ascontiguousarray(self.adjacency, dtype=np.uint8)
        Graph(self.adjacency, self.features, self.labels, self.name)  # validate

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    @property
    def degrees(self) -> np.ndarray:
        return degree_vector(self.adjacency)


@dataclass(frozen=True)
class PurifyConfig:
    mu: float = 0.9
    lam: float | None = None  # None -> median degree of the attacked graph
    k: int | None = None  # None -> 5% of the attacked edge count
    mode: str = "non-targeted"  # or "targeted"
    target_nodes: tuple[int, ...] = ()
    max_restarts: int = 8
    seed: int = 0
    use_gsdr: bool = True
    use_nfcr: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.mu <= 1.0:
            raise ValueError("mu must lie in (0, 1]")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda threshold must be >= 0")
        if self.k is not None and self.k < 0:
            raise ValueError("k must be >= 0")
        if self.mode not in ("targeted", "non-targeted"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "targeted" and not self.target_nodes:
            raise ValueError("targeted mode needs a non-empty target_nodes list")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be >= 0")


@dataclass
class PurifyReport:
    edges_attacked: int
    edges_generated: int
    edges_final: int
    restarts: int
    reached_mu: bool
    nfcr_removed: int
    steps: int
    seed: int
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def init_denoise_start(attacked: AttackedGraph, config: PurifyConfig) -> np.ndarray:
    """Empty matrix for global denoising; strip target-incident edges otherwise."""
    if config.mode == "non-targeted":
        return np.zeros_like(attacked.adjacency)
    targets = np.asarray(config.target_nodes, dtype=np.int64)
    if (targets < 0).any() or (targets >= attacked.n).any():
        raise ValueError("target node id out of range")
    start = attacked.adjacency.copy()
    start[targets, :] = 0
    start[:, targets] = 0
    return start


def gsdr_filter(A_gen: np.ndarray, A_attacked: np.ndarray) -> np.ndarray:
    """Keep only generated edges that exist in the attacked graph (A' ⊙ A_gen)."""
    if A_gen.shape != A_attacked.shape:
        raise ValueError(f"shape mismatch: {A_gen.shape} vs {A_attacked.shape}")
    return (np.asarray(A_gen, dtype=np.uint8) * np.asarray(A_attacked, dtype=np.uint8))


@dataclass
class GenerateInfo:
    restarts: int
    steps: int
    reached_mu: bool


def generate(
    attacked: AttackedGraph,
    params: DenoiserParams,
    sched: diffusion.Schedule,
    config: PurifyConfig,
    rng: np.random.Generator,
    step_fn=None,
) -> tuple[np.ndarray, GenerateInfo]:
    """Run the guided reverse chain until the size target is reached.

    `step_fn(A_t, s_t, d0, t, rng)` may replace the trained network (used by
    tests with oracle denoisers). Failing to reach the target within
    max_restarts returns the best-effort matrix flagged in the info record.
    """
    if step_fn is None:
        step_fn = lambda A_t, s_t, d0, t, r: denoise_step(A_t, s_t, d0, t, params, r)
    d0 = attacked.degrees
    target = config.mu * attacked.num_edges
    A = init_denoise_start(attacked, config)
    t = sched.T
    restarts = 0
    steps = 0
    reached = True
    while int(A.sum()) // 2 < target:
        dt = degree_vector(A)
        if not config.use_gsdr:
            dt = np.minimum(dt, d0)  # unconstrained generation can overshoot d0
        s_t = diffusion.sample_state_vector(d0, dt, t, sched, rng)
        A = step_fn(A, s_t, d0, t, rng)
        if config.use_gsdr:
            A = gsdr_filter(A, attacked.adjacency)
        steps += 1
        t -= 1
        if t == 0:
            restarts += 1
            if restarts > config.max_restarts:
                reached = False
                break
            t = max(sched.T // 2, 1)
    return A, GenerateInfo(restarts=restarts, steps=steps, reached_mu=reached)


def feature_smoothness(X: np.ndarray, i: int, j: int) -> float:
    """Squared Euclidean distance between two feature rows."""
    diff = X[i] - X[j]
    return float(diff @ diff)


def smoothness_of_pairs(X: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Vectorized feature smoothness for an (m, 2) array of node pairs."""
    diff = X[pairs[:, 0]] - X[pairs[:, 1]]
    return np.einsum("ij,ij->i", diff, diff)


def attack_probability(
    d_attacked: np.ndarray, i: int, j: int, lam: float
) -> int:
    """1 when either endpoint's attacked-graph degree falls below the threshold."""
    return int(d_attacked[i] < lam or d_attacked[j] < lam)


def nfcr_filter(
    A_raw: np.ndarray,
    X: np.ndarray,
    d_attacked: np.ndarray,
    lam: float,
    k: int,
) -> np.ndarray:
    """Remove flagged edges ranking in the global top-k by feature smoothness.

    Edges are ranked by descending smoothness over the whole generated graph
    (ties broken lexicographically on the pair), and an edge is dropped only
    when it is both inside the top-k and degree-flagged.
    """
    rows, cols = np.nonzero(np.triu(A_raw, k=1))
    out = np.asarray(A_raw, dtype=np.uint8).copy()
    if k <= 0 or rows.size == 0:
        return out
    pairs = np.stack([rows, cols], axis=1)
    fs = smoothness_of_pairs(X, pairs)
    order = np.lexsort((cols, rows, -fs))
    top = order[: min(k, order.size)]
    flagged = (d_attacked[rows[top]] < lam) | (d_attacked[cols[top]] < lam)
    drop = top[flagged]
    out[rows[drop], cols[drop]] = 0
    out[cols[drop], rows[drop]] = 0
    return out


def resolve_nfcr_defaults(
    attacked: AttackedGraph, config: PurifyConfig
) -> tuple[float, int]:
    """Fill in the dataset-dependent NFCR knobs from the attacked graph."""
    lam = config.lam if config.lam is not None else float(np.median(attacked.degrees))
    k = config.k if config.k is not None else int(np.ceil(0.05 * attacked.num_edges))
    return lam, k


def purify(
    attacked: AttackedGraph,
    params: DenoiserParams,
    sched: diffusion.Schedule,
    config: PurifyConfig,
    step_fn=None,
) -> tuple[Graph, PurifyReport]:
    """Full pipeline: guided generation, then the feature/degree filter."""
    rng = np.random.default_rng(config.seed)
    A_raw, info = generate(attacked, params, sched, config, rng, step_fn=step_fn)
    edges_generated = int(A_raw.sum()) // 2
    lam, k = resolve_nfcr_defaults(attacked, config)
    if config.use_nfcr:
        A_final = nfcr_filter(A_raw, attacked.features, attacked.degrees, lam, k)
    else:
        A_final = A_raw
    edges_final = int(A_final.sum()) // 2
    graph = Graph(A_final, attacked.features, attacked.labels,
                  name=f"{attacked.name}+purified")
    report = PurifyReport(
        edges_attacked=attacked.num_edges,
        edges_generated=edges_generated,
        edges_final=edges_final,
        restarts=info.restarts,
        reached_mu=info.reached_mu,
        nfcr_removed=edges_generated - edges_final,
        steps=info.steps,
        seed=config.seed,
        config=asdict(config),
    )
    return graph, report
