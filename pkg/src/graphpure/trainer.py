"""Monte-Carlo training of the edge-recovery network on one clean graph.

Each step samples a timestep t, draws the pair (A_{t-1}, A_t) from the
forward process, reads off which nodes changed degree, and fits the edge
head by cross-entropy on candidate pairs: every removed edge is a positive,
uniformly sampled active non-edges are negatives. The leading prior term of
the variational bound carries no parameters and is left out of the gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import json
import numpy as np

from . import diffusion
from .denoiser import (
    DenoiserConfig,
    DenoiserParams,
    EdgeBatch,
    edge_nll_and_grad,
    init_denoiser,
    save_checkpoint,
)
from .graphs import Graph, degree_vector
from .nnops import Adam


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 3000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    T: int = 64
    p: float = 0.0
    seed: int = 0
    checkpoint_every: int = 0  # 0 disables periodic checkpoints
    negative_ratio: int = 4

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.negative_ratio < 0:
            raise ValueError("negative_ratio must be >= 0")


@dataclass
class LossBreakdown:
    total: float
    pair_nll: float
    t: int
    candidates: int


def sample_training_batch(
    A0: np.ndarray,
    d0: np.ndarray,
    sched: diffusion.Schedule,
    candidate_cap: int,
    negative_ratio: int,
    rng: np.random.Generator,
) -> EdgeBatch:
    """Draw (A_{t-1}, A_t), derive the degree-change vector, build candidates.

    All removed edges become positives; negatives are a uniform sample of
    non-adjacent active pairs. Positives are never dropped: capping only
    limits how many negatives join them.
    """
    t = int(rng.integers(1, sched.T + 1))
    A_prev = diffusion.forward_marginal_sample(A0, t - 1, sched, rng)
    A_t = diffusion.forward_step_sample(A_prev, t, sched, rng)
    s_t = diffusion.compute_state_vector(A_prev, A_t)

    removed = np.triu((A_prev == 1) & (A_t == 0), k=1)
    pos_i, pos_j = np.nonzero(removed)
    assert (s_t[pos_i] == 1).all() and (s_t[pos_j] == 1).all()

    n_pos = pos_i.size
    n_neg = min(negative_ratio * n_pos, max(candidate_cap - n_pos, 0))
    neg = _sample_negative_pairs(s_t, A_t, A_prev, n_neg, rng)
    pairs = np.concatenate(
        [np.stack([pos_i, pos_j], axis=1).astype(np.int64), neg], axis=0
    )
    targets = np.concatenate(
        [np.ones(n_pos, dtype=np.int64), np.zeros(neg.shape[0], dtype=np.int64)]
    )
    return EdgeBatch(
        A_t=A_t, d0=d0, dt=degree_vector(A_t), t=t, pairs=pairs, targets=targets
    )


def _sample_negative_pairs(
    s_t: np.ndarray,
    A_t: np.ndarray,
    A_prev: np.ndarray,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Uniform sample of active pairs absent from both A_t and A_{t-1}."""
    if count <= 0:
        return np.empty((0, 2), dtype=np.int64)
    active = np.flatnonzero(s_t != 0)
    k = active.size
    if k < 2:
        return np.empty((0, 2), dtype=np.int64)
    total = k * (k - 1) // 2
    if total <= max(4_000_000, 4 * count):
        iu, ju = np.triu_indices(k, k=1)
        ii, jj = active[iu], active[ju]
        keep = (A_t[ii, jj] == 0) & (A_prev[ii, jj] == 0)
        ii, jj = ii[keep], jj[keep]
        if ii.size > count:
            sel = np.sort(rng.choice(ii.size, size=count, replace=False))
            ii, jj = ii[sel], jj[sel]
        return np.stack([ii, jj], axis=1).astype(np.int64)
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < count:
        u = active[rng.integers(0, k, size=4 * count)]
        v = active[rng.integers(0, k, size=4 * count)]
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        ok = (lo != hi) & (A_t[lo, hi] == 0) & (A_prev[lo, hi] == 0)
        for pu, pv in zip(lo[ok].tolist(), hi[ok].tolist()):
            chosen.add((int(pu), int(pv)))
            if len(chosen) >= count:
                break
    return np.array(sorted(chosen), dtype=np.int64)


def training_step(
    A0: np.ndarray,
    params: DenoiserParams,
    sched: diffusion.Schedule,
    config: TrainConfig,
    rng: np.random.Generator,
    optimizer: Adam,
    d0: np.ndarray | None = None,
) -> LossBreakdown:
    """One sampled-timestep optimization step; updates params in place."""
    if d0 is None:
        d0 = degree_vector(A0)
    batch = sample_training_batch(
        A0, d0, sched, params.config.candidate_cap, config.negative_ratio, rng
    )
    if batch.pairs.shape[0] == 0:
        return LossBreakdown(total=0.0, pair_nll=0.0, t=batch.t, candidates=0)
    loss, grads = edge_nll_and_grad(params, batch)
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss at t={batch.t} with {batch.pairs.shape[0]} candidates"
        )
    optimizer.step(params.arrays, grads)
    return LossBreakdown(
        total=loss, pair_nll=loss, t=batch.t, candidates=batch.pairs.shape[0]
    )


def prior_log_ratio(A0: np.ndarray, sched: diffusion.Schedule) -> float:
    """The parameter-free leading term of the bound, log p(A_T) - log q(A_T|A_0).

    Evaluated in expectation under q with an edgeless reference prior; it is
    a constant w.r.t. the model and is therefore excluded from training
    gradients.
    """
    abar = sched.alpha_bar_at(sched.T)
    m = int(np.triu(A0, k=1).sum())
    p_keep = abar + (1.0 - abar) * sched.p
    # E_q[log p - log q] per original edge entry, two-point distributions
    p_prior = max(sched.p, 1e-12)
    term_kept = p_keep * (np.log(p_prior) - np.log(max(p_keep, 1e-300)))
    term_gone = (1.0 - p_keep) * (np.log(1.0 - p_prior) - np.log(max(1.0 - p_keep, 1e-300)))
    return float(m * (term_kept + term_gone))


def train(
    graph: Graph,
    config: TrainConfig,
    denoiser_config: DenoiserConfig | None = None,
    checkpoint_dir: str | Path | None = None,
    curve_path: str | Path | None = None,
) -> DenoiserParams:
    """Run the full training loop on one clean graph; reproducible from seed."""
    A0 = graph.adjacency
    d0 = degree_vector(A0)
    if denoiser_config is None:
        denoiser_config = DenoiserConfig(max_degree=int(d0.max(initial=0)) + 1)
    if denoiser_config.max_degree < int(d0.max(initial=0)):
        raise ValueError("denoiser max_degree below the graph's maximum degree")
    rng = np.random.default_rng(config.seed)
    params = init_denoiser(denoiser_config, rng)
    sched = diffusion.build_schedule(config.T, config.p)
    optimizer = Adam(
        lr=config.lr, beta1=config.beta1, beta2=config.beta2,
        weight_decay=config.weight_decay,
    )

    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        (ckpt_dir / "train_manifest.json").write_text(
            json.dumps(
                {"train": asdict(config), "denoiser": asdict(denoiser_config),
                 "graph": {"name": graph.name, "n": graph.n,
                           "edges": graph.num_edges}},
                indent=2,
            )
        )
    curve_fh = Path(curve_path).open("w") if curve_path is not None else None
    if curve_fh is not None:
        curve_fh.write("step,t,loss,candidates\n")
    try:
        for step in range(1, config.steps + 1):
            result = training_step(A0, params, sched, config, rng, optimizer, d0=d0)
            if curve_fh is not None:
                curve_fh.write(
                    f"{step},{result.t},{result.total:.6f},{result.candidates}\n"
                )
            if (
                ckpt_dir is not None
                and config.checkpoint_every
                and step % config.checkpoint_every == 0
            ):
                save_checkpoint(params, ckpt_dir / f"params_step{step:06d}.npz")
        if ckpt_dir is not None:
            save_checkpoint(params, ckpt_dir / "params_final.npz")
    finally:
        if curve_fh is not None:
            curve_fh.close()
    return params
