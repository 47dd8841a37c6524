"""Degree-conditioned edge-recovery network.

Given the reference degrees d0, the current degrees dt, the step t and the
current adjacency, the network embeds each node's degree pair, refines the
embeddings through L rounds of attentive message passing with gated
recurrent updates and a global context vector, and scores candidate node
pairs with a two-way perceptron head. New edges are drawn by Gumbel-argmax
over the two scores, which is exactly Bernoulli sampling with probability
softmax(b)[edge].

Everything is plain numpy in float64. The backward pass (used for training)
is hand-written against the forward pass below; `edge_nll_and_grad` is the
single entry point the trainer needs.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import json
import numpy as np

from .nnops import glorot, log_softmax, sigmoid, softmax

CHECKPOINT_VERSION = "1"


@dataclass(frozen=True)
class DenoiserConfig:
    layers: int = 3
    embed_dim: int = 64
    hidden_dim: int = 128
    heads: int = 4
    max_degree: int = 512
    candidate_cap: int = 20_000

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ValueError("need at least one message-passing layer")
        if self.embed_dim < 2 or self.embed_dim % 2:
            raise ValueError("embed_dim must be even and >= 2")
        if self.embed_dim % self.heads:
            raise ValueError("embed_dim must be divisible by heads")
        if min(self.hidden_dim, self.max_degree, self.candidate_cap) < 1:
            raise ValueError("hidden_dim, max_degree and candidate_cap must be >= 1")


@dataclass
class DenoiserParams:
    """Named weight arrays plus the config they were shaped for."""

    config: DenoiserConfig
    arrays: dict[str, np.ndarray]

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(self.config, {k: v.copy() for k, v in self.arrays.items()})


@dataclass
class NetState:
    """Intermediate node representations carried between layers."""

    Z: np.ndarray
    H: np.ndarray
    c: np.ndarray
    t_emb: np.ndarray


@dataclass
class EdgeLogits:
    """Candidate pairs (i < j, both endpoints active) and their two-way scores."""

    pairs: np.ndarray  # (m, 2) int
    b: np.ndarray  # (m, 2) float: [no-edge, edge]


def _param_shapes(config: DenoiserConfig) -> dict[str, tuple[int, ...]]:
    e, h = config.embed_dim, config.hidden_dim
    shapes: dict[str, tuple[int, ...]] = {
        "deg_emb": (config.max_degree + 1, e // 2),
        "time_w": (e, e),
        "time_b": (e,),
        "ctx.w1": (2 * e, h),
        "ctx.b1": (h,),
        "ctx.w2": (h, e),
        "ctx.b2": (e,),
        "edge.w1": (e, h),
        "edge.b1": (h,),
        "edge.w2": (h, 2),
        "edge.b2": (2,),
    }
    for l in range(config.layers):
        shapes[f"gt{l}.wp"] = (2 * e, e)
        shapes[f"gt{l}.bp"] = (e,)
        shapes[f"gt{l}.wq"] = (e, e)
        shapes[f"gt{l}.wk"] = (e, e)
        shapes[f"gt{l}.wv"] = (e, e)
        shapes[f"gt{l}.wo"] = (e, e)
        shapes[f"gt{l}.bo"] = (e,)
        shapes[f"gt{l}.ln_g"] = (e,)
        shapes[f"gt{l}.ln_b"] = (e,)
        shapes[f"gru{l}.wx"] = (e, 3 * e)
        shapes[f"gru{l}.wh"] = (e, 3 * e)
        shapes[f"gru{l}.bx"] = (3 * e,)
        shapes[f"gru{l}.bh"] = (3 * e,)
    return shapes


def init_denoiser(config: DenoiserConfig, rng: np.random.Generator) -> DenoiserParams:
    arrays: dict[str, np.ndarray] = {}
    for name, shape in _param_shapes(config).items():
        if name == "deg_emb":
            arrays[name] = rng.normal(0.0, 0.3, size=shape)
        elif name.endswith("ln_g"):
            arrays[name] = np.ones(shape)
        elif len(shape) == 2:
            arrays[name] = glorot(rng, *shape)
        else:
            arrays[name] = np.zeros(shape)
    return DenoiserParams(config, arrays)


def save_checkpoint(params: DenoiserParams, path: str | Path) -> None:
    meta = json.dumps({"version": CHECKPOINT_VERSION, "config": asdict(params.config)})
    np.savez(Path(path), __meta__=np.frombuffer(meta.encode(), dtype=np.uint8),
             **params.arrays)


def load_checkpoint(path: str | Path) -> DenoiserParams:
    with np.load(Path(path)) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        config = DenoiserConfig(**meta["config"])
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    expected = _param_shapes(config)
    if set(arrays) != set(expected):
        raise ValueError("checkpoint weight names do not match the config")
    for name, shape in expected.items():
        if arrays[name].shape != shape:
            raise ValueError(
                f"checkpoint array {name} has shape {arrays[name].shape}, "
                f"expected {shape}"
            )
    return DenoiserParams(config, arrays)


# ---------------------------------------------------------------------------
# Forward pass


def time_features(t: int, dim: int) -> np.ndarray:
    """Sinusoidal features of the integer step, transformer-style."""
    half = dim // 2
    freqs = np.exp(-np.log(10_000.0) * np.arange(half) / max(half, 1))
    angles = t * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)])


def init_node_repr(
    d0: np.ndarray, dt: np.ndarray, t: int, params: DenoiserParams
) -> NetState:
    """Embed each node's (current, reference) degree pair; start H at zero."""
    cfg = params.config
    a = params.arrays
    dt_idx = np.clip(np.asarray(dt, dtype=np.int64), 0, cfg.max_degree)
    d0_idx = np.clip(np.asarray(d0, dtype=np.int64), 0, cfg.max_degree)
    Z = np.concatenate([a["deg_emb"][dt_idx], a["deg_emb"][d0_idx]], axis=1)
    t_emb = time_features(t, cfg.embed_dim) @ a["time_w"] + a["time_b"]
    return NetState(Z=Z, H=np.zeros_like(Z), c=Z.mean(axis=0), t_emb=t_emb)


LN_EPS = 1e-6


def _graph_transformer(X: np.ndarray, src: np.ndarray, dst: np.ndarray,
                       a: dict[str, np.ndarray], l: int, heads: int,
                       cache: dict | None = None) -> np.ndarray:
    """Transformer block over the edge list: project, attend to neighbors,
    add the residual and layer-normalize (keeps per-node variance alive
    through the stack)."""
    n = X.shape[0]
    e = a[f"gt{l}.wq"].shape[1]
    dh = e // heads
    Xp = X @ a[f"gt{l}.wp"] + a[f"gt{l}.bp"]
    Q = (Xp @ a[f"gt{l}.wq"]).reshape(n, heads, dh)
    K = (Xp @ a[f"gt{l}.wk"]).reshape(n, heads, dh)
    V = (Xp @ a[f"gt{l}.wv"]).reshape(n, heads, dh)
    agg = np.zeros((n, heads, dh))
    alpha = np.zeros((src.size, heads))
    if src.size:
        scores = (Q[src] * K[dst]).sum(axis=2) / np.sqrt(dh)  # (E, heads)
        seg_max = np.full((n, heads), -np.inf)
        np.maximum.at(seg_max, src, scores)
        exp = np.exp(scores - seg_max[src])
        seg_sum = np.zeros((n, heads))
        np.add.at(seg_sum, src, exp)
        alpha = exp / seg_sum[src]
        np.add.at(agg, src, alpha[:, :, None] * V[dst])
    R = Xp + agg.reshape(n, e) @ a[f"gt{l}.wo"] + a[f"gt{l}.bo"]
    mu = R.mean(axis=1, keepdims=True)
    sigma = np.sqrt(R.var(axis=1, keepdims=True) + LN_EPS)
    R_hat = (R - mu) / sigma
    out = R_hat * a[f"gt{l}.ln_g"] + a[f"gt{l}.ln_b"]
    if cache is not None:
        cache.update(Q=Q, K=K, V=V, alpha=alpha, X=X, Xp=Xp,
                     agg=agg.reshape(n, e), R_hat=R_hat, sigma=sigma)
    return out


def _gru(G: np.ndarray, H: np.ndarray, a: dict[str, np.ndarray], l: int,
         cache: dict | None = None) -> np.ndarray:
    e = H.shape[1]
    xg = G @ a[f"gru{l}.wx"] + a[f"gru{l}.bx"]
    hg = H @ a[f"gru{l}.wh"] + a[f"gru{l}.bh"]
    r = sigmoid(xg[:, :e] + hg[:, :e])
    z = sigmoid(xg[:, e : 2 * e] + hg[:, e : 2 * e])
    n_pre = xg[:, 2 * e :] + r * hg[:, 2 * e :]
    n_gate = np.tanh(n_pre)
    H_new = (1.0 - z) * n_gate + z * H
    if cache is not None:
        cache.update(G=G, H_prev=H, r=r, z=z, n_gate=n_gate, hg_n=hg[:, 2 * e :])
    return H_new


def mpm_layer(state: NetState, A_t: np.ndarray, params: DenoiserParams,
              layer: int, cache: dict | None = None) -> NetState:
    """One round: time concat, attentive propagation, GRU update, context mix."""
    cfg = params.config
    a = params.arrays
    n = state.Z.shape[0]
    src, dst = np.nonzero(np.asarray(A_t))
    X = np.concatenate([state.Z, np.tile(state.t_emb, (n, 1))], axis=1)
    G = _graph_transformer(X, src, dst, a, layer, cfg.heads, cache)
    H_new = _gru(G, state.H, a, layer, cache)
    u = np.concatenate([H_new.mean(axis=0), state.c])
    a1 = u @ a["ctx.w1"] + a["ctx.b1"]
    m = np.tanh(a1)
    c_new = m @ a["ctx.w2"] + a["ctx.b2"]
    Z_new = H_new + c_new
    if not np.isfinite(Z_new).all():
        raise FloatingPointError(f"non-finite representations after layer {layer}")
    if cache is not None:
        cache.update(src=src, dst=dst, u=u, m=m, c_prev=state.c)
    return NetState(Z=Z_new, H=H_new, c=c_new, t_emb=state.t_emb)


def node_representations(
    params: DenoiserParams,
    d0: np.ndarray,
    dt: np.ndarray,
    t: int,
    A_t: np.ndarray,
    caches: list[dict] | None = None,
) -> tuple[NetState, NetState]:
    """Run the full stack; returns (initial state, final state)."""
    state0 = init_node_repr(d0, dt, t, params)
    state = state0
    for l in range(params.config.layers):
        cache: dict | None = {} if caches is not None else None
        state = mpm_layer(state, A_t, params, l, cache)
        if caches is not None:
            caches.append(cache)  # type: ignore[arg-type]
    return state0, state


def candidate_pairs(
    s_t: np.ndarray, A_t: np.ndarray, cap: int, rng: np.random.Generator
) -> np.ndarray:
    """All unordered non-adjacent pairs of active nodes, uniformly capped.

    Enumeration is exact when the active set is small; above ~4M potential
    pairs a rejection sampler draws a uniform distinct subset instead of
    materialising the full candidate list.
    """
    active = np.flatnonzero(np.asarray(s_t) != 0)
    k = active.size
    if k < 2:
        return np.empty((0, 2), dtype=np.int64)
    total = k * (k - 1) // 2
    A = np.asarray(A_t)
    if total <= max(4_000_000, 4 * cap):
        iu, ju = np.triu_indices(k, k=1)
        ii, jj = active[iu], active[ju]
        keep = A[ii, jj] == 0
        pairs = np.stack([ii[keep], jj[keep]], axis=1)
        if pairs.shape[0] > cap:
            sel = rng.choice(pairs.shape[0], size=cap, replace=False)
            pairs = pairs[np.sort(sel)]
        return pairs
    chosen: set[tuple[int, int]] = set()
    n = A.shape[0]
    while len(chosen) < cap:
        u = active[rng.integers(0, k, size=4 * cap)]
        v = active[rng.integers(0, k, size=4 * cap)]
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        ok = (lo != hi) & (A[lo, hi] == 0)
        for pu, pv in zip(lo[ok].tolist(), hi[ok].tolist()):
            chosen.add((pu, pv))
            if len(chosen) >= cap:
                break
    pairs = np.array(sorted(chosen), dtype=np.int64)
    _ = n
    return pairs


def predict_edge_logits(
    state: NetState,
    s_t: np.ndarray,
    A_t: np.ndarray,
    params: DenoiserParams,
    rng: np.random.Generator,
) -> EdgeLogits:
    """Score every capped candidate pair with the two-way edge head."""
    pairs = candidate_pairs(s_t, A_t, params.config.candidate_cap, rng)
    b = edge_scores(params, state.Z, pairs)
    return EdgeLogits(pairs=pairs, b=b)


def edge_scores(params: DenoiserParams, Z: np.ndarray, pairs: np.ndarray,
                cache: dict | None = None) -> np.ndarray:
    """Two-way scores for node pairs: perceptron on Z_i + Z_j (order-free)."""
    a = params.arrays
    if pairs.shape[0] == 0:
        return np.empty((0, 2))
    S = Z[pairs[:, 0]] + Z[pairs[:, 1]]
    a1 = S @ a["edge.w1"] + a["edge.b1"]
    h = np.tanh(a1)
    b = h @ a["edge.w2"] + a["edge.b2"]
    if cache is not None:
        cache.update(S=S, h=h, pairs=pairs)
    return b


def edge_probabilities(logits: EdgeLogits) -> np.ndarray:
    """P(edge) per candidate pair, i.e. softmax over the two scores."""
    if logits.b.shape[0] == 0:
        return np.empty(0)
    return softmax(logits.b)[:, 1]


def sample_edges(
    logits: EdgeLogits, rng: np.random.Generator, greedy: bool = False
) -> np.ndarray:
    """Pairs whose 'edge' component wins the Gumbel-argmax (or plain argmax)."""
    if logits.pairs.shape[0] == 0:
        return np.empty((0, 2), dtype=np.int64)
    scores = logits.b
    if not greedy:
        g = rng.gumbel(size=scores.shape)
        scores = scores + g
    win = scores[:, 1] > scores[:, 0]
    return logits.pairs[win]


def denoise_step(
    A_t: np.ndarray,
    s_t: np.ndarray,
    d0: np.ndarray,
    t: int,
    params: DenoiserParams,
    rng: np.random.Generator,
    greedy: bool = False,
) -> np.ndarray:
    """One reverse step: add sampled edges between active nodes to A_t."""
    A_t = np.asarray(A_t, dtype=np.uint8)
    dt = A_t.sum(axis=1, dtype=np.int64)
    _, state = node_representations(params, d0, dt, t, A_t)
    logits = predict_edge_logits(state, s_t, A_t, params, rng)
    new_edges = sample_edges(logits, rng, greedy=greedy)
    A_prev = A_t.copy()
    if new_edges.shape[0]:
        A_prev[new_edges[:, 0], new_edges[:, 1]] = 1
        A_prev[new_edges[:, 1], new_edges[:, 0]] = 1
    return A_prev


# ---------------------------------------------------------------------------
# Backward pass (training only)


@dataclass
class EdgeBatch:
    """Everything one loss evaluation needs, fixed so gradients are checkable."""

    A_t: np.ndarray
    d0: np.ndarray
    dt: np.ndarray
    t: int
    pairs: np.ndarray  # (m, 2)
    targets: np.ndarray  # (m,) in {0, 1}


def edge_nll(params: DenoiserParams, batch: EdgeBatch) -> float:
    """Mean negative log-likelihood of the batch targets under the edge head."""
    if batch.pairs.shape[0] == 0:
        return 0.0
    _, state = node_representations(params, batch.d0, batch.dt, batch.t, batch.A_t)
    b = edge_scores(params, state.Z, batch.pairs)
    logp = log_softmax(b)
    return float(-logp[np.arange(batch.pairs.shape[0]), batch.targets].mean())


def edge_nll_and_grad(
    params: DenoiserParams, batch: EdgeBatch
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and analytic gradients w.r.t. every parameter array."""
    cfg = params.config
    a = params.arrays
    m = batch.pairs.shape[0]
    if m == 0:
        return 0.0, {k: np.zeros_like(v) for k, v in a.items()}

    caches: list[dict] = []
    state0, state = node_representations(
        params, batch.d0, batch.dt, batch.t, batch.A_t, caches
    )
    head_cache: dict = {}
    b = edge_scores(params, state.Z, batch.pairs, head_cache)
    logp = log_softmax(b)
    loss = float(-logp[np.arange(m), batch.targets].mean())

    grads = {k: np.zeros_like(v) for k, v in a.items()}
    n = state.Z.shape[0]
    e = cfg.embed_dim

    # head backward
    dB = np.exp(logp)
    dB[np.arange(m), batch.targets] -= 1.0
    dB /= m
    h = head_cache["h"]
    S = head_cache["S"]
    grads["edge.w2"] += h.T @ dB
    grads["edge.b2"] += dB.sum(axis=0)
    dh = dB @ a["edge.w2"].T
    da1 = dh * (1.0 - h * h)
    grads["edge.w1"] += S.T @ da1
    grads["edge.b1"] += da1.sum(axis=0)
    dS = da1 @ a["edge.w1"].T
    dZ = np.zeros((n, e))
    np.add.at(dZ, batch.pairs[:, 0], dS)
    np.add.at(dZ, batch.pairs[:, 1], dS)

    dH_next = np.zeros((n, e))
    dc_next = np.zeros(e)
    dt_emb = np.zeros(e)
    for l in range(cfg.layers - 1, -1, -1):
        cache = caches[l]
        # Z_out = H_new + c_new
        dH_new = dZ.copy()
        dc_new = dZ.sum(axis=0) + dc_next
        # context MLP (shared weights)
        mct = cache["m"]
        grads["ctx.w2"] += np.outer(mct, dc_new)
        grads["ctx.b2"] += dc_new
        dm = a["ctx.w2"] @ dc_new
        da1c = dm * (1.0 - mct * mct)
        grads["ctx.w1"] += np.outer(cache["u"], da1c)
        grads["ctx.b1"] += da1c
        du = a["ctx.w1"] @ da1c
        dH_new += du[:e] / n
        dc_prev = du[e:]
        dH_new += dH_next
        # GRU backward
        r, z, n_gate = cache["r"], cache["z"], cache["n_gate"]
        H_prev, hg_n = cache["H_prev"], cache["hg_n"]
        dz = dH_new * (H_prev - n_gate)
        dn = dH_new * (1.0 - z)
        dH_prev = dH_new * z
        dn_pre = dn * (1.0 - n_gate * n_gate)
        dr = dn_pre * hg_n
        dhg_n = dn_pre * r
        dz_pre = dz * z * (1.0 - z)
        dr_pre = dr * r * (1.0 - r)
        dxg = np.concatenate([dr_pre, dz_pre, dn_pre], axis=1)
        dhg = np.concatenate([dr_pre, dz_pre, dhg_n], axis=1)
        G = cache["G"]
        grads[f"gru{l}.wx"] += G.T @ dxg
        grads[f"gru{l}.bx"] += dxg.sum(axis=0)
        grads[f"gru{l}.wh"] += H_prev.T @ dhg
        grads[f"gru{l}.bh"] += dhg.sum(axis=0)
        dG = dxg @ a[f"gru{l}.wx"].T
        dH_prev += dhg @ a[f"gru{l}.wh"].T
        # attention backward
        X = cache["X"]
        src, dst = cache["src"], cache["dst"]
        grads[f"gt{l}.ws"] += X.T @ dG
        grads[f"gt{l}.bs"] += dG.sum(axis=0)
        dX = dG @ a[f"gt{l}.ws"].T
        heads, dh_dim = cfg.heads, e // cfg.heads
        dagg = dG.reshape(n, heads, dh_dim)
        dQ = np.zeros((n, heads, dh_dim))
        dK = np.zeros((n, heads, dh_dim))
        dV = np.zeros((n, heads, dh_dim))
        if src.size:
            Q, K, V, alpha = cache["Q"], cache["K"], cache["V"], cache["alpha"]
            dcontrib = dagg[src]  # (E, heads, dh)
            dalpha = (dcontrib * V[dst]).sum(axis=2)
            np.add.at(dV, dst, dcontrib * alpha[:, :, None])
            seg_inner = np.zeros((n, heads))
            np.add.at(seg_inner, src, alpha * dalpha)
            dscores = alpha * (dalpha - seg_inner[src]) / np.sqrt(dh_dim)
            np.add.at(dQ, src, dscores[:, :, None] * K[dst])
            np.add.at(dK, dst, dscores[:, :, None] * Q[src])
        grads[f"gt{l}.wq"] += X.T @ dQ.reshape(n, e)
        grads[f"gt{l}.wk"] += X.T @ dK.reshape(n, e)
        grads[f"gt{l}.wv"] += X.T @ dV.reshape(n, e)
        dX += (
            dQ.reshape(n, e) @ a[f"gt{l}.wq"].T
            + dK.reshape(n, e) @ a[f"gt{l}.wk"].T
            + dV.reshape(n, e) @ a[f"gt{l}.wv"].T
        )
        dZ = dX[:, :e]
        dt_emb += dX[:, e:].sum(axis=0)
        dH_next = dH_prev
        dc_next = dc_prev

    # layer-0 inputs: Z0 feeds both the first layer and c0 = mean(Z0)
    dZ0 = dZ + dc_next / n
    half = e // 2
    dt_idx = np.clip(np.asarray(batch.dt, dtype=np.int64), 0, cfg.max_degree)
    d0_idx = np.clip(np.asarray(batch.d0, dtype=np.int64), 0, cfg.max_degree)
    np.add.at(grads["deg_emb"], dt_idx, dZ0[:, :half])
    np.add.at(grads["deg_emb"], d0_idx, dZ0[:, half:])
    feats = time_features(batch.t, e)
    grads["time_w"] += np.outer(feats, dt_emb)
    grads["time_b"] += dt_emb
    _ = state0
    return loss, grads
