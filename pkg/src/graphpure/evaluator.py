"""Downstream two-layer graph-convolution classifier and benchmark harness.

The classifier is the standard symmetric-normalized GCN trained with
cross-entropy on the train mask and early stopping on validation accuracy.
The benchmark harness runs (attack level x defense) cells, repeats each one
over seeded runs, and writes per-run and aggregate CSVs plus plots.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .attacks import AttackSpec, run_attack
from .denoiser import DenoiserParams
from .diffusion import Schedule
from .graphs import Graph, Split
from .nnops import Adam, log_softmax
from .purifier import AttackedGraph, PurifyConfig, purify


@dataclass(frozen=True)
class GCNConfig:
    hidden_dim: int = 16
    epochs: int = 200
    lr: float = 0.01
    weight_decay: float = 5e-4
    patience: int = 30
    seed: int = 0
    normalize_features: bool = True

    def __post_init__(self) -> None:
        if self.hidden_dim < 1 or self.epochs < 0:
            raise ValueError("hidden_dim must be >= 1 and epochs >= 0")


def normalize_adjacency(A: np.ndarray) -> np.ndarray:
    """Symmetric normalization with self-loops: D^{-1/2} (A + I) D^{-1/2}."""
    A_hat = np.asarray(A, dtype=np.float64) + np.eye(A.shape[0])
    inv_sqrt = 1.0 / np.sqrt(A_hat.sum(axis=1))
    return A_hat * inv_sqrt[:, None] * inv_sqrt[None, :]


def _row_normalize(X: np.ndarray) -> np.ndarray:
    norms = np.abs(X).sum(axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return X / norms


class GCNParams:
    """Trained classifier weights; prediction rebuilds propagation per graph."""

    def __init__(self, config: GCNConfig, arrays: dict[str, np.ndarray],
                 num_classes: int):
        self.config = config
        self.arrays = arrays
        self.num_classes = num_classes

    def logits(self, graph: Graph) -> np.ndarray:
        A_hat = sp.csr_matrix(normalize_adjacency(graph.adjacency))
        X = graph.features
        if self.config.normalize_features:
            X = _row_normalize(X)
        a = self.arrays
        H1 = np.maximum(A_hat @ (X @ a["w1"]) + a["b1"], 0.0)
        return A_hat @ (H1 @ a["w2"]) + a["b2"]

    def predict(self, graph: Graph) -> np.ndarray:
        return self.logits(graph).argmax(axis=1)


def _init_gcn(config: GCNConfig, in_dim: int, num_classes: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    h = config.hidden_dim
    lim1 = np.sqrt(6.0 / (in_dim + h))
    lim2 = np.sqrt(6.0 / (h + num_classes))
    return {
        "w1": rng.uniform(-lim1, lim1, size=(in_dim, h)),
        "b1": np.zeros(h),
        "w2": rng.uniform(-lim2, lim2, size=(h, num_classes)),
        "b2": np.zeros(num_classes),
    }


def train_gcn(graph: Graph, split: Split, config: GCNConfig) -> GCNParams:
    """Full-batch training with Adam; keeps the best-validation weights."""
    num_classes = graph.num_classes
    arrays = _init_gcn(config, graph.features.shape[1], num_classes)
    A_hat = sp.csr_matrix(normalize_adjacency(graph.adjacency))
    X = graph.features
    if config.normalize_features:
        X = _row_normalize(X)
    y = graph.labels
    train_idx = np.flatnonzero(split.train_mask)
    val_idx = np.flatnonzero(split.val_mask)
    optimizer = Adam(lr=config.lr)
    best_arrays = {k: v.copy() for k, v in arrays.items()}
    best_val = -1.0
    stale = 0

    for _ in range(config.epochs):
        U = X @ arrays["w1"]
        V = A_hat @ U + arrays["b1"]
        H1 = np.maximum(V, 0.0)
        logits = A_hat @ (H1 @ arrays["w2"]) + arrays["b2"]
        logp = log_softmax(logits[train_idx])
        loss = -logp[np.arange(train_idx.size), y[train_idx]].mean()
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite classifier loss")

        dlogits = np.zeros_like(logits)
        P = np.exp(logp)
        P[np.arange(train_idx.size), y[train_idx]] -= 1.0
        dlogits[train_idx] = P / train_idx.size
        dprop = A_hat @ dlogits
        grads = {
            "w2": H1.T @ dprop + config.weight_decay * arrays["w2"],
            "b2": dlogits.sum(axis=0),
        }
        dH1 = dprop @ arrays["w2"].T
        dV = dH1 * (V > 0)
        dU = A_hat @ dV
        grads["w1"] = X.T @ dU + config.weight_decay * arrays["w1"]
        grads["b1"] = dV.sum(axis=0)
        optimizer.step(arrays, grads)

        val_pred = (A_hat @ (np.maximum(A_hat @ (X @ arrays["w1"]) + arrays["b1"], 0.0)
                             @ arrays["w2"]) + arrays["b2"]).argmax(axis=1)
        val_acc = (val_pred[val_idx] == y[val_idx]).mean() if val_idx.size else 0.0
        if val_acc > best_val:
            best_val = val_acc
            best_arrays = {k: v.copy() for k, v in arrays.items()}
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
    return GCNParams(config, best_arrays, num_classes)


def evaluate(classifier, graph: Graph, split: Split,
             nodes: Sequence[int] | None = None) -> float:
    """Accuracy on the test mask, or on an explicit node list when given."""
    pred = classifier.predict(graph)
    if nodes is not None:
        idx = np.asarray(nodes, dtype=np.int64)
    else:
        idx = np.flatnonzero(split.test_mask)
    if idx.size == 0:
        return float("nan")
    return float((pred[idx] == graph.labels[idx]).mean())


# ---------------------------------------------------------------------------
# Benchmark harness


@dataclass
class EvalReport:
    dataset: str
    attack_kind: str
    level: float
    defense: str
    accuracies: list[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies)) if self.accuracies else float("nan")


def _attack_level(spec: AttackSpec | None) -> float:
    if spec is None:
        return 0.0
    if spec.ptb_rate is not None:
        return float(spec.ptb_rate)
    if spec.ptb_num is not None:
        return float(spec.ptb_num)
    return 0.0


def _cell_seeds(master_seed: int, cell: int, run: int) -> tuple[int, int, int]:
    state = np.random.SeedSequence([master_seed, cell, run]).generate_state(3)
    return int(state[0]), int(state[1]), int(state[2])


def benchmark(
    graph: Graph,
    split: Split,
    attack_grid: Sequence[AttackSpec | None],
    defenses: Sequence[tuple[str, PurifyConfig | None]],
    denoiser_params: DenoiserParams | None = None,
    sched: Schedule | None = None,
    gcn_config: GCNConfig = GCNConfig(),
    runs: int = 10,
    master_seed: int = 0,
    out_dir: str | Path | None = None,
    eval_nodes: Sequence[int] | None = None,
) -> list[EvalReport]:
    """Run every (attack level x defense) cell over seeded repetitions.

    A `None` entry in the attack grid is the clean scenario. Purification
    requires `denoiser_params` and `sched`. Failures are recorded per row
    and the harness keeps going.
    """
    reports: list[EvalReport] = []
    rows: list[str] = []
    failures: dict[tuple[str, float, str], str] = {}
    for a_idx, spec in enumerate(attack_grid):
        for d_idx, (defense_name, purify_config) in enumerate(defenses):
            if purify_config is not None and (denoiser_params is None or sched is None):
                raise ValueError("defended cells need denoiser params and a schedule")
            cell = a_idx * len(defenses) + d_idx
            kind = spec.kind if spec is not None else "clean"
            level = _attack_level(spec)
            report = EvalReport(graph.name, kind, level, defense_name)
            for run in range(runs):
                attack_seed, purify_seed, gcn_seed = _cell_seeds(master_seed, cell, run)
                try:
                    if spec is not None:
                        attacked = run_attack(graph, replace(spec, seed=attack_seed))
                    else:
                        attacked = AttackedGraph(
                            graph.adjacency.copy(), graph.features, graph.labels,
                            name=graph.name,
                        )
                    if purify_config is not None:
                        cfg = replace(purify_config, seed=purify_seed)
                        eval_graph, _ = purify(attacked, denoiser_params, sched, cfg)
                    else:
                        eval_graph = Graph(attacked.adjacency, graph.features,
                                           graph.labels, name=attacked.name)
                    gcn = train_gcn(eval_graph, split, replace(gcn_config, seed=gcn_seed))
                    acc = evaluate(gcn, eval_graph, split, nodes=eval_nodes)
                    report.accuracies.append(acc)
                    rows.append(
                        f"{graph.name},{kind},{level:g},{defense_name},{run},{acc:.10f}"
                    )
                except Exception as exc:  # keep the grid going
                    failures[(kind, level, defense_name)] = f"run {run}: {exc}"
                    rows.append(
                        f"{graph.name},{kind},{level:g},{defense_name},{run},error:{exc}"
                    )
            reports.append(report)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "runs.csv").write_text(
            "dataset,attack_kind,level,defense,run,accuracy\n" + "\n".join(rows) + "\n"
        )
        agg_lines = ["dataset,attack_kind,level,defense,runs,mean,std,error"]
        for rep in reports:
            err = failures.get((rep.attack_kind, rep.level, rep.defense), "")
            agg_lines.append(
                f"{rep.dataset},{rep.attack_kind},{rep.level:g},{rep.defense},"
                f"{len(rep.accuracies)},{rep.mean:.10f},{rep.std:.10f},{err}"
            )
        (out / "aggregate.csv").write_text("\n".join(agg_lines) + "\n")
        _plot_accuracy_vs_level(reports, out / "accuracy_vs_level.png")
    return reports


def _plot_accuracy_vs_level(reports: Sequence[EvalReport], path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    series: dict[str, list[tuple[float, float, float]]] = {}
    for rep in reports:
        series.setdefault(f"{rep.attack_kind}/{rep.defense}", []).append(
            (rep.level, rep.mean, rep.std)
        )
    for label, points in series.items():
        points.sort()
        levels = [p[0] for p in points]
        means = [p[1] for p in points]
        stds = [p[2] for p in points]
        ax.errorbar(levels, means, yerr=stds, marker="o", label=label, capsize=3)
    ax.set_xlabel("perturbation level")
    ax.set_ylabel("accuracy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def mu_sweep(
    graph: Graph,
    split: Split,
    spec: AttackSpec,
    base_config: PurifyConfig,
    denoiser_params: DenoiserParams,
    sched: Schedule,
    mu_values: Sequence[float] = (0.70, 0.75, 0.80, 0.85, 0.90, 0.95),
    gcn_config: GCNConfig = GCNConfig(),
    runs: int = 3,
    master_seed: int = 0,
    out_dir: str | Path | None = None,
    eval_nodes: Sequence[int] | None = None,
) -> list[tuple[float, float, float]]:
    """Accuracy as a function of the target size ratio; returns (mu, mean, std)."""
    results: list[tuple[float, float, float]] = []
    for m_idx, mu in enumerate(mu_values):
        accs = []
        for run in range(runs):
            attack_seed, purify_seed, gcn_seed = _cell_seeds(master_seed, m_idx, run)
            attacked = run_attack(graph, replace(spec, seed=attack_seed))
            cfg = replace(base_config, mu=mu, seed=purify_seed)
            eval_graph, _ = purify(attacked, denoiser_params, sched, cfg)
            gcn = train_gcn(eval_graph, split, replace(gcn_config, seed=gcn_seed))
            accs.append(evaluate(gcn, eval_graph, split, nodes=eval_nodes))
        results.append((float(mu), float(np.mean(accs)), float(np.std(accs))))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["mu,mean,std"] + [
            f"{mu:g},{mean:.10f},{std:.10f}" for mu, mean, std in results
        ]
        (out / "mu_sweep.csv").write_text("\n".join(lines) + "\n")
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.errorbar([r[0] for r in results], [r[1] for r in results],
                    yerr=[r[2] for r in results], marker="o", capsize=3)
        ax.set_xlabel("graph size ratio")
        ax.set_ylabel("accuracy")
        fig.tight_layout()
        fig.savefig(out / "accuracy_vs_mu.png", dpi=120)
        plt.close(fig)
    return results
