"""Command-line driver: train, attack, purify, eval and bench subcommands.

Every subcommand reads one JSON config (overridable with --set key=value),
writes its artifacts under --out, and leaves a manifest sufficient to
reproduce the run. Exit codes: 0 success, 1 runtime failure, 2 usage error,
3 configuration error.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import Any

import argparse
import json
import sys

import numpy as np

from . import attacks, evaluator, purifier, trainer
from .config import (
    ConfigError,
    apply_overrides,
    load_config,
    require,
    resolve_data_path,
    write_manifest,
)
from .denoiser import DenoiserConfig, load_checkpoint
from .diffusion import build_schedule
from .evaluator import GCNConfig
from .graphs import Graph, load_graph, random_split, save_graph, write_edge_list
from .purifier import PurifyConfig
from .synthetic import sbm_graph
from .trainer import TrainConfig


def _load_dataset(config: dict[str, Any]) -> Graph:
    data = require(config, "data")
    if "synthetic" in data:
        return sbm_graph(**data["synthetic"])
    for key in ("edges", "features", "labels"):
        if key not in data:
            raise ConfigError(f"data section is missing {key!r}")
        if not resolve_data_path(data[key]).exists():
            raise ConfigError(f"data file not found: {resolve_data_path(data[key])}")
    return load_graph(
        resolve_data_path(data["edges"]),
        resolve_data_path(data["features"]),
        resolve_data_path(data["labels"]),
        name=data.get("name"),
    )


def _schedule(config: dict[str, Any]):
    section = config.get("schedule", {})
    return build_schedule(int(section.get("T", 64)), float(section.get("p", 0.0)))


def _denoiser_config(config: dict[str, Any], graph: Graph) -> DenoiserConfig:
    section = dict(config.get("denoiser", {}))
    section.setdefault("max_degree", int(graph.adjacency.sum(axis=1).max()) + 8)
    return DenoiserConfig(**section)


def _purify_config(config: dict[str, Any]) -> PurifyConfig:
    section = dict(require(config, "purify"))
    section.pop("checkpoint", None)
    if "lambda" in section:
        section["lam"] = section.pop("lambda")
    if "targets" in section:
        section["target_nodes"] = tuple(section.pop("targets"))
    return PurifyConfig(**section)


def _attack_spec(config: dict[str, Any]) -> attacks.AttackSpec:
    section = dict(require(config, "attack"))
    if "targets" in section:
        section["targets"] = tuple(section["targets"])
    return attacks.AttackSpec(**section)


def cmd_train(config: dict[str, Any], out: Path, seed: int | None) -> None:
    graph = _load_dataset(config)
    section = dict(config.get("train", {}))
    if seed is not None:
        section["seed"] = seed
    train_config = TrainConfig(**section)
    params = trainer.train(
        graph,
        train_config,
        denoiser_config=_denoiser_config(config, graph),
        checkpoint_dir=out,
        curve_path=out / "training_curve.csv",
    )
    del params
    print(f"trained {train_config.steps} steps -> {out / 'params_final.npz'}")


def cmd_attack(config: dict[str, Any], out: Path, seed: int | None) -> None:
    graph = _load_dataset(config)
    spec = _attack_spec(config)
    if seed is not None:
        spec = replace(spec, seed=seed)
    attacked = attacks.run_attack(graph, spec)
    write_edge_list(attacked.adjacency, out / "attacked_edges.tsv")
    attacks.write_attack_manifest(spec, attacked, out / "attack_manifest.json")
    print(
        f"attacked graph: {attacked.num_edges} edges "
        f"({attacked.achieved_perturbations} perturbations)"
    )


def cmd_purify(config: dict[str, Any], out: Path, seed: int | None) -> None:
    graph = _load_dataset(config)
    section = require(config, "purify")
    checkpoint = section.get("checkpoint")
    if not checkpoint:
        raise ConfigError("purify needs purify.checkpoint pointing at trained params")
    if not Path(checkpoint).exists():
        raise ConfigError(f"checkpoint not found: {checkpoint}")
    params = load_checkpoint(checkpoint)
    purify_config = _purify_config(config)
    if seed is not None:
        purify_config = replace(purify_config, seed=seed)
    attacked_path = config.get("data", {}).get("attacked_edges")
    if attacked_path:
        attacked = attacks.load_perturbed(resolve_data_path(attacked_path), graph)
    else:
        attacked = purifier.AttackedGraph(
            graph.adjacency.copy(), graph.features, graph.labels, name=graph.name
        )
    sched = _schedule(config)
    purified, report = purifier.purify(attacked, params, sched, purify_config)
    save_graph(purified, out / "purified_edges.tsv")
    (out / "purify_report.json").write_text(report.to_json())
    print(
        f"purified: {report.edges_attacked} -> {report.edges_final} edges, "
        f"restarts={report.restarts}, nfcr_removed={report.nfcr_removed}"
    )


def cmd_eval(config: dict[str, Any], out: Path, seed: int | None) -> None:
    graph = _load_dataset(config)
    eval_edges = config.get("data", {}).get("eval_edges")
    if eval_edges:
        adjacency = attacks.load_perturbed(resolve_data_path(eval_edges), graph).adjacency
        graph = graph.with_adjacency(adjacency)
    section = dict(config.get("gcn", {}))
    if seed is not None:
        section["seed"] = seed
    gcn_config = GCNConfig(**section)
    split = random_split(graph, int(config.get("split_seed", 0)))
    classifier = evaluator.train_gcn(graph, split, gcn_config)
    acc = evaluator.evaluate(classifier, graph, split)
    (out / "eval_result.json").write_text(
        json.dumps({"dataset": graph.name, "test_accuracy": acc}, indent=2)
    )
    print(f"test accuracy: {acc:.4f}")


def cmd_bench(config: dict[str, Any], out: Path, seed: int | None) -> None:
    graph = _load_dataset(config)
    bench = require(config, "bench")
    split = random_split(graph, int(config.get("split_seed", 0)))
    master_seed = seed if seed is not None else int(config.get("master_seed", 0))

    grid: list[attacks.AttackSpec | None] = []
    for entry in bench.get("grid", []):
        if entry is None or entry == "clean":
            grid.append(None)
        else:
            if "targets" in entry:
                entry = dict(entry, targets=tuple(entry["targets"]))
            grid.append(attacks.AttackSpec(**entry))
    defenses: list[tuple[str, PurifyConfig | None]] = []
    for entry in bench.get("defenses", [{"name": "none"}]):
        entry = dict(entry)
        name = entry.pop("name")
        if not entry:
            defenses.append((name, None))
        else:
            if "lambda" in entry:
                entry["lam"] = entry.pop("lambda")
            if "targets" in entry:
                entry["target_nodes"] = tuple(entry.pop("targets"))
            defenses.append((name, PurifyConfig(**entry)))

    params = None
    sched = None
    if any(cfg is not None for _, cfg in defenses):
        checkpoint = bench.get("checkpoint")
        if not checkpoint:
            raise ConfigError("bench with defenses needs bench.checkpoint")
        if not Path(checkpoint).exists():
            raise ConfigError(f"checkpoint not found: {checkpoint}")
        params = load_checkpoint(checkpoint)
        sched = _schedule(config)

    reports = evaluator.benchmark(
        graph,
        split,
        grid,
        defenses,
        denoiser_params=params,
        sched=sched,
        gcn_config=GCNConfig(**config.get("gcn", {})),
        runs=int(bench.get("runs", 10)),
        master_seed=master_seed,
        out_dir=out,
        eval_nodes=bench.get("eval_nodes"),
    )
    for rep in reports:
        print(
            f"{rep.attack_kind} level={rep.level:g} defense={rep.defense}: "
            f"{rep.mean:.4f} +/- {rep.std:.4f} ({len(rep.accuracies)} runs)"
        )


COMMANDS = {
    "train": cmd_train,
    "attack": cmd_attack,
    "purify": cmd_purify,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphpure",
        description="Train, attack, purify and evaluate graphs "
                    "with the edge-diffusion purifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON config file")
        cmd.add_argument("--set", dest="overrides", action="append", default=[],
                         metavar="KEY.PATH=VALUE", help="override a config value")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the command's primary seed")
        cmd.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        config = apply_overrides(config, args.overrides)
        out = Path(args.out) if args.out else Path(config.get("out_dir", "runs")) / args.command
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(out, config, args.command, args.seed)
        COMMANDS[args.command](config, out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
