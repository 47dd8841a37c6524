"""Run configuration: one JSON tree shared by every CLI subcommand.

Values can be overridden on the command line with repeated
`--set section.key=value` flags; override values parse as JSON when
possible and fall back to plain strings. The resolved tree is echoed into a
manifest next to every run's outputs so runs can be reproduced exactly.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import json
import os

import numpy as np

DATA_ROOT_ENV = "GRAPHPURE_DATA"


class ConfigError(ValueError):
    """Configuration is missing, malformed or inconsistent."""


def load_config(path: str | Path) -> dict[str, Any]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        config = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    return config


def apply_overrides(config: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply dotted key=value overrides; values parse as JSON where possible."""
    out = json.loads(json.dumps(config))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.split(".")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} crosses a non-object value")
        node[keys[-1]] = value
    return out


def resolve_data_path(path: str | Path) -> Path:
    """Relative data paths resolve against $GRAPHPURE_DATA when it is set."""
    p = Path(path)
    root = os.environ.get(DATA_ROOT_ENV)
    if not p.is_absolute() and root:
        return Path(root) / p
    return p


def require(config: dict[str, Any], section: str) -> dict[str, Any]:
    value = config.get(section)
    if not isinstance(value, dict):
        raise ConfigError(f"config is missing the {section!r} section")
    return value


def write_manifest(out_dir: str | Path, resolved: dict[str, Any],
                   command: str, seed: int | None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "seed": seed,
        "config": resolved,
        "versions": {"graphpure": "0.1.0", "numpy": np.__version__},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path
