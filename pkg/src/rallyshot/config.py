"""Run configuration: JSON config file, flag overrides, and the run manifest.

Precedence is flags > file > defaults. The manifest records, for every run,
the effective configuration, the seed, input file hashes, and tool versions;
the timestamp is omitted under deterministic mode so reruns are byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .backbone import BackboneConfig
from .classifier import ClassifierConfig
from .errors import ConfigError, ParseError
from .tracker import TrackerConfig

CONFIG_ENV_VAR = "RALLYSHOT_CONFIG"


@dataclasses.dataclass(frozen=True)
class RunConfig:
    tracker: TrackerConfig = dataclasses.field(default_factory=TrackerConfig)
    backbone: BackboneConfig = dataclasses.field(default_factory=BackboneConfig)
    classifier: ClassifierConfig = dataclasses.field(default_factory=ClassifierConfig)
    threshold: float = 0.5
    stride: int = 1
    suppress: bool = False
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {"tracker": TrackerConfig, "backbone": BackboneConfig,
             "classifier": ClassifierConfig}


def load_config_file(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config document must be a JSON object")
    return obj


def build_run_config(file_values: dict | None = None, **overrides) -> RunConfig:
    """Merge defaults, config-file values, and explicit overrides.

    Overrides use flat names: top-level fields directly, section fields as
    e.g. ``tracker.reassign_radius``. Unknown keys are configuration errors.
    """
    merged: dict = {name: {} for name in _SECTIONS}
    top: dict = {}

    def apply(key: str, value):
        if "." in key:
            section, field_name = key.split(".", 1)
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section {section!r}")
            if field_name not in {f.name for f in dataclasses.fields(_SECTIONS[section])}:
                raise ConfigError(f"unknown config key {key!r}")
            merged[section][field_name] = value
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            for sub, v in value.items():
                apply(f"{key}.{sub}", v)
        else:
            if key not in {f.name for f in dataclasses.fields(RunConfig)}:
                raise ConfigError(f"unknown config key {key!r}")
            top[key] = value

    for key, value in (file_values or {}).items():
        apply(key, value)
    for key, value in overrides.items():
        if value is not None:
            apply(key, value)

    seed = top.get("seed", 0)
    for name in _SECTIONS:
        merged[name].setdefault("seed", seed)
        if "channels" in merged[name]:
            merged[name]["channels"] = tuple(merged[name]["channels"])
    try:
        return RunConfig(
            tracker=TrackerConfig(**{k: v for k, v in merged["tracker"].items()
                                     if k != "seed"}),
            backbone=BackboneConfig(**merged["backbone"]),
            classifier=ClassifierConfig(**merged["classifier"]),
            **top,
        )
    except TypeError as exc:
        raise ConfigError(f"bad configuration: {exc}") from exc


def sha256_file(path) -> str:
    """Digest of a file, or of the names+contents of a directory tree."""
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for sub in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(str(sub.relative_to(path)).encode())
            h.update(bytes.fromhex(sha256_file(sub)))
        return h.hexdigest()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command: str, cfg: RunConfig,
                   inputs: dict[str, str], outputs: list[str],
                   deterministic: bool) -> None:
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "inputs": {name: sha256_file(p) for name, p in sorted(inputs.items())},
        "outputs": sorted(outputs),
        "versions": {
            "rallyshot": __version__,
            "numpy": np.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
    }
    if not deterministic:
        manifest["timestamp"] = datetime.now(timezone.utc).isoformat()
    path = Path(out_dir) / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
                    encoding="utf-8")


def default_config_path() -> str | None:
    return os.environ.get(CONFIG_ENV_VAR)
