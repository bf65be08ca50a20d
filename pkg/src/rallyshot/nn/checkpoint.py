"""Versioned binary checkpoint container.

Layout: magic string, format version, then a named parameter table
(name, shape, float64 little-endian values). A JSON sidecar at
<path>.json carries the architecture hyperparameters and the hash of the
training configuration.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DataError
from .layers import Parameter

_MAGIC = b"RSNNCKPT"
_VERSION = 1


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_checkpoint(path, params: Sequence[Parameter], arch: dict, cfg_hash: str) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(params)))
        for p in params:
            name = p.name.encode("utf-8")
            fh.write(struct.pack("<I", len(name)))
            fh.write(name)
            fh.write(struct.pack("<I", p.value.ndim))
            fh.write(struct.pack(f"<{p.value.ndim}I", *p.value.shape))
            fh.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
    sidecar = {"arch": arch, "config_hash": cfg_hash, "format_version": _VERSION}
    Path(str(path) + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise DataError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        table: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            n = int(np.prod(shape)) if ndim else 1
            raw = fh.read(n * 8)
            table[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    sidecar_path = Path(str(path) + ".json")
    if not sidecar_path.exists():
        raise DataError(f"{sidecar_path}: checkpoint sidecar missing")
    sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    return table, sidecar


def restore(params: Sequence[Parameter], table: dict[str, np.ndarray]) -> None:
    """Copy checkpoint values into an existing parameter list by name."""
    for p in params:
        if p.name not in table:
            raise DataError(f"checkpoint is missing parameter {p.name!r}")
        if table[p.name].shape != p.value.shape:
            raise DataError(f"checkpoint parameter {p.name!r} has shape "
                            f"{table[p.name].shape}, expected {p.value.shape}")
        p.value[...] = table[p.name]
