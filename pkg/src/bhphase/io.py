"""File formats: CSV with metadata header, JSON configs, run manifests.

CSV layout: ``#``-prefixed ``key = value`` metadata lines, then one header row
of column names, then data rows.  Floats are written with ``repr`` so parsing
an emitted file reproduces the in-memory values exactly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def _format_value(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, columns, meta=None):
    """Write named columns (equal-length 1-d arrays) with a metadata block."""
    path = Path(path)
    columns = [np.asarray(c) for c in columns]
    if len(header) != len(columns):
        raise ValueError("header and column count mismatch")
    n = columns[0].shape[0]
    if any(c.shape != (n,) for c in columns):
        raise ValueError("columns must be equal-length 1-d arrays")
    lines = []
    for key, value in (meta or {}).items():
        lines.append(f"# {key} = {value}")
    lines.append(",".join(header))
    for i in range(n):
        lines.append(",".join(_format_value(c[i]) for c in columns))
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def read_csv(path):
    """Inverse of write_csv: returns (meta, header, columns dict)."""
    path = Path(path)
    meta, header, rows = {}, None, []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if header is None:
            header = [h.strip() for h in line.split(",")]
            continue
        rows.append([float(v) for v in line.split(",")])
    if header is None:
        raise ValueError(f"{path} contains no header row")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    columns = {name: data[:, k].copy() for k, name in enumerate(header)}
    return meta, header, columns


def load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def save_config(cfg: dict, path):
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, config: dict, seed, outputs, versions=None):
    """Record everything needed to reproduce a run byte-for-byte."""
    manifest = {
        "config": config,
        "config_sha256": config_hash(config),
        "master_seed": seed,
        "outputs": {str(Path(p).name): file_sha256(p) for p in outputs},
        "versions": versions or {},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
