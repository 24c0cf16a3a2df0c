"""Tensor file loading for the formats the analysis engine writes.

Two layouts exist: raw little-endian float32 in C order with a JSON
sidecar at ``<path>.json`` recording shape, and CSV for single-channel
toys.  Both are documented byte-for-byte in the engine's docs/formats.md;
this module reimplements the readers from that document so the adapter
stays import-independent of the engine.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeMismatch

SIDECAR_FORMAT = "raw-f32-le"


def as_tensor(x) -> np.ndarray:
    """Validate and convert to a (channels, height, width) float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise ShapeMismatch(f"tensor must be (channels, height, width), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatch("tensor contains non-finite values")
    return arr


def load_tensor(path: str | Path) -> np.ndarray:
    """Read a raw+sidecar or CSV tensor file."""
    path = Path(path)
    if path.suffix == ".csv":
        rows = [
            [float(v) for v in line.split(",")]
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise ShapeMismatch(f"ragged or empty CSV tensor in {path}")
        return as_tensor(np.asarray(rows, dtype=np.float64))
    sidecar_path = Path(str(path) + ".json")
    if not sidecar_path.exists():
        raise ConfigError(f"missing tensor sidecar {sidecar_path}", field="tensor")
    try:
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        fmt, shape = sidecar["format"], tuple(int(d) for d in sidecar["shape"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed tensor sidecar {sidecar_path}: {exc}", field="tensor")
    if fmt != SIDECAR_FORMAT:
        raise ConfigError(f"unknown tensor format {fmt!r} in {sidecar_path}", field="tensor")
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size != math.prod(shape):
        raise ShapeMismatch(
            f"{path} holds {raw.size} values, sidecar shape {shape} needs {math.prod(shape)}"
        )
    return as_tensor(raw.reshape(shape).astype(np.float64))


def save_tensor(path: str | Path, x) -> None:
    """Write a tensor in the raw+sidecar layout (CSV via a .csv suffix).

    Only tests and fixture regeneration need a writer; served inputs are
    read-only.
    """
    path = Path(path)
    x = as_tensor(x)
    if path.suffix == ".csv":
        if x.shape[0] != 1:
            raise ShapeMismatch(f"CSV holds single-channel tensors, got {x.shape[0]} channels")
        rows = [",".join(f"{v:.17g}" for v in row) for row in x[0]]
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        return
    path.write_bytes(x.astype("<f4").tobytes(order="C"))
    sidecar = {
        "format": SIDECAR_FORMAT,
        "shape": list(x.shape),
        "order": "chw-row-major",
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
