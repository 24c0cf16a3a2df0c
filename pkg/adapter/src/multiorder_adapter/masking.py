"""Server-side occlusion masking.

The engine's hex masks select grid cells of the input; absent cells are
replaced with a baseline before the model sees the tensor.  The cell
layout and baseline semantics here deliberately duplicate the engine's
(row-major g x g cells, floor-sized with the last row/column absorbing
the remainder, or ceil-sized clipped cells under edge replication).  The
two implementations are cross-checked by test, not by code sharing, so a
drift in either side shows up as a masking-equivalence failure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BadGrid, ConfigError, ShapeMismatch
from .tensors import as_tensor, load_tensor

# the engine refuses games above this player count, so a larger grid
# could never be probed anyway
MAX_PLAYERS = 1024

PAD_POLICIES = ("none", "edge-replicate")
BASELINE_MODES = ("zero", "per-channel-mean", "constant", "reference-tensor")


def _edges(extent: int, g: int, pad: str) -> tuple[tuple[int, int], ...]:
    if pad == "none":
        size = extent // g
        return tuple(
            (r * size, (r + 1) * size if r < g - 1 else extent) for r in range(g)
        )
    size = -(-extent // g)
    spans = tuple((r * size, min((r + 1) * size, extent)) for r in range(g))
    if any(lo >= hi for lo, hi in spans):
        raise BadGrid(f"g={g} over extent {extent} leaves empty ceil-sized cells")
    return spans


@dataclass(frozen=True)
class GridSpec:
    """Row-major g x g cell layout over a fixed tensor shape."""

    g: int
    shape: tuple[int, int, int]
    rows: tuple[tuple[int, int], ...]
    cols: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return self.g * self.g

    def cell_box(self, cell: int) -> tuple[int, int, int, int]:
        if not 0 <= cell < self.n:
            raise BadGrid(f"cell {cell} out of range for g={self.g}")
        r, c = divmod(cell, self.g)
        return (*self.rows[r], *self.cols[c])

    def pixel_mask(self, members: Iterable[int]) -> np.ndarray:
        """Boolean (height, width) mask of pixels owned by present cells."""
        keep = np.zeros(self.shape[1:], dtype=bool)
        for cell in members:
            r0, r1, c0, c1 = self.cell_box(cell)
            keep[r0:r1, c0:c1] = True
        return keep


def partition(shape: Sequence[int], g: int, pad: str = "none") -> GridSpec:
    """Split a tensor shape into a g x g player grid."""
    dims = tuple(int(d) for d in shape)
    if len(dims) == 2:
        dims = (1, *dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ShapeMismatch(f"shape must be (channels, height, width), got {tuple(shape)}")
    c, h, w = dims
    if pad not in PAD_POLICIES:
        raise BadGrid(f"pad must be one of {PAD_POLICIES}, got {pad!r}")
    if g < 1:
        raise BadGrid(f"grid size must be >= 1, got {g}")
    if g > min(h, w):
        raise BadGrid(f"g={g} exceeds spatial dims {h}x{w}")
    if g * g > MAX_PLAYERS:
        raise BadGrid(f"g={g} gives {g * g} players, above the {MAX_PLAYERS} limit")
    return GridSpec(
        g=g,
        shape=(c, h, w),
        rows=_edges(h, g, pad),
        cols=_edges(w, g, pad),
    )


@dataclass(frozen=True)
class Baseline:
    """What absent players' pixels are replaced with."""

    mode: str
    values: np.ndarray | None = None

    def render(self, x: np.ndarray) -> np.ndarray:
        """The full replacement tensor for input x."""
        if self.mode == "zero":
            return np.zeros_like(x)
        if self.mode == "per-channel-mean":
            return np.broadcast_to(x.mean(axis=(1, 2))[:, None, None], x.shape)
        if self.mode == "constant":
            vals = self.values
            if vals.size == 1:
                return np.full_like(x, vals[0])
            if vals.size != x.shape[0]:
                raise ShapeMismatch(
                    f"constant baseline has {vals.size} values for {x.shape[0]} channels"
                )
            return np.broadcast_to(vals[:, None, None], x.shape)
        if self.mode == "reference-tensor":
            if self.values.shape != x.shape:
                raise ShapeMismatch(
                    f"reference baseline shape {self.values.shape} != input {x.shape}"
                )
            return self.values
        raise ConfigError(f"unknown baseline mode {self.mode!r}", field="baseline")


def parse_baseline(spec, base_dir=None) -> Baseline:
    """Build a Baseline from its config form.

    Accepted forms: "zero", "per-channel-mean", {"constant": scalar or
    per-channel list}, {"reference": tensor path}.  Reference paths
    resolve against ``base_dir``.
    """
    if spec in ("zero", "per-channel-mean"):
        return Baseline(spec)
    if isinstance(spec, dict) and set(spec) == {"constant"}:
        values = np.atleast_1d(np.asarray(spec["constant"], dtype=np.float64))
        if values.ndim != 1 or values.size == 0 or not np.all(np.isfinite(values)):
            raise ConfigError(
                f"constant baseline needs a finite scalar or list, got {spec['constant']!r}",
                field="baseline",
            )
        return Baseline("constant", values)
    if isinstance(spec, dict) and set(spec) == {"reference"}:
        path = spec["reference"]
        if base_dir is not None:
            from pathlib import Path

            path = Path(base_dir) / path
        return Baseline("reference-tensor", load_tensor(path))
    raise ConfigError(f"unknown baseline spec {spec!r}", field="baseline")


def apply_mask(x, members: Iterable[int], spec: GridSpec, baseline: Baseline) -> np.ndarray:
    """Keep pixels of present cells, replace the rest per the baseline."""
    x = as_tensor(x)
    if x.shape != spec.shape:
        raise ShapeMismatch(f"input shape {x.shape} != grid shape {spec.shape}")
    keep = spec.pixel_mask(members)
    return np.where(keep[None, :, :], x, baseline.render(x))


def masked_batch(
    x: np.ndarray, member_sets: Sequence[Iterable[int]], spec: GridSpec, baseline: Baseline
) -> np.ndarray:
    """Stack one masked copy of x per member set, rendering the baseline once."""
    x = as_tensor(x)
    if x.shape != spec.shape:
        raise ShapeMismatch(f"input shape {x.shape} != grid shape {spec.shape}")
    fill = baseline.render(x)
    out = np.empty((len(member_sets), *x.shape), dtype=np.float64)
    for k, members in enumerate(member_sets):
        keep = spec.pixel_mask(members)
        out[k] = np.where(keep[None, :, :], x, fill)
    return out
