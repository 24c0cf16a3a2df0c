"""Grid-masked image games: tensors in, coalition value function out.

An image is partitioned into g x g cells; each cell is one player.
Evaluating a coalition means keeping the pixels of present cells,
replacing the rest with a baseline, and scoring the masked tensor with a
user-supplied model.  Tensors are (channels, height, width), row-major.
"""

from __future__ import annotations

import hashlib
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .coalition import MAX_PLAYERS, Coalition
from .errors import BadGrid, ConfigError, ScorerFailure, ShapeMismatch
from .games import GameEvaluator

PAD_POLICIES = ("none", "edge-replicate")
SCORE_KINDS = ("logit", "log-probability", "log-odds")


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


def _edges(extent: int, g: int, pad: str) -> list[tuple[int, int]]:
    if pad == "none":
        # floor-sized cells; the last one absorbs the remainder
        size = extent // g
        return [(r * size, (r + 1) * size if r < g - 1 else extent) for r in range(g)]
    # nominal ceil-sized cells, trailing cell clipped to the image;
    # no synthetic pixels are ever materialized
    size = -(-extent // g)
    spans = [(r * size, min((r + 1) * size, extent)) for r in range(g)]
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
        """(row_start, row_stop, col_start, col_stop) of one cell."""
        if not 0 <= cell < self.n:
            raise BadGrid(f"cell {cell} out of range for g={self.g}")
        r, c = divmod(cell, self.g)
        return (*self.rows[r], *self.cols[c])

    def pixel_mask(self, coalition: Coalition) -> np.ndarray:
        """Boolean (height, width) mask of pixels owned by present cells."""
        if coalition.n != self.n:
            raise BadGrid(f"coalition over {coalition.n} players, grid has {self.n}")
        keep = np.zeros(self.shape[1:], dtype=bool)
        for cell in coalition.members():
            r0, r1, c0, c1 = self.cell_box(cell)
            keep[r0:r1, c0:c1] = True
        return keep


def partition(shape: Sequence[int], g: int, pad: str = "none") -> GridSpec:
    """Split a tensor shape into a g x g player grid.

    With pad="none" cells are floor-sized and the last row/column absorbs
    any remainder; "edge-replicate" uses ceil-sized cells with the
    trailing ones clipped to the image.
    """
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
        rows=tuple(_edges(h, g, pad)),
        cols=tuple(_edges(w, g, pad)),
    )


@dataclass(frozen=True)
class BaselinePolicy:
    """What absent players' pixels are replaced with."""

    mode: str
    values: np.ndarray | None = None

    @classmethod
    def zero(cls) -> "BaselinePolicy":
        return cls("zero")

    @classmethod
    def per_channel_mean(cls) -> "BaselinePolicy":
        return cls("per-channel-mean")

    @classmethod
    def constant(cls, values) -> "BaselinePolicy":
        return cls("constant", np.atleast_1d(np.asarray(values, dtype=np.float64)))

    @classmethod
    def reference(cls, tensor) -> "BaselinePolicy":
        return cls("reference-tensor", as_tensor(tensor))

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

    @property
    def descriptor(self) -> str:
        if self.mode in ("zero", "per-channel-mean"):
            return self.mode
        digest = hashlib.sha256(np.ascontiguousarray(self.values).tobytes()).hexdigest()[:12]
        return f"{self.mode}:{digest}"


def apply_mask(x, coalition: Coalition, spec: GridSpec, baseline: BaselinePolicy) -> np.ndarray:
    """Keep pixels of present cells, replace the rest per the baseline."""
    x = as_tensor(x)
    if x.shape != spec.shape:
        raise ShapeMismatch(f"input shape {x.shape} != grid shape {spec.shape}")
    keep = spec.pixel_mask(coalition)
    return np.where(keep[None, :, :], x, baseline.render(x))


class ModelScorer(ABC):
    """Contract for a scalar scoring model over input tensors.

    Implementations must be deterministic and batch-size independent
    within 1e-6.  ``score_kind`` records what the scalar is (logit,
    log-probability, or log-odds) so downstream metadata can carry it.
    """

    target: int = 0
    score_kind: str = "logit"
    concurrency_safe: bool = True

    @property
    @abstractmethod
    def descriptor(self) -> str: ...

    @abstractmethod
    def score_batch(self, tensors: Sequence[np.ndarray]) -> list[float]: ...


class ConstantScorer(ModelScorer):
    """Ignores the input entirely; useful as a nullity fixture."""

    def __init__(self, value: float = 0.7, target: int = 0, score_kind: str = "logit"):
        self.value = float(value)
        self.target = target
        self.score_kind = score_kind

    @property
    def descriptor(self) -> str:
        return f"constant:{self.value!r}"

    def score_batch(self, tensors: Sequence[np.ndarray]) -> list[float]:
        return [self.value] * len(tensors)


class LinearScorer(ModelScorer):
    """Dot product with fixed weights; induces a purely additive game."""

    def __init__(self, weights, bias: float = 0.0, target: int = 0, score_kind: str = "logit"):
        self.weights = as_tensor(weights)
        self.bias = float(bias)
        self.target = target
        self.score_kind = score_kind

    @classmethod
    def seeded(cls, shape: tuple[int, int, int], seed: int) -> "LinearScorer":
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
        return cls(rng.uniform(-1.0, 1.0, shape))

    @property
    def descriptor(self) -> str:
        digest = hashlib.sha256(self.weights.tobytes()).hexdigest()[:12]
        return f"linear:w={digest}:b={self.bias!r}"

    def score_batch(self, tensors: Sequence[np.ndarray]) -> list[float]:
        return [float(np.dot(self.weights.ravel(), as_tensor(t).ravel()) + self.bias) for t in tensors]


class BilinearScorer(ModelScorer):
    """Linear scorer plus one product of two pixels.

    When the two pixels sit in different grid cells the product is the
    only interaction in the induced game, concentrated on that cell pair.
    """

    def __init__(self, weights, pos_a: tuple[int, int, int], pos_b: tuple[int, int, int],
                 coef: float = 1.0, target: int = 0, score_kind: str = "logit"):
        self.linear = LinearScorer(weights)
        self.pos_a = tuple(pos_a)
        self.pos_b = tuple(pos_b)
        self.coef = float(coef)
        self.target = target
        self.score_kind = score_kind

    @property
    def descriptor(self) -> str:
        return f"bilinear[{self.linear.descriptor}:a={self.pos_a}:b={self.pos_b}:c={self.coef!r}]"

    def score_batch(self, tensors: Sequence[np.ndarray]) -> list[float]:
        out = []
        for t, lin in zip(tensors, self.linear.score_batch(tensors)):
            t = as_tensor(t)
            out.append(lin + self.coef * t[self.pos_a] * t[self.pos_b])
        return out


class ImageGame(GameEvaluator):
    """Coalition game induced by masking one input and scoring it."""

    def __init__(self, x, scorer: ModelScorer, spec: GridSpec, baseline: BaselinePolicy):
        self.x = as_tensor(x)
        if self.x.shape != spec.shape:
            raise ShapeMismatch(f"input shape {self.x.shape} != grid shape {spec.shape}")
        if scorer.score_kind not in SCORE_KINDS:
            raise ConfigError(
                f"score_kind must be one of {SCORE_KINDS}, got {scorer.score_kind!r}",
                field="score_kind",
            )
        baseline.render(self.x)  # fail fast on shape problems
        self.scorer = scorer
        self.spec = spec
        self.baseline = baseline
        self.n = spec.n
        self.concurrency_safe = scorer.concurrency_safe

    @property
    def descriptor(self) -> str:
        digest = hashlib.sha256(self.x.tobytes()).hexdigest()[:12]
        return (
            f"image:x={digest}:scorer={self.scorer.descriptor}"
            f":target={self.scorer.target}:kind={self.scorer.score_kind}"
            f":baseline={self.baseline.descriptor}:g={self.spec.g}"
        )

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        masked = [apply_mask(self.x, c, self.spec, self.baseline) for c in coalitions]
        try:
            scores = self.scorer.score_batch(masked)
        except Exception as exc:
            raise ScorerFailure(f"scorer failed on a {len(masked)}-tensor batch: {exc}") from exc
        return [float(s) for s in scores]


def make_image_game(x, scorer: ModelScorer, spec: GridSpec,
                    baseline: BaselinePolicy | None = None) -> ImageGame:
    """Assemble the masked-input game; default baseline is the input's
    per-channel mean."""
    return ImageGame(x, scorer, spec, baseline or BaselinePolicy.per_channel_mean())


# ---------------------------------------------------------------------------
# Tensor file formats: raw little-endian float32 with a JSON sidecar, or
# CSV for single-channel toys.  Layouts are documented in docs/formats.md.

SIDECAR_FORMAT = "raw-f32-le"


def save_tensor(path: str | Path, x) -> None:
    """Write a tensor as raw little-endian float32 plus a JSON sidecar.

    The sidecar lives at ``<path>.json`` and records shape and layout.
    CSV output (single-channel only) is chosen by a .csv suffix.
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


def load_tensor(path: str | Path) -> np.ndarray:
    """Read a tensor saved by save_tensor (raw+sidecar or CSV)."""
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
