"""Model loading and the bundled toy classifier.

A model is anything with ``logits(batch) -> (B, classes)`` over float
(B, C, H, W) batches.  The bundled toy is a small convolutional net in
plain numpy: deterministic for a given seed and batch, float64
throughout, and batch-size independent to float64 rounding (reduction
order can shift the last ulp), orders of magnitude inside the protocol
tolerances.  Real classifiers come in through the ``entrypoint`` loader,
which imports a user factory and hands it the config's args plus the
device hint.
"""

from __future__ import annotations

from importlib import import_module

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ModelLoadFailure, ShapeMismatch

MODEL_KINDS = ("toy_conv", "entrypoint")
SCORE_KINDS = ("logit", "log-probability", "log-odds")


class ToyConvModel:
    """3x3 valid convolution, relu, global mean pool, dense head."""

    def __init__(self, seed: int = 0, in_channels: int = 1, filters: int = 8,
                 classes: int = 4):
        if in_channels < 1 or filters < 1 or classes < 2:
            raise ConfigError(
                f"toy_conv needs in_channels >= 1, filters >= 1, classes >= 2; "
                f"got {in_channels}, {filters}, {classes}",
                field="model",
            )
        self.seed = seed
        self.in_channels = in_channels
        self.filters = filters
        self.classes = classes
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(21,)))
        self.kernel = rng.normal(0.0, 1.0 / np.sqrt(9 * in_channels),
                                 (filters, in_channels, 3, 3))
        self.conv_bias = rng.normal(0.0, 0.1, filters)
        self.dense = rng.normal(0.0, 1.0 / np.sqrt(filters), (filters, classes))
        self.dense_bias = rng.normal(0.0, 0.1, classes)

    @property
    def descriptor(self) -> str:
        return (
            f"toy_conv:seed={self.seed}:c={self.in_channels}"
            f":f={self.filters}:k={self.classes}"
        )

    def logits(self, batch) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 4 or batch.shape[1] != self.in_channels:
            raise ShapeMismatch(
                f"toy_conv takes (batch, {self.in_channels}, height, width), "
                f"got {batch.shape}"
            )
        if batch.shape[2] < 3 or batch.shape[3] < 3:
            raise ShapeMismatch(f"spatial dims must be >= 3x3, got {batch.shape[2:]}")
        windows = sliding_window_view(batch, (3, 3), axis=(2, 3))
        feature = np.einsum("bchwij,fcij->bfhw", windows, self.kernel)
        feature += self.conv_bias[None, :, None, None]
        pooled = np.maximum(feature, 0.0).mean(axis=(2, 3))
        return pooled @ self.dense + self.dense_bias


class _CallableModel:
    """Wraps a bare batch -> logits callable from an entrypoint."""

    in_channels = None

    def __init__(self, fn, descriptor: str):
        self._fn = fn
        self.descriptor = descriptor

    def logits(self, batch) -> np.ndarray:
        return np.asarray(self._fn(batch), dtype=np.float64)


def load_model(spec, device: str = "cpu"):
    """Construct the model named by a loader spec.

    ``{"kind": "toy_conv", ...}`` builds the bundled net; ``{"kind":
    "entrypoint", "target": "pkg.mod:factory", "args": {...}}`` imports
    the factory and calls it as ``factory(device=device, **args)``.  The
    factory may return a model object or a bare batch -> logits callable.
    """
    if not isinstance(spec, dict) or spec.get("kind") not in MODEL_KINDS:
        raise ConfigError(
            f"model.kind must be one of {MODEL_KINDS}, got "
            f"{spec.get('kind') if isinstance(spec, dict) else spec!r}",
            field="model",
        )
    if spec["kind"] == "toy_conv":
        known = {"kind", "seed", "in_channels", "filters", "classes"}
        unknown = set(spec) - known
        if unknown:
            raise ConfigError(f"unknown toy_conv fields {sorted(unknown)}", field="model")
        return ToyConvModel(
            seed=int(spec.get("seed", 0)),
            in_channels=int(spec.get("in_channels", 1)),
            filters=int(spec.get("filters", 8)),
            classes=int(spec.get("classes", 4)),
        )
    target = spec.get("target")
    if not isinstance(target, str) or ":" not in target:
        raise ConfigError(
            f"entrypoint target must look like 'package.module:factory', got {target!r}",
            field="model",
        )
    args = spec.get("args", {})
    if not isinstance(args, dict):
        raise ConfigError(f"entrypoint args must be an object, got {args!r}", field="model")
    module_name, _, attr = target.partition(":")
    try:
        factory = getattr(import_module(module_name), attr)
        model = factory(device=device, **args)
    except Exception as exc:
        raise ModelLoadFailure(f"entrypoint {target!r} failed: {exc}") from exc
    if not hasattr(model, "logits"):
        if not callable(model):
            raise ModelLoadFailure(
                f"entrypoint {target!r} returned {type(model).__name__}, which has no "
                "logits method and is not callable"
            )
        model = _CallableModel(model, descriptor=f"entrypoint:{target}")
    return model


def scores_from_logits(logits: np.ndarray, target: int, score_kind: str) -> np.ndarray:
    """Collapse (B, classes) logits to the configured per-item scalar.

    logit is the raw class output; log-probability subtracts the batch
    row's logsumexp; log-odds is the log probability ratio of the target
    class against everything else.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeMismatch(f"model must return (batch, classes) logits, got {z.shape}")
    if not 0 <= target < z.shape[1]:
        raise ConfigError(
            f"target {target} out of range for {z.shape[1]} classes", field="target"
        )
    picked = z[:, target]
    if score_kind == "logit":
        return picked
    top = z.max(axis=1)
    if score_kind == "log-probability":
        return picked - (top + np.log(np.exp(z - top[:, None]).sum(axis=1)))
    if score_kind == "log-odds":
        rest = np.delete(z, target, axis=1)
        top = rest.max(axis=1)
        return picked - (top + np.log(np.exp(rest - top[:, None]).sum(axis=1)))
    raise ConfigError(f"score_kind must be one of {SCORE_KINDS}, got {score_kind!r}",
                      field="score_kind")
