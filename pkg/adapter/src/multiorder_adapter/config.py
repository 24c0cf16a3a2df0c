"""Adapter configuration: one JSON file describing what gets served.

The file names a model loader spec, the input manifest (sample id to
tensor file plus that sample's target label), the grid that turns the
tensor into players, and the masking baseline.  Relative paths resolve
against the config file's own directory so a config travels with its
tensors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import ConfigError
from .masking import PAD_POLICIES, Baseline, parse_baseline
from .models import SCORE_KINDS


@dataclass(frozen=True)
class InputEntry:
    """One served sample: where its tensor lives and which class to score."""

    file: str
    target: int


@dataclass(frozen=True)
class AdapterConfig:
    model: Mapping[str, object]
    g: int
    inputs: Mapping[str, InputEntry]
    score_kind: str = "logit"
    pad: str = "none"
    baseline: Baseline = field(default_factory=lambda: Baseline("per-channel-mean"))
    device: str = "cpu"
    tensor_target: int = 0


_FIELDS = (
    "model", "g", "inputs", "score_kind", "pad", "baseline", "device", "tensor_target",
)


def _field_error(name: str, message: str) -> ConfigError:
    return ConfigError(message, field=name)


def parse_config(text: str, source: str = "<config>",
                 base_dir: str | Path = ".") -> AdapterConfig:
    """Parse and validate an adapter config; errors carry field names."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}")
    if not isinstance(payload, dict):
        raise ConfigError(f"{source}: config must be a JSON object")
    unknown = set(payload) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"{source}: unknown fields {sorted(unknown)}")

    model = payload.get("model")
    if not isinstance(model, dict):
        raise _field_error("model", f"expected a loader spec object, got {model!r}")
    g = payload.get("g")
    if not isinstance(g, int) or isinstance(g, bool) or g < 1:
        raise _field_error("g", f"expected a positive integer, got {g!r}")

    raw_inputs = payload.get("inputs")
    if not isinstance(raw_inputs, dict) or not raw_inputs:
        raise _field_error("inputs", "expected a non-empty object of sample entries")
    base = Path(base_dir)
    inputs: dict[str, InputEntry] = {}
    for sid, entry in raw_inputs.items():
        if not isinstance(entry, dict) or set(entry) - {"file", "target"}:
            raise _field_error(
                f"inputs.{sid}", f"expected {{file, target}}, got {entry!r}"
            )
        file = entry.get("file")
        if not isinstance(file, str) or not file:
            raise _field_error(f"inputs.{sid}.file", f"expected a path, got {file!r}")
        target = entry.get("target", 0)
        if not isinstance(target, int) or isinstance(target, bool) or target < 0:
            raise _field_error(
                f"inputs.{sid}.target", f"expected a class index, got {target!r}"
            )
        inputs[sid] = InputEntry(file=str(base / file), target=target)

    score_kind = payload.get("score_kind", "logit")
    if score_kind not in SCORE_KINDS:
        raise _field_error(
            "score_kind", f"expected one of {SCORE_KINDS}, got {score_kind!r}"
        )
    pad = payload.get("pad", "none")
    if pad not in PAD_POLICIES:
        raise _field_error("pad", f"expected one of {PAD_POLICIES}, got {pad!r}")
    baseline = parse_baseline(payload.get("baseline", "per-channel-mean"), base_dir=base)
    device = payload.get("device", "cpu")
    if not isinstance(device, str) or not device:
        raise _field_error("device", f"expected a device string, got {device!r}")
    tensor_target = payload.get("tensor_target", 0)
    if not isinstance(tensor_target, int) or isinstance(tensor_target, bool) or tensor_target < 0:
        raise _field_error(
            "tensor_target", f"expected a class index, got {tensor_target!r}"
        )

    return AdapterConfig(
        model=model,
        g=g,
        inputs=inputs,
        score_kind=score_kind,
        pad=pad,
        baseline=baseline,
        device=device,
        tensor_target=tensor_target,
    )


def load_config(path: str | Path) -> AdapterConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path), base_dir=path.parent)
