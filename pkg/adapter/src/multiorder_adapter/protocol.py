"""The wire protocol session, server side.

Line-delimited UTF-8 JSON, server speaks first.  The hello line declares
protocol version, player count, score kind, the preloaded input refs,
and that this endpoint handles one request at a time::

    {"kind": "hello", "version": 1, "n": 9, "score_kind": "logit",
     "input_refs": ["toy0"], "concurrent": false}
    {"id": 1, "kind": "score", "input_ref": "toy0", "masks": ["1ff"]}
    {"id": 1, "scores": [2.0625]}
    {"id": 2, "kind": "score_tensor", "shape": [1, 6, 6],
     "tensors": ["<base64 little-endian float32>"]}
    {"id": 2, "scores": [0.5]}
    {"id": 3, "error": "unknown input_ref 'x9'"}

Request ids must be strictly increasing integers; every id is answered
exactly once.  A bad request gets an error response with the id echoed
when one can be parsed, and the session keeps going either way.  In
score mode the hex mask selects grid cells and this server masks the
preloaded tensor itself; in tensor mode the peer already masked and the
tensors arrive as base64 little-endian float32.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import BadMask
from .masking import Baseline, GridSpec, masked_batch
from .models import scores_from_logits

PROTOCOL_VERSION = 1


def members_from_hex(n: int, text: str) -> tuple[int, ...]:
    """Decode a hex coalition mask; bit k of the integer is player k."""
    width = (n + 3) // 4
    if not isinstance(text, str) or len(text) != width:
        got = len(text) if isinstance(text, str) else type(text).__name__
        raise BadMask(f"hex mask must have {width} digits for n={n}, got {got}")
    try:
        bits = int(text, 16)
    except ValueError:
        raise BadMask(f"mask {text!r} is not hexadecimal")
    if bits >> n:
        raise BadMask(f"mask {text!r} has bits above player {n - 1}")
    members = []
    while bits:
        low = bits & -bits
        members.append(low.bit_length() - 1)
        bits ^= low
    return tuple(members)


def decode_tensor(payload: str, shape: Sequence[int]) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(payload), dtype="<f4")
    return raw.reshape(tuple(shape)).astype(np.float64)


@dataclass(frozen=True)
class LoadedInput:
    """A preloaded sample: its tensor and the class this sample scores."""

    tensor: np.ndarray
    target: int


class AdapterServer:
    """One protocol endpoint over a fixed model, grid, and input set."""

    def __init__(self, model, spec: GridSpec, baseline: Baseline,
                 inputs: Mapping[str, LoadedInput], score_kind: str,
                 tensor_target: int = 0):
        self.model = model
        self.spec = spec
        self.baseline = baseline
        self.inputs = dict(inputs)
        self.score_kind = score_kind
        self.tensor_target = tensor_target
        self.requests_served = 0

    def hello(self) -> dict:
        return {
            "kind": "hello",
            "version": PROTOCOL_VERSION,
            "n": self.spec.n,
            "score_kind": self.score_kind,
            "input_refs": list(self.inputs),
            "concurrent": False,
        }

    def _answer(self, request) -> dict:
        rid = request.get("id") if isinstance(request, dict) else None
        if not isinstance(rid, int) or isinstance(rid, bool):
            return {"id": None, "error": "request id missing or not an integer"}
        kind = request.get("kind")
        try:
            if kind == "score":
                ref = request.get("input_ref")
                if ref not in self.inputs:
                    return {"id": rid, "error": f"unknown input_ref {ref!r}"}
                masks = request.get("masks")
                if not isinstance(masks, list):
                    return {"id": rid, "error": "masks must be a list of hex strings"}
                entry = self.inputs[ref]
                member_sets = [members_from_hex(self.spec.n, m) for m in masks]
                batch = masked_batch(entry.tensor, member_sets, self.spec, self.baseline)
                scores = scores_from_logits(
                    self.model.logits(batch), entry.target, self.score_kind
                )
            elif kind == "score_tensor":
                shape = request.get("shape")
                payloads = request.get("tensors")
                if not isinstance(shape, list) or not isinstance(payloads, list):
                    return {"id": rid, "error": "score_tensor needs shape and tensors"}
                batch = np.stack([decode_tensor(p, shape) for p in payloads])
                if batch.ndim == 3:
                    batch = batch[:, None, :, :]
                scores = scores_from_logits(
                    self.model.logits(batch), self.tensor_target, self.score_kind
                )
            else:
                return {"id": rid, "error": f"unknown request kind {kind!r}"}
        except Exception as exc:
            return {"id": rid, "error": f"{type(exc).__name__}: {exc}"}
        return {"id": rid, "scores": [float(s) for s in scores]}

    def handle_stream(self, rfile, wfile) -> None:
        """Serve one session: read request lines until EOF."""

        def emit(message):
            wfile.write((json.dumps(message, separators=(",", ":")) + "\n").encode("utf-8"))
            wfile.flush()

        emit(self.hello())
        last_id = 0
        for line in rfile:
            if not line.strip():
                continue
            try:
                request = json.loads(line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                emit({"id": None, "error": f"undecodable request line: {exc}"})
                continue
            response = self._answer(request)
            rid = response.get("id")
            if isinstance(rid, int):
                if rid <= last_id:
                    response = {"id": rid, "error": f"ids must increase; already saw {last_id}"}
                else:
                    last_id = rid
            self.requests_served += 1
            emit(response)
