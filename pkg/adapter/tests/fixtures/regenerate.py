"""Rebuild the fixture tensors, config, and golden transcript.

Run from this directory after an intentional protocol or model change::

    python3 regenerate.py

The transcript format is one wire line per file line, prefixed "S " for
server-sent bytes and "C " for client-sent bytes.  Tests replay the C
lines and compare the server's output to the S lines after id
normalization, so regenerating this file is the explicit act of
accepting new wire bytes.
"""

import io
import json
from pathlib import Path

import numpy as np

from multiorder_adapter import build_server, load_config, save_tensor

HERE = Path(__file__).parent


def write_tensors() -> None:
    rng = np.random.default_rng(np.random.SeedSequence(2024, spawn_key=(1,)))
    save_tensor(HERE / "toy0.f32", rng.uniform(-1.0, 1.0, (1, 6, 6)))
    save_tensor(HERE / "toy1.csv", rng.uniform(-1.0, 1.0, (1, 6, 6)))


def write_config() -> None:
    config = {
        "model": {"kind": "toy_conv", "seed": 7, "in_channels": 1,
                  "filters": 8, "classes": 4},
        "g": 3,
        "inputs": {
            "toy0": {"file": "toy0.f32", "target": 2},
            "toy1": {"file": "toy1.csv", "target": 0},
        },
        "score_kind": "logit",
        "baseline": "per-channel-mean",
        "tensor_target": 2,
    }
    (HERE / "adapter.json").write_text(json.dumps(config, indent=2) + "\n",
                                       encoding="utf-8")


def request_lines() -> list[bytes]:
    import base64

    masked = np.zeros((1, 6, 6), dtype="<f4")
    masked[0, 2:4, 2:4] = 1.0
    tensor = base64.b64encode(masked.tobytes()).decode("ascii")
    requests = [
        {"id": 1, "kind": "score", "input_ref": "toy0",
         "masks": ["1ff", "000", "0a5"]},
        {"id": 2, "kind": "score_tensor", "shape": [1, 6, 6], "tensors": [tensor]},
        {"id": 3, "kind": "score", "input_ref": "x9", "masks": ["1ff"]},
    ]
    return [json.dumps(r, separators=(",", ":")).encode("utf-8") + b"\n"
            for r in requests]


def write_transcript() -> None:
    server = build_server(load_config(HERE / "adapter.json"))
    requests = request_lines()
    out = io.BytesIO()
    server.handle_stream(io.BytesIO(b"".join(requests)), out)
    responses = out.getvalue().splitlines(keepends=True)
    assert len(responses) == len(requests) + 1, "one hello plus one response per request"
    lines = [b"S " + responses[0]]
    for req, resp in zip(requests, responses[1:]):
        lines.append(b"C " + req)
        lines.append(b"S " + resp)
    (HERE / "golden.jsonl").write_bytes(b"".join(lines))


if __name__ == "__main__":
    write_tensors()
    write_config()
    write_transcript()
    print("fixtures regenerated in", HERE)
