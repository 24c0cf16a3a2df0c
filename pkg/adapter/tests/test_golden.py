"""Golden transcript conformance.

The fixture file pins the adapter's wire bytes: a recorded hello plus
three request/response pairs (a mask batch, a tensor-mode score, and an
unknown-ref error).  The test replays the recorded client lines against
a fresh server and byte-compares the output after id normalization, so
any change to framing, field order, float formatting, or error text
fails until fixtures/regenerate.py is run on purpose.
"""

import io
import json

from conftest import FIXTURES


def _verdict(name: str, ok: bool, detail: str = "") -> None:
    state = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[acceptance] {name}: {state}{suffix}")
    assert ok, f"{name}{suffix}"


def _normalize(lines: list[bytes]) -> list[bytes]:
    """Re-serialize with ids replaced by their per-stream ordinal."""
    out = []
    ordinal = 0
    for raw in lines:
        obj = json.loads(raw)
        if isinstance(obj.get("id"), int):
            ordinal += 1
            obj["id"] = ordinal
        out.append(json.dumps(obj, separators=(",", ":")).encode("utf-8") + b"\n")
    return out


def read_transcript() -> tuple[list[bytes], list[bytes]]:
    sent, expected = [], []
    for line in (FIXTURES / "golden.jsonl").read_bytes().splitlines(keepends=True):
        if line.startswith(b"C "):
            sent.append(line[2:])
        elif line.startswith(b"S "):
            expected.append(line[2:])
        else:
            raise AssertionError(f"unlabelled transcript line {line!r}")
    return sent, expected


def test_transcript_shape():
    sent, expected = read_transcript()
    assert len(sent) == 3, "three recorded request/response pairs"
    assert len(expected) == 4, "hello plus one response per request"
    assert json.loads(expected[0])["kind"] == "hello"
    assert "error" in json.loads(expected[3]), "the third pair pins the error path"


def test_golden_transcript_conformance(fixture_server):
    sent, expected = read_transcript()
    out = io.BytesIO()
    fixture_server.handle_stream(io.BytesIO(b"".join(sent)), out)
    got = out.getvalue().splitlines(keepends=True)
    ok = _normalize(got) == _normalize(expected)
    detail = f"{len(expected)} server lines byte-identical"
    if not ok:
        for g, e in zip(_normalize(got), _normalize(expected)):
            if g != e:
                detail = f"first mismatch: got {g!r}, expected {e!r}"
                break
        else:
            detail = f"line count {len(got)} != {len(expected)}"
    _verdict("protocol golden-transcript conformance", ok, detail)
