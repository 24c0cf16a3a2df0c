import io
import json
from pathlib import Path

import pytest

from multiorder_adapter import build_server, load_config

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def fixture_config():
    return load_config(FIXTURES / "adapter.json")


@pytest.fixture
def fixture_server(fixture_config):
    return build_server(fixture_config)


def run_session(server, requests) -> list[dict]:
    """Feed request lines through one session; returns hello + responses.

    Each request may be a dict (serialized compactly) or raw bytes for
    deliberately malformed lines.
    """
    lines = []
    for r in requests:
        if isinstance(r, (bytes, bytearray)):
            lines.append(bytes(r))
        else:
            lines.append(json.dumps(r, separators=(",", ":")).encode("utf-8"))
    out = io.BytesIO()
    server.handle_stream(io.BytesIO(b"\n".join(lines) + b"\n" if lines else b""), out)
    return [json.loads(line) for line in out.getvalue().splitlines()]
