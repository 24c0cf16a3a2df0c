"""Wire protocol client and built-in scoring server.

The protocol is line-delimited UTF-8 JSON.  The server speaks first with
a hello line declaring its protocol version, player count, score kind,
and preloaded input refs; after that the client sends requests with
strictly increasing ids and the server answers each id exactly once:

    {"kind": "hello", "version": 1, "n": 16, "score_kind": "logit",
     "input_refs": ["builtin"]}
    {"id": 1, "kind": "score", "input_ref": "builtin", "masks": ["00ff"]}
    {"id": 1, "scores": [0.125]}
    {"id": 2, "kind": "score_tensor", "shape": [16],
     "tensors": ["<base64 little-endian float32>"]}
    {"id": 2, "scores": [0.5]}
    {"id": 3, "error": "unknown input_ref 'x9'"}

Coalitions cross the wire as hex bitmasks (128 bytes at n=1024, versus
megabytes of pixels); tensor mode exists for servers that cannot preload
inputs.  Responses may arrive out of order on TCP and are re-associated
by id.  Scores ride as JSON numbers, which round-trip 64-bit floats
exactly.
"""

from __future__ import annotations

import base64
import json
import os
import queue
import shlex
import socket
import subprocess
import sys
import threading
from collections import deque
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .coalition import Coalition, mask_matrix
from .errors import (
    BindFailure,
    BridgeTimeout,
    ConfigError,
    HandshakeMismatch,
    RemoteError,
)
from .games import GameEvaluator
from .imagegame import SCORE_KINDS, ModelScorer

PROTOCOL_VERSION = 1
ENDPOINT_ENV = "MULTIORDER_ENDPOINT"
TIMEOUT_ENV = "MULTIORDER_TIMEOUT"
BUILTIN_HIDDEN = 64


@dataclass(frozen=True)
class BridgeConfig:
    """How to reach a scoring endpoint.

    ``transport`` is "stdio:<command line>" (spawn a subprocess, talk
    over its stdin/stdout) or "tcp:<host>:<port>".  The MULTIORDER_ENDPOINT
    and MULTIORDER_TIMEOUT environment variables override transport and
    timeout at connect time.
    """

    transport: str
    batch_size: int = 1024
    timeout: float = 30.0
    protocol_version: int = PROTOCOL_VERSION
    pipeline_depth: int = 4

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1", field="batch_size")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive", field="timeout")
        if self.pipeline_depth < 1:
            raise ConfigError("pipeline_depth must be >= 1", field="pipeline_depth")
        kind = self.transport.split(":", 1)[0]
        if kind not in ("stdio", "tcp"):
            raise ConfigError(
                f"transport must start with 'stdio:' or 'tcp:', got {self.transport!r}",
                field="transport",
            )


def _resolved(config: BridgeConfig) -> BridgeConfig:
    endpoint = os.environ.get(ENDPOINT_ENV)
    timeout = os.environ.get(TIMEOUT_ENV)
    if endpoint:
        config = replace(config, transport=endpoint)
    if timeout:
        try:
            config = replace(config, timeout=float(timeout))
        except ValueError:
            raise ConfigError(f"{TIMEOUT_ENV}={timeout!r} is not a number", field="timeout")
    return config


def encode_tensor(x: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(x, dtype="<f4").tobytes()).decode("ascii")


def decode_tensor(payload: str, shape: Sequence[int]) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(payload), dtype="<f4")
    return raw.reshape(tuple(shape)).astype(np.float64)


class _LineChannel:
    """Reads newline-delimited messages on a background thread so every
    receive honours the session timeout regardless of transport.

    ``unblock`` forces the blocked read to return (socket shutdown,
    process termination); it must run before the file objects close,
    otherwise close deadlocks against the reading thread.
    """

    def __init__(self, rfile, wfile, timeout: float, unblock=None, cleanup=None):
        self._rfile = rfile
        self._wfile = wfile
        self._timeout = timeout
        self._unblock = unblock
        self._cleanup = cleanup
        self._queue: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        try:
            for line in self._rfile:
                self._queue.put(line)
        except (OSError, ValueError):
            pass
        self._queue.put(None)

    def send(self, message: dict) -> None:
        data = (json.dumps(message, separators=(",", ":")) + "\n").encode("utf-8")
        try:
            self._wfile.write(data)
            self._wfile.flush()
        except (OSError, ValueError, BrokenPipeError) as exc:
            raise RemoteError(f"connection lost while sending: {exc}") from exc

    def recv(self) -> dict:
        try:
            line = self._queue.get(timeout=self._timeout)
        except queue.Empty:
            raise BridgeTimeout(f"no response within {self._timeout}s")
        if line is None:
            raise RemoteError("connection closed by remote end")
        try:
            message = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise RemoteError(f"undecodable line from remote end: {exc}") from exc
        if not isinstance(message, dict):
            raise RemoteError(f"expected a JSON object per line, got {type(message).__name__}")
        return message

    def close(self):
        try:
            self._wfile.close()
        except (OSError, ValueError):
            pass
        if self._unblock is not None:
            try:
                self._unblock()
            except OSError:
                pass
        self._reader.join(timeout=5)
        try:
            self._rfile.close()
        except (OSError, ValueError):
            pass
        if self._cleanup is not None:
            self._cleanup()


def _open_channel(config: BridgeConfig) -> _LineChannel:
    kind, _, rest = config.transport.partition(":")
    if kind == "stdio":
        argv = shlex.split(rest)
        if not argv:
            raise ConfigError("stdio transport needs a command line", field="transport")
        try:
            proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as exc:
            raise RemoteError(f"failed to spawn {argv[0]!r}: {exc}") from exc

        def reap():
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

        return _LineChannel(proc.stdout, proc.stdin, config.timeout,
                            unblock=proc.terminate, cleanup=reap)
    host, _, port = rest.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"tcp transport needs host:port, got {rest!r}", field="transport")
    try:
        sock = socket.create_connection((host, int(port)), timeout=config.timeout)
    except OSError as exc:
        raise RemoteError(f"cannot connect to {host}:{port}: {exc}") from exc
    # receive timeouts are the channel's job; a lingering socket timeout
    # would race it and turn slow responses into spurious EOFs
    sock.settimeout(None)
    return _LineChannel(
        sock.makefile("rb"), sock.makefile("wb"), config.timeout,
        unblock=lambda: sock.shutdown(socket.SHUT_RDWR), cleanup=sock.close,
    )


class BridgeSession:
    """One protocol session: handshake state plus pipelined requests."""

    def __init__(self, config: BridgeConfig):
        config = _resolved(config)
        self.config = config
        self._channel = _open_channel(config)
        self._next_id = 1
        self._readahead: dict[int, dict] = {}
        self._lock = threading.Lock()
        hello = self._channel.recv()
        if hello.get("kind") != "hello":
            raise HandshakeMismatch(f"expected hello, got {hello!r}")
        if hello.get("version") != config.protocol_version:
            raise HandshakeMismatch(
                f"protocol version {hello.get('version')} != {config.protocol_version}"
            )
        self.n = int(hello["n"])
        self.score_kind = hello.get("score_kind", "logit")
        self.input_refs = tuple(hello.get("input_refs", ()))
        self.hello = hello

    def close(self):
        self._channel.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _send(self, payload: dict) -> int:
        rid = self._next_id
        self._next_id += 1
        self._channel.send({"id": rid, **payload})
        return rid

    def _recv(self, rid: int) -> dict:
        while True:
            if rid in self._readahead:
                return self._readahead.pop(rid)
            message = self._channel.recv()
            got = message.get("id")
            if got == rid:
                return message
            if isinstance(got, int):
                self._readahead[got] = message
            else:
                raise RemoteError(f"response with unusable id: {message!r}")

    def _scores_from(self, response: dict, expected: int) -> list[float]:
        if "error" in response:
            raise RemoteError(str(response["error"]))
        scores = response.get("scores")
        if not isinstance(scores, list) or len(scores) != expected:
            raise RemoteError(
                f"expected {expected} scores, got {scores!r}"
            )
        return [float(s) for s in scores]

    def _pipelined(self, chunks: list[tuple[dict, int]]) -> list[float]:
        out: list[float] = []
        pending: deque[tuple[int, int]] = deque()
        i = 0
        with self._lock:
            while i < len(chunks) or pending:
                while i < len(chunks) and len(pending) < self.config.pipeline_depth:
                    payload, count = chunks[i]
                    pending.append((self._send(payload), count))
                    i += 1
                rid, count = pending.popleft()
                out.extend(self._scores_from(self._recv(rid), count))
        return out

    def score_masks(self, input_ref: str, coalitions: Sequence[Coalition]) -> list[float]:
        if self.input_refs and input_ref not in self.input_refs:
            raise ConfigError(
                f"input_ref {input_ref!r} not served; remote offers {self.input_refs}",
                field="input_ref",
            )
        size = self.config.batch_size
        chunks = []
        for lo in range(0, len(coalitions), size):
            chunk = coalitions[lo : lo + size]
            chunks.append((
                {
                    "kind": "score",
                    "input_ref": input_ref,
                    "masks": [c.to_hex() for c in chunk],
                },
                len(chunk),
            ))
        return self._pipelined(chunks)

    def score_tensors(self, tensors: Sequence[np.ndarray]) -> list[float]:
        if not tensors:
            return []
        shape = list(np.asarray(tensors[0]).shape)
        size = self.config.batch_size
        chunks = []
        for lo in range(0, len(tensors), size):
            chunk = tensors[lo : lo + size]
            chunks.append((
                {
                    "kind": "score_tensor",
                    "shape": shape,
                    "tensors": [encode_tensor(t) for t in chunk],
                },
                len(chunk),
            ))
        return self._pipelined(chunks)

    def game(self, input_ref: str) -> "RemoteGame":
        return RemoteGame(self, input_ref)


def connect(config: BridgeConfig, n: int | None = None) -> BridgeSession:
    """Open a session and validate the handshake.

    Pass the local player count to reject endpoints serving a different
    universe up front.
    """
    session = BridgeSession(config)
    if n is not None and session.n != n:
        session.close()
        raise HandshakeMismatch(f"remote serves n={session.n}, local analysis has n={n}")
    return session


class RemoteGame(GameEvaluator):
    """GameEvaluator whose scores come from a bridge session."""

    concurrency_safe = False  # one session, one in-flight window

    def __init__(self, session: BridgeSession, input_ref: str):
        self.session = session
        self.input_ref = input_ref
        self.n = session.n

    @property
    def descriptor(self) -> str:
        return (
            f"remote:{self.session.config.transport}:ref={self.input_ref}"
            f":kind={self.session.score_kind}:n={self.n}"
        )

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        return self.session.score_masks(self.input_ref, coalitions)


class RemoteScorer(ModelScorer):
    """ModelScorer that ships engine-masked tensors over the wire.

    This is tensor mode: the engine applies the baseline locally and the
    server only runs its model on what arrives.
    """

    concurrency_safe = False

    def __init__(self, session: BridgeSession, target: int = 0):
        self.session = session
        self.target = target
        self.score_kind = session.score_kind

    @property
    def descriptor(self) -> str:
        return f"remote_scorer:{self.session.config.transport}:kind={self.score_kind}"

    def score_batch(self, tensors: Sequence[np.ndarray]) -> list[float]:
        return self.session.score_tensors(tensors)


# ---------------------------------------------------------------------------
# Built-in scorer and server


class BuiltinScorer:
    """Deterministic two-layer ramp network over an n-vector.

    Weights and the reference input derive from one seed; evaluation is
    float64 with a fixed order, so a (seed, input) pair scores the same
    everywhere.  Masks act as zero-baseline element masking on the
    reference input.
    """

    def __init__(self, seed: int, n: int, hidden: int = BUILTIN_HIDDEN):
        self.seed = seed
        self.n = n
        self.hidden = hidden
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(5,)))
        self.w1 = rng.normal(0.0, 1.0 / np.sqrt(n), (n, hidden))
        self.b1 = rng.normal(0.0, 0.1, hidden)
        self.w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), hidden)
        self.b2 = float(rng.normal(0.0, 0.1))
        self.x = rng.uniform(-1.0, 1.0, n)

    @property
    def descriptor(self) -> str:
        return f"builtin:n={self.n}:seed={self.seed}:hidden={self.hidden}"

    def score_vectors(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim == 1:
            vectors = vectors[None, :]
        if vectors.shape[1] != self.n:
            raise ConfigError(
                f"builtin scorer takes length-{self.n} vectors, got {vectors.shape}",
                field="tensor",
            )
        pre = vectors @ self.w1 + self.b1
        return np.maximum(pre, 0.0) @ self.w2 + self.b2

    def score_coalitions(self, coalitions: Sequence[Coalition]) -> np.ndarray:
        masks = mask_matrix(coalitions, self.n).astype(np.float64)
        return self.score_vectors(masks * self.x)


class BuiltinGame(GameEvaluator):
    """In-process game over the built-in scorer; no wire involved."""

    def __init__(self, seed: int, n: int, hidden: int = BUILTIN_HIDDEN):
        self.scorer = BuiltinScorer(seed, n, hidden)
        self.n = n

    @property
    def descriptor(self) -> str:
        return f"builtin_game:{self.scorer.descriptor}"

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        return self.scorer.score_coalitions(coalitions).tolist()


def builtin_game(seed: int, n: int) -> BuiltinGame:
    return BuiltinGame(seed, n)


class BuiltinServer:
    """Serves a BuiltinScorer over the protocol, one session at a time.

    Malformed lines get an error response with the id echoed when one
    can be parsed; the session keeps going either way.
    """

    def __init__(self, seed: int, n: int, score_kind: str = "logit",
                 input_refs: Sequence[str] = ("builtin",)):
        if score_kind not in SCORE_KINDS:
            raise ConfigError(f"score_kind must be one of {SCORE_KINDS}", field="score_kind")
        self.scorer = BuiltinScorer(seed, n)
        self.n = n
        self.score_kind = score_kind
        self.input_refs = tuple(input_refs)
        self.requests_served = 0

    def hello(self) -> dict:
        return {
            "kind": "hello",
            "version": PROTOCOL_VERSION,
            "n": self.n,
            "score_kind": self.score_kind,
            "input_refs": list(self.input_refs),
        }

    def _answer(self, request) -> dict:
        rid = request.get("id") if isinstance(request, dict) else None
        if not isinstance(rid, int):
            return {"id": None, "error": "request id missing or not an integer"}
        kind = request.get("kind")
        try:
            if kind == "score":
                ref = request.get("input_ref")
                if ref not in self.input_refs:
                    return {"id": rid, "error": f"unknown input_ref {ref!r}"}
                masks = request.get("masks")
                if not isinstance(masks, list):
                    return {"id": rid, "error": "masks must be a list of hex strings"}
                coalitions = [Coalition.from_hex(self.n, m) for m in masks]
                scores = self.scorer.score_coalitions(coalitions)
            elif kind == "score_tensor":
                shape = request.get("shape")
                payloads = request.get("tensors")
                if not isinstance(shape, list) or not isinstance(payloads, list):
                    return {"id": rid, "error": "score_tensor needs shape and tensors"}
                vectors = np.stack(
                    [decode_tensor(p, shape).reshape(-1) for p in payloads]
                )
                scores = self.scorer.score_vectors(vectors)
            else:
                return {"id": rid, "error": f"unknown request kind {kind!r}"}
        except Exception as exc:
            return {"id": rid, "error": f"{type(exc).__name__}: {exc}"}
        return {"id": rid, "scores": [float(s) for s in scores]}

    def handle_stream(self, rfile, wfile) -> None:
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

    def serve_stdio(self) -> None:
        self.handle_stream(sys.stdin.buffer, sys.stdout.buffer)

    def serve_tcp(self, host: str = "127.0.0.1", port: int = 0):
        """Bind and return (socket, port); call accept_loop to serve."""
        try:
            sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            sock.bind((host, port))
            sock.listen(1)
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        return sock, sock.getsockname()[1]

    def accept_loop(self, sock, max_sessions: int | None = None) -> None:
        served = 0
        while max_sessions is None or served < max_sessions:
            try:
                conn, _ = sock.accept()
            except OSError:
                return  # socket closed from outside; a normal shutdown
            with conn:
                try:
                    self.handle_stream(conn.makefile("rb"), conn.makefile("wb"))
                except OSError:
                    pass  # peer vanished mid-session; serve the next one
            served += 1


def serve_builtin(seed: int, n: int, transport: str = "stdio",
                  host: str = "127.0.0.1", port: int = 0,
                  score_kind: str = "logit") -> None:
    """Run a built-in scoring endpoint until the peer disconnects."""
    server = BuiltinServer(seed, n, score_kind=score_kind)
    if transport == "stdio":
        server.serve_stdio()
        return
    if transport != "tcp":
        raise ConfigError(f"transport must be 'stdio' or 'tcp', got {transport!r}",
                          field="transport")
    sock, bound = server.serve_tcp(host, port)
    print(f"listening on {host}:{bound}", file=sys.stderr, flush=True)
    with sock:
        server.accept_loop(sock)


def _main(argv: Sequence[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(
        prog="python -m multiorder.bridge",
        description="Serve the built-in scorer over the wire protocol.",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n", type=int, required=True, help="player count")
    parser.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0)
    parser.add_argument("--score-kind", choices=SCORE_KINDS, default="logit")
    args = parser.parse_args(argv)
    serve_builtin(args.seed, args.n, transport=args.transport,
                  host=args.host, port=args.port, score_kind=args.score_kind)
    return 0


if __name__ == "__main__":
    sys.exit(_main())
