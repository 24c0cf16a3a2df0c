"""Build and run a protocol endpoint from an adapter config.

Startup does all the failing: the model is constructed, every manifest
tensor is loaded and shape-checked, and the baseline is rendered once,
so a bad config exits nonzero before the peer sees any hello.  After
that the session is sequential request handling until EOF.
"""

from __future__ import annotations

import argparse
import socket
import sys
from typing import Sequence

from .config import AdapterConfig, load_config
from .errors import AdapterError, BindFailure, ConfigError
from .masking import partition
from .protocol import AdapterServer, LoadedInput
from .tensors import load_tensor

PROG = "multiorder-adapter"


def build_server(config: AdapterConfig) -> AdapterServer:
    """Load everything the config names and assemble the endpoint."""
    from .models import load_model

    model = load_model(config.model, device=config.device)
    inputs: dict[str, LoadedInput] = {}
    shape = None
    for sid, entry in config.inputs.items():
        tensor = load_tensor(entry.file)
        if shape is None:
            shape = tensor.shape
        elif tensor.shape != shape:
            raise ConfigError(
                f"tensor {entry.file} has shape {tensor.shape}, expected {shape} "
                "(all served inputs must agree)",
                field=f"inputs.{sid}",
            )
        inputs[sid] = LoadedInput(tensor=tensor, target=entry.target)
    spec = partition(shape, config.g, config.pad)
    channels = getattr(model, "in_channels", None)
    if channels is not None and channels != shape[0]:
        raise ConfigError(
            f"model takes {channels}-channel input, tensors have {shape[0]}",
            field="model",
        )
    config.baseline.render(next(iter(inputs.values())).tensor)  # fail fast on shape
    classes = getattr(model, "classes", None)
    if classes is not None:
        bad = {sid: e.target for sid, e in inputs.items() if e.target >= classes}
        if bad:
            raise ConfigError(
                f"targets {bad} out of range for {classes} classes", field="inputs"
            )
        if config.tensor_target >= classes:
            raise ConfigError(
                f"{config.tensor_target} out of range for {classes} classes",
                field="tensor_target",
            )
    return AdapterServer(
        model=model,
        spec=spec,
        baseline=config.baseline,
        inputs=inputs,
        score_kind=config.score_kind,
        tensor_target=config.tensor_target,
    )


def serve(config: AdapterConfig, transport: str = "stdio",
          host: str = "127.0.0.1", port: int = 0,
          max_sessions: int | None = None) -> None:
    """Serve the config until the peer disconnects (stdio) or forever (tcp)."""
    server = build_server(config)
    if transport == "stdio":
        server.handle_stream(sys.stdin.buffer, sys.stdout.buffer)
        return
    if transport != "tcp":
        raise ConfigError(f"transport must be 'stdio' or 'tcp', got {transport!r}",
                          field="transport")
    try:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((host, port))
        sock.listen(1)
    except OSError as exc:
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
    print(f"listening on {host}:{sock.getsockname()[1]}", file=sys.stderr, flush=True)
    served = 0
    with sock:
        while max_sessions is None or served < max_sessions:
            try:
                conn, _ = sock.accept()
            except OSError:
                return  # socket closed from outside; a normal shutdown
            with conn:
                try:
                    server.handle_stream(conn.makefile("rb"), conn.makefile("wb"))
                except OSError:
                    pass  # peer vanished mid-session; serve the next one
            served += 1


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Serve a wrapped classifier over the multiorder wire protocol.",
    )
    parser.add_argument("--config", required=True, help="adapter config JSON file")
    parser.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0)
    parser.add_argument("--max-sessions", type=int, default=None,
                        help="tcp only: exit after this many sessions")
    args = parser.parse_args(argv)
    try:
        serve(load_config(args.config), transport=args.transport,
              host=args.host, port=args.port, max_sessions=args.max_sessions)
    except AdapterError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
