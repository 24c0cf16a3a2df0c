"""Reference model server for the multiorder wire protocol.

Wraps a classifier (the bundled toy net or a user entrypoint) behind the
line-delimited JSON protocol the analysis engine speaks, masking the
preloaded input tensors server-side per the configured baseline.
"""

from .config import AdapterConfig, InputEntry, load_config, parse_config
from .errors import (
    AdapterError,
    BadGrid,
    BadMask,
    BindFailure,
    ConfigError,
    ModelLoadFailure,
    ShapeMismatch,
)
from .masking import Baseline, GridSpec, apply_mask, masked_batch, parse_baseline, partition
from .models import ToyConvModel, load_model, scores_from_logits
from .protocol import PROTOCOL_VERSION, AdapterServer, LoadedInput, members_from_hex
from .server import build_server, serve
from .tensors import load_tensor, save_tensor

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "AdapterServer",
    "BadGrid",
    "BadMask",
    "Baseline",
    "BindFailure",
    "ConfigError",
    "GridSpec",
    "InputEntry",
    "LoadedInput",
    "ModelLoadFailure",
    "PROTOCOL_VERSION",
    "ShapeMismatch",
    "ToyConvModel",
    "apply_mask",
    "build_server",
    "load_config",
    "load_model",
    "load_tensor",
    "masked_batch",
    "members_from_hex",
    "parse_baseline",
    "parse_config",
    "partition",
    "save_tensor",
    "scores_from_logits",
    "serve",
    "__version__",
]
