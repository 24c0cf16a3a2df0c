"""Multi-order interaction analysis for black-box coalition games.

A coalition game assigns a score to every subset of n players.  This
package measures how strongly pairs of players interact at each context
size m (the number of other players already present), exactly for small
n and by seeded Monte Carlo sampling for large n, and aggregates the
per-pair estimates into order profiles: strength, normalized strength,
disentanglement, purity, signed average and the eta ratio.

Players can be abstract indices, entries of an input vector, or cells of
a grid partition over an image tensor.  Scoring functions can run
in-process or behind a line-delimited JSON wire protocol (see
`multiorder.bridge`).
"""

from .errors import (
    MultiorderError,
    InvalidPlayer,
    PlayerInCoalition,
    SizeLimit,
    EvaluatorFailure,
    ExactSizeLimit,
    DegenerateOrder,
    IncompleteProfile,
    MissingOrder,
    AllZeroStrength,
    OrderGridMismatch,
    GridMismatch,
    DeltasNotRetained,
    ZeroStrength,
    DegenerateGame,
    ZeroDenominatorWarning,
    BadGrid,
    ShapeMismatch,
    ScorerFailure,
    BridgeError,
    HandshakeMismatch,
    BridgeTimeout,
    RemoteError,
    BindFailure,
    ConfigError,
    ArchiveError,
)
from .coalition import MAX_PLAYERS, PlayerSet, Coalition, bits_to_mask, mask_matrix
from .games import (
    GameEvaluator,
    EvalCache,
    CachedGame,
    evaluate_cached,
    delta_v,
    AdditiveGame,
    PairAndGame,
    FullCoalitionGame,
    TableGame,
    SignedContextGame,
    LocalPairsGame,
    FreezePlayerGame,
    make_synthetic,
)
from .engine import (
    EXACT_PLAYER_LIMIT,
    SamplingPlan,
    default_orders,
    PairOrderEstimate,
    InteractionProfile,
    shapley_value_exact,
    multi_order_exact,
    multi_order_sampled,
    interaction_index,
    profile_pairs,
)
from .metrics import (
    PROFILE_KINDS,
    SampleRecord,
    SampleRecordSet,
    OrderProfile,
    strength,
    normalized_strength,
    flexibility_delta,
    disentanglement,
    average_interaction,
    purity,
    eta,
    eta_order,
    order_profile,
    compare_sets,
)
from .imagegame import (
    GridSpec,
    partition,
    BaselinePolicy,
    apply_mask,
    ModelScorer,
    ConstantScorer,
    LinearScorer,
    BilinearScorer,
    ImageGame,
    make_image_game,
    save_tensor,
    load_tensor,
)
from .records import (
    SCHEMA_VERSION,
    ArchiveHeader,
    RecordArchive,
    format_float,
)
from .selfcheck import (
    PropertyResult,
    SelfCheckReport,
    run_selfcheck,
)

# Bridge and CLI names resolve lazily.  An eager bridge import would
# leave multiorder.bridge in sys.modules before `python -m
# multiorder.bridge` executes it, tripping runpy's double-execution
# warning on every launch; the CLI reads __version__ from this package,
# so it can only load after this module finishes.
_LAZY_EXPORTS = {
    "PROTOCOL_VERSION": "bridge",
    "BridgeConfig": "bridge",
    "BridgeSession": "bridge",
    "connect": "bridge",
    "RemoteGame": "bridge",
    "RemoteScorer": "bridge",
    "BuiltinScorer": "bridge",
    "builtin_game": "bridge",
    "BuiltinServer": "bridge",
    "serve_builtin": "bridge",
    "encode_tensor": "bridge",
    "decode_tensor": "bridge",
    "RunConfig": "cli",
    "RunManifest": "cli",
    "parse_config": "cli",
    "serialize_config": "cli",
    "load_config": "cli",
    "config_digest": "cli",
    "archive_digest": "cli",
    "cmd_probe": "cli",
    "cmd_metrics": "cli",
    "cmd_compare": "cli",
    "cmd_selfcheck": "cli",
}


def __getattr__(name: str):
    modname = _LAZY_EXPORTS.get(name)
    if modname is not None:
        from importlib import import_module

        return getattr(import_module(f".{modname}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__version__ = "0.1.0"

__all__ = [
    "MultiorderError",
    "InvalidPlayer",
    "PlayerInCoalition",
    "SizeLimit",
    "EvaluatorFailure",
    "ExactSizeLimit",
    "DegenerateOrder",
    "IncompleteProfile",
    "MissingOrder",
    "AllZeroStrength",
    "OrderGridMismatch",
    "GridMismatch",
    "DeltasNotRetained",
    "ZeroStrength",
    "DegenerateGame",
    "ZeroDenominatorWarning",
    "BadGrid",
    "ShapeMismatch",
    "ScorerFailure",
    "BridgeError",
    "HandshakeMismatch",
    "BridgeTimeout",
    "RemoteError",
    "BindFailure",
    "ConfigError",
    "ArchiveError",
    "MAX_PLAYERS",
    "PlayerSet",
    "Coalition",
    "bits_to_mask",
    "mask_matrix",
    "GameEvaluator",
    "EvalCache",
    "CachedGame",
    "evaluate_cached",
    "delta_v",
    "AdditiveGame",
    "PairAndGame",
    "FullCoalitionGame",
    "TableGame",
    "SignedContextGame",
    "LocalPairsGame",
    "FreezePlayerGame",
    "make_synthetic",
    "EXACT_PLAYER_LIMIT",
    "SamplingPlan",
    "default_orders",
    "PairOrderEstimate",
    "InteractionProfile",
    "shapley_value_exact",
    "multi_order_exact",
    "multi_order_sampled",
    "interaction_index",
    "profile_pairs",
    "PROFILE_KINDS",
    "SampleRecord",
    "SampleRecordSet",
    "OrderProfile",
    "strength",
    "normalized_strength",
    "flexibility_delta",
    "disentanglement",
    "average_interaction",
    "purity",
    "eta",
    "eta_order",
    "order_profile",
    "compare_sets",
    "GridSpec",
    "partition",
    "BaselinePolicy",
    "apply_mask",
    "ModelScorer",
    "ConstantScorer",
    "LinearScorer",
    "BilinearScorer",
    "ImageGame",
    "make_image_game",
    "save_tensor",
    "load_tensor",
    "SCHEMA_VERSION",
    "ArchiveHeader",
    "RecordArchive",
    "format_float",
    "PropertyResult",
    "SelfCheckReport",
    "run_selfcheck",
    "RunConfig",
    "RunManifest",
    "parse_config",
    "serialize_config",
    "load_config",
    "config_digest",
    "archive_digest",
    "cmd_probe",
    "cmd_metrics",
    "cmd_compare",
    "cmd_selfcheck",
    "PROTOCOL_VERSION",
    "BridgeConfig",
    "BridgeSession",
    "connect",
    "RemoteGame",
    "RemoteScorer",
    "BuiltinScorer",
    "builtin_game",
    "BuiltinServer",
    "serve_builtin",
    "encode_tensor",
    "decode_tensor",
    "__version__",
]
