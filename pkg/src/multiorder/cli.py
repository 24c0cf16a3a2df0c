"""Batch front-end: run interaction probes, aggregate metrics, compare runs.

Four subcommands::

    multiorder probe --config run.json      compute records into an archive
    multiorder metrics ARCHIVE --which ...   order-profile CSVs from an archive
    multiorder compare A B --metric avg      per-order difference of two runs
    multiorder selfcheck                     engine invariant suite

A probe run is described by a JSON config file (see ``RunConfig``), owns
its output directory exclusively while running, writes the resolved
config next to its outputs, and finishes with an atomically written
manifest.  Runs are resumable: samples already on disk are left
untouched.  All file outputs are byte-deterministic for a fixed config,
regardless of worker count.

Exit codes: 0 success, 1 validation failure, 2 runtime failure,
3 self-check property violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from . import __version__
from .coalition import Coalition, PlayerSet
from .engine import SamplingPlan, default_orders, profile_pairs
from .errors import (
    ArchiveError,
    BadGrid,
    ConfigError,
    DegenerateOrder,
    DeltasNotRetained,
    GridMismatch,
    IncompleteProfile,
    InvalidPlayer,
    MissingOrder,
    MultiorderError,
    OrderGridMismatch,
    ShapeMismatch,
    SizeLimit,
)
from .games import CachedGame, GameEvaluator, make_synthetic
from .imagegame import (
    BaselinePolicy,
    BilinearScorer,
    ConstantScorer,
    LinearScorer,
    load_tensor,
    make_image_game,
    partition,
)
from .metrics import (
    PROFILE_KINDS,
    SampleRecord,
    SampleRecordSet,
    compare_sets,
    eta,
    eta_order,
    order_profile,
)
from .records import RecordArchive, atomic_write_text, format_float
from .selfcheck import DEFAULT_SIZES, DEFAULT_TOLERANCE, run_selfcheck

PROG = "multiorder"
CONFIG_NAME = "config.json"
MANIFEST_NAME = "manifest.json"
LOCK_NAME = "run.lock"

GAME_SOURCES = ("synthetic", "builtin", "image", "bridge")
MODES = ("exact", "sampled")
METRIC_NAMES = ("strength", "normalized", "disentanglement", "purity", "average", "eta")
COMPARE_METRICS = ("avg", "purity")

# All-pairs enumeration stays reasonable up to this player count; larger
# universes must sample pairs.
ALL_PAIRS_LIMIT = 64

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_SELFCHECK = 3

_VALIDATION_ERRORS = (
    ConfigError,
    ArchiveError,
    GridMismatch,
    OrderGridMismatch,
    MissingOrder,
    DeltasNotRetained,
    IncompleteProfile,
    InvalidPlayer,
    SizeLimit,
    DegenerateOrder,
    BadGrid,
    ShapeMismatch,
)


@dataclass(frozen=True)
class RunConfig:
    """Everything a probe run needs, round-trippable through JSON.

    ``game`` keeps the source-specific keys as written in the file; the
    builders below validate them.  ``samples`` counts seeded instances
    for synthetic sources and must match (or be omitted for) the input
    roster of image and bridge sources.  ``orders`` of None means every
    order in exact mode and the spread default grid in sampled mode.
    """

    game: dict
    n: int
    out_dir: str
    seed: int
    samples: int | None = None
    mode: str = "exact"
    orders: tuple[int, ...] | None = None
    contexts_per_order: int = 100
    pairs: str | int = "all"
    metrics: tuple[str, ...] = ("strength", "normalized", "average")
    retain_deltas: bool = False


def _field_error(name: str, message: str) -> ConfigError:
    return ConfigError(message, field=name)


def _require(payload: dict, name: str, kind, kindname: str):
    if name not in payload:
        raise _field_error(name, "required field is missing")
    value = payload[name]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        raise _field_error(name, f"expected {kindname}, got {value!r}")
    return value


def parse_config(
    text: str, source: str = "<config>", *, out_dir: str | None = None
) -> RunConfig:
    """Parse and validate a config file; errors carry field names.

    ``out_dir`` (the --out-dir flag) wins over the config's own field and
    makes it optional in the file.
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{source}: config must be a JSON object")
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"{source}: unknown fields {sorted(unknown)}")

    game = _require(payload, "game", dict, "an object")
    if game.get("source") not in GAME_SOURCES:
        raise _field_error(
            "game.source", f"expected one of {GAME_SOURCES}, got {game.get('source')!r}"
        )
    n = _require(payload, "n", int, "an integer")
    PlayerSet(n)
    if out_dir is None:
        out_dir = _require(payload, "out_dir", str, "a string")
    seed = _require(payload, "seed", int, "an integer")

    samples = payload.get("samples")
    if samples is not None and (not isinstance(samples, int) or samples < 1):
        raise _field_error("samples", f"expected a positive integer, got {samples!r}")
    mode = payload.get("mode", "exact")
    if mode not in MODES:
        raise _field_error("mode", f"expected one of {MODES}, got {mode!r}")
    orders = payload.get("orders")
    if orders is not None:
        if not isinstance(orders, list) or not all(isinstance(m, int) for m in orders):
            raise _field_error("orders", f"expected a list of integers, got {orders!r}")
        if sorted(set(orders)) != orders:
            raise _field_error("orders", "orders must be sorted and distinct")
        if any(not 0 <= m <= n - 2 for m in orders):
            raise _field_error("orders", f"orders {orders} out of range for n={n}")
        orders = tuple(orders)
    contexts = payload.get("contexts_per_order", 100)
    if not isinstance(contexts, int) or contexts < 1:
        raise _field_error(
            "contexts_per_order", f"expected a positive integer, got {contexts!r}"
        )
    pairs = payload.get("pairs", "all")
    if pairs != "all" and (not isinstance(pairs, int) or pairs < 1):
        raise _field_error("pairs", f"expected 'all' or a positive integer, got {pairs!r}")
    if pairs == "all" and n > ALL_PAIRS_LIMIT:
        raise _field_error(
            "pairs", f"all-pairs enumeration is limited to n <= {ALL_PAIRS_LIMIT}; "
            "give a pair sample size instead"
        )
    metrics = payload.get("metrics", ["strength", "normalized", "average"])
    if not isinstance(metrics, list) or not all(m in METRIC_NAMES for m in metrics):
        raise _field_error("metrics", f"expected names from {METRIC_NAMES}, got {metrics!r}")
    retain = payload.get("retain_deltas", False)
    if not isinstance(retain, bool):
        raise _field_error("retain_deltas", f"expected true or false, got {retain!r}")
    if "disentanglement" in metrics and not retain:
        raise _field_error(
            "metrics", "disentanglement needs retain_deltas: true (lean archives "
            "drop the per-context samples it averages)"
        )
    return RunConfig(
        game=game,
        n=n,
        out_dir=out_dir,
        seed=seed,
        samples=samples,
        mode=mode,
        orders=orders,
        contexts_per_order=contexts,
        pairs=pairs,
        metrics=tuple(metrics),
        retain_deltas=retain,
    )


def serialize_config(config: RunConfig) -> str:
    payload = {
        "game": config.game,
        "n": config.n,
        "out_dir": config.out_dir,
        "seed": config.seed,
        "samples": config.samples,
        "mode": config.mode,
        "orders": None if config.orders is None else list(config.orders),
        "contexts_per_order": config.contexts_per_order,
        "pairs": config.pairs,
        "metrics": list(config.metrics),
        "retain_deltas": config.retain_deltas,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def load_config(path: Path | str, *, out_dir: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path), out_dir=out_dir)


def config_digest(config: RunConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()


def archive_digest(config: RunConfig) -> str:
    """Digest of the fields that determine record bytes.

    out_dir and the metrics list shape neither sampling nor scores, so
    two probes of the same game into different directories produce
    byte-identical archives and may resume each other's records.
    """
    return config_digest(replace(config, out_dir="", metrics=()))


# ---------------------------------------------------------------------------
# Game sources.  Each yields a fixed sample roster plus a factory from
# sample id to evaluator; the bridge variant owns a live session.


def _child_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(11, index)).generate_state(1)[0])


def _scorer_from(spec, shape, target: int, score_kind: str):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise _field_error("game.scorer", f"expected an object with 'kind', got {spec!r}")
    kind = spec["kind"]
    if kind == "constant":
        return ConstantScorer(
            value=spec.get("value", 0.7), target=target, score_kind=score_kind
        )
    if kind == "linear":
        scorer = LinearScorer.seeded(shape, seed=spec.get("seed", 0))
        return LinearScorer(scorer.weights, target=target, score_kind=score_kind)
    if kind == "bilinear":
        base = LinearScorer.seeded(shape, seed=spec.get("seed", 0))
        for key in ("pos_a", "pos_b"):
            if key not in spec:
                raise _field_error(f"game.scorer.{key}", "required for bilinear scorers")
        return BilinearScorer(
            base.weights,
            pos_a=tuple(spec["pos_a"]),
            pos_b=tuple(spec["pos_b"]),
            coef=spec.get("coef", 1.0),
            target=target,
            score_kind=score_kind,
        )
    raise _field_error("game.scorer.kind", f"unknown scorer kind {kind!r}")


def _baseline_from(spec) -> BaselinePolicy:
    if spec is None or spec == "per-channel-mean":
        return BaselinePolicy.per_channel_mean()
    if spec == "zero":
        return BaselinePolicy.zero()
    if isinstance(spec, dict) and "constant" in spec:
        return BaselinePolicy.constant(spec["constant"])
    if isinstance(spec, dict) and "reference" in spec:
        return BaselinePolicy.reference(load_tensor(spec["reference"]))
    raise _field_error("game.baseline", f"unknown baseline spec {spec!r}")


@contextmanager
def _game_source(
    config: RunConfig,
) -> Iterator[tuple[tuple[str, ...], Callable[[str], GameEvaluator]]]:
    game = config.game
    source = game["source"]
    if source == "synthetic":
        kind = game.get("kind")
        params = game.get("params", {})
        if not isinstance(params, dict):
            raise _field_error("game.params", f"expected an object, got {params!r}")
        count = config.samples if config.samples is not None else 1
        sids = tuple(f"s{k}" for k in range(count))
        index = {sid: k for k, sid in enumerate(sids)}

        def build(sid: str) -> GameEvaluator:
            # The config's n is the default size; explicit params win and
            # the coherence check below catches any disagreement.
            merged = {"n": config.n, **params}
            try:
                g = make_synthetic(kind, seed=_child_seed(config.seed, index[sid]), **merged)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"game: {exc}") from exc
            if g.n != config.n:
                raise ConfigError(
                    f"game.params: synthetic game has n={g.n}, config says n={config.n}"
                )
            return g

        yield sids, build
        return

    if source == "builtin":
        # The bundled scorer, run in this process (no wire round trips).
        from .bridge import builtin_game

        count = config.samples if config.samples is not None else 1
        sids = tuple(f"s{k}" for k in range(count))
        index = {sid: k for k, sid in enumerate(sids)}
        yield sids, lambda sid: builtin_game(_child_seed(config.seed, index[sid]), config.n)
        return

    if source == "image":
        inputs = game.get("inputs")
        if not isinstance(inputs, list) or not inputs:
            raise _field_error("game.inputs", "expected a non-empty list of tensor paths")
        g = game.get("g")
        if not isinstance(g, int) or g < 1:
            raise _field_error("game.g", f"expected a positive integer, got {g!r}")
        if g * g != config.n:
            raise _field_error("game.g", f"g={g} gives n={g * g}, config says n={config.n}")
        target = game.get("target", 0)
        score_kind = game.get("score_kind", "logit")
        pad = game.get("pad", "none")
        sids = tuple(Path(p).stem for p in inputs)
        if len(set(sids)) != len(sids):
            raise _field_error("game.inputs", "input file stems must be unique")
        by_sid = dict(zip(sids, inputs))

        def build(sid: str) -> GameEvaluator:
            x = load_tensor(by_sid[sid])
            spec = partition(x.shape, g=g, pad=pad)
            scorer = _scorer_from(game.get("scorer"), x.shape, target, score_kind)
            return make_image_game(x, scorer, spec, _baseline_from(game.get("baseline")))

        if config.samples is not None and config.samples != len(sids):
            raise _field_error(
                "samples", f"{config.samples} does not match {len(sids)} input files"
            )
        yield sids, build
        return

    # bridge: one session serves every sample.
    from .bridge import BridgeConfig, RemoteGame, connect

    endpoint = game.get("endpoint")
    if not isinstance(endpoint, str) or not endpoint:
        raise _field_error("game.endpoint", "expected a transport string")
    with connect(BridgeConfig(transport=endpoint), n=config.n) as session:
        refs = game.get("input_refs")
        if refs is None:
            refs = list(session.input_refs)
        if not isinstance(refs, list) or not refs:
            raise _field_error("game.input_refs", "expected a non-empty list")
        unknown = [r for r in refs if r not in session.input_refs]
        if unknown:
            raise _field_error(
                "game.input_refs", f"{unknown} not served; remote offers "
                f"{list(session.input_refs)}"
            )
        if config.samples is not None and config.samples != len(refs):
            raise _field_error(
                "samples", f"{config.samples} does not match {len(refs)} input refs"
            )
        yield tuple(refs), lambda ref: RemoteGame(session, ref)


def _select_pairs(config: RunConfig) -> tuple[tuple[int, int], ...]:
    universe = PlayerSet(config.n)
    if config.pairs == "all":
        return tuple(universe.pairs())
    total = config.n * (config.n - 1) // 2
    if config.pairs >= total:
        return tuple(universe.pairs())
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(10,)))
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < config.pairs:
        i, j = rng.integers(0, config.n, size=2).tolist()
        if i != j:
            chosen.add((min(i, j), max(i, j)))
    return tuple(sorted(chosen))


def _resolved_orders(config: RunConfig) -> tuple[int, ...]:
    if config.orders is not None:
        return config.orders
    if config.mode == "exact":
        return tuple(range(config.n - 1))
    return default_orders(config.n)


# ---------------------------------------------------------------------------
# Probe.


@dataclass(frozen=True)
class RunManifest:
    """Provenance written at the end of every probe run."""

    config_digest: str
    engine_version: str
    status: str
    started: str
    finished: str
    duration_s: float
    samples_computed: int
    samples_skipped: int
    evaluator_calls: int
    cache_hits: int
    cache_misses: int
    cache_hit_rate: float
    workers: int
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "config_digest": self.config_digest,
            "engine_version": self.engine_version,
            "status": self.status,
            "started": self.started,
            "finished": self.finished,
            "duration_s": self.duration_s,
            "samples_computed": self.samples_computed,
            "samples_skipped": self.samples_skipped,
            "evaluator_calls": self.evaluator_calls,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "cache_hit_rate": self.cache_hit_rate,
            "workers": self.workers,
        }
        payload.update(self.extra)
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


@contextmanager
def _run_lock(out_dir: Path):
    """One run owns the directory; a leftover lock names its holder."""
    path = out_dir / LOCK_NAME
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"{path} exists: another run owns this directory "
            "(remove the lock file if that run is dead)"
        ) from None
    try:
        os.write(fd, f"pid {os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        try:
            path.unlink()
        except OSError:
            pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_probe(config: RunConfig, workers: int = 1, echo=print) -> int:
    """Compute interaction records for every sample into an archive."""
    started = _now()
    t0 = time.perf_counter()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    pairs = _select_pairs(config)
    orders = _resolved_orders(config)
    plan = None
    if config.mode == "sampled":
        plan = SamplingPlan(
            orders=orders,
            contexts_per_order=config.contexts_per_order,
            pairs_per_sample=len(pairs),
            seed=config.seed,
        )
        plan.check_orders(config.n)

    digest = config_digest(config)
    calls = hits = misses = 0
    computed = 0
    status = "partial"
    with _run_lock(out_dir):
        atomic_write_text(out_dir / CONFIG_NAME, serialize_config(config))
        archive = RecordArchive.create(
            out_dir,
            n=config.n,
            pairs=pairs,
            orders=orders,
            retain_deltas=config.retain_deltas,
            sample_ids=_sample_roster(config),
            meta={"archive_digest": archive_digest(config),
                  "source": config.game["source"], "mode": config.mode},
        )
        skipped = len(archive.completed())
        try:
            with _game_source(config) as (_sids, build):
                for sid in archive.missing():
                    game = CachedGame(build(sid))
                    profiles = profile_pairs(
                        game,
                        pairs,
                        plan=plan,
                        mode=config.mode,
                        workers=workers,
                        retain_deltas=config.retain_deltas,
                    )
                    v_full = game.evaluate(Coalition.full(config.n))
                    v_empty = game.evaluate(Coalition.empty(config.n))
                    archive.write_sample(
                        SampleRecord(
                            sample_id=sid,
                            profiles=tuple(profiles),
                            v_full=v_full,
                            v_empty=v_empty,
                        )
                    )
                    computed += 1
                    calls += game.evaluator_calls
                    hits += game.cache.hits
                    misses += game.cache.misses
                    print(
                        f"sample {sid}: {len(pairs)} pairs x {len(orders)} orders, "
                        f"{game.evaluator_calls} evaluator calls",
                        file=sys.stderr,
                    )
            status = "complete"
        finally:
            total = hits + misses
            manifest = RunManifest(
                config_digest=digest,
                engine_version=__version__,
                status=status,
                started=started,
                finished=_now(),
                duration_s=round(time.perf_counter() - t0, 3),
                samples_computed=computed,
                samples_skipped=skipped,
                evaluator_calls=calls,
                cache_hits=hits,
                cache_misses=misses,
                cache_hit_rate=round(hits / total, 6) if total else 0.0,
                workers=workers,
            )
            atomic_write_text(out_dir / MANIFEST_NAME, manifest.to_json())
    echo(f"archive {out_dir}: {computed} samples computed, {skipped} already present")
    return EXIT_OK


def _sample_roster(config: RunConfig) -> tuple[str, ...]:
    """The sample ids a config will produce, without touching the game."""
    source = config.game["source"]
    if source in ("synthetic", "builtin"):
        count = config.samples if config.samples is not None else 1
        return tuple(f"s{k}" for k in range(count))
    if source == "image":
        inputs = config.game.get("inputs")
        if not isinstance(inputs, list) or not inputs:
            raise _field_error("game.inputs", "expected a non-empty list of tensor paths")
        stems = tuple(Path(p).stem for p in inputs)
        if len(set(stems)) != len(stems):
            raise _field_error("game.inputs", "input file stems must be unique")
        return stems
    refs = config.game.get("input_refs")
    if refs:
        return tuple(refs)
    # The roster comes from the remote handshake; a short-lived session
    # resolves it so resume checks stay cheap.
    with _game_source(config) as (sids, _build):
        return sids


# ---------------------------------------------------------------------------
# Metrics and comparison CSVs.


def _csv_lines(rows: Sequence[tuple[int, float, float | None, str]]) -> str:
    lines = ["order,value,stderr,kind"]
    for order, value, stderr, kind in rows:
        se = "" if stderr is None else format_float(stderr)
        lines.append(f"{order},{format_float(value)},{se},{kind}")
    return "\n".join(lines) + "\n"


def _metric_rows(
    records: SampleRecordSet, which: str
) -> list[tuple[int, float, float | None, str]]:
    if which == "eta":
        m_star = eta_order(records.n)
        return [
            (m_star, eta(SampleRecordSet((record,))), None, "eta")
            for record in records.records
        ]
    profile = order_profile(records, which=which, on_degenerate="nan")
    stderrs = profile.stderrs or (None,) * len(profile.values)
    return [
        (m, value, se, profile.kind)
        for m, value, se in zip(profile.orders, profile.values, stderrs)
    ]


def cmd_metrics(
    archive_dir: Path | str,
    which: Sequence[str] | None = None,
    out: Path | str | None = None,
    echo=print,
) -> int:
    """Aggregate an archive into one CSV per requested metric."""
    archive = RecordArchive.open(archive_dir)
    if not archive.is_complete:
        raise ArchiveError(
            f"{archive.root} is incomplete (missing samples "
            f"{list(archive.missing())}); rerun probe first"
        )
    if which is None:
        config_path = archive.root / CONFIG_NAME
        if not config_path.is_file():
            raise ConfigError(
                f"{archive.root} has no {CONFIG_NAME}; pass --which explicitly"
            )
        which = load_config(config_path).metrics
    bad = [w for w in which if w not in METRIC_NAMES]
    if bad:
        raise ConfigError(f"unknown metrics {bad}; expected names from {METRIC_NAMES}")
    if out is not None and len(which) != 1:
        raise ConfigError("--out works with exactly one metric")
    records = archive.load()
    for name in which:
        text = _csv_lines(_metric_rows(records, name))
        path = Path(out) if out is not None else archive.root / f"metrics-{name}.csv"
        atomic_write_text(path, text)
        echo(str(path))
    return EXIT_OK


def cmd_compare(
    archive_a: Path | str,
    archive_b: Path | str,
    metric: str,
    out: Path | str | None = None,
    echo=print,
) -> int:
    """Per-order difference (A - B) of a metric between two archives."""
    if metric not in COMPARE_METRICS:
        raise ConfigError(f"metric must be one of {COMPARE_METRICS}, got {metric!r}")
    records_a = RecordArchive.open(archive_a).load()
    records_b = RecordArchive.open(archive_b).load()
    profile = compare_sets(records_a, records_b, metric=metric)
    text = _csv_lines(
        [(m, value, None, profile.kind) for m, value in zip(profile.orders, profile.values)]
    )
    if out is None:
        echo(text, end="")
    else:
        atomic_write_text(Path(out), text)
        echo(str(out))
    return EXIT_OK


def cmd_selfcheck(
    sizes: Sequence[int] = DEFAULT_SIZES,
    seed: int = 2024,
    tolerance: float = DEFAULT_TOLERANCE,
    cardinality_weights: Sequence[float] | None = None,
    echo=print,
) -> int:
    """Run the invariant suite; nonzero exit on any property violation."""
    report = run_selfcheck(
        sizes=sizes, seed=seed, tolerance=tolerance,
        cardinality_weights=cardinality_weights,
    )
    for line in report.format_lines():
        echo(line)
    return EXIT_OK if report.passed else EXIT_SELFCHECK


# ---------------------------------------------------------------------------
# Argument parsing.


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Multi-order interaction probes over black-box coalition games.",
    )
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    probe = sub.add_parser("probe", help="compute an interaction record archive")
    probe.add_argument("--config", required=True, help="JSON run config file")
    probe.add_argument(
        "--out-dir",
        help="output directory; wins over (and makes optional) the config's out_dir",
    )
    probe.add_argument(
        "--workers", type=int, default=1,
        help="evaluation threads (outputs do not depend on this)",
    )
    probe.add_argument(
        "--retain-deltas", action="store_true",
        help="override the config to keep per-context synergy samples",
    )

    metrics = sub.add_parser("metrics", help="aggregate an archive into CSV profiles")
    metrics.add_argument("archive", help="archive directory written by probe")
    metrics.add_argument(
        "--which", help="comma-separated metric names (default: the run config's list)"
    )
    metrics.add_argument("--out", help="output CSV path (single metric only)")

    compare = sub.add_parser("compare", help="per-order difference of two archives")
    compare.add_argument("archive_a")
    compare.add_argument("archive_b")
    compare.add_argument("--metric", required=True, choices=COMPARE_METRICS)
    compare.add_argument("--out", help="output CSV path (default: stdout)")

    selfcheck = sub.add_parser("selfcheck", help="run the engine invariant suite")
    selfcheck.add_argument(
        "--sizes", default=",".join(str(s) for s in DEFAULT_SIZES),
        help="comma-separated player counts",
    )
    selfcheck.add_argument("--seed", type=int, default=2024)
    selfcheck.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    return parser


def _parse_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"--sizes: expected comma-separated integers, got {text!r}")
    if not sizes or any(s < 3 for s in sizes):
        raise ConfigError(f"--sizes: player counts must be at least 3, got {text!r}")
    return sizes


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "probe":
        config = load_config(args.config, out_dir=args.out_dir)
        if args.retain_deltas and not config.retain_deltas:
            config = replace(config, retain_deltas=True)
        if args.workers < 1:
            raise ConfigError(f"--workers: expected a positive integer, got {args.workers}")
        return cmd_probe(config, workers=args.workers)
    if args.command == "metrics":
        which = args.which.split(",") if args.which else None
        return cmd_metrics(args.archive, which=which, out=args.out)
    if args.command == "compare":
        return cmd_compare(args.archive_a, args.archive_b, args.metric, out=args.out)
    return cmd_selfcheck(sizes=_parse_sizes(args.sizes), seed=args.seed,
                         tolerance=args.tolerance)


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except _VALIDATION_ERRORS as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        print(f"{PROG}: interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except MultiorderError as exc:
        print(f"{PROG}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
