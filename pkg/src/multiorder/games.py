"""Value-function contract, memoized evaluation, and built-in games.

A game maps coalitions to scalar scores.  Everything downstream (exact
enumeration, sampling, metrics) only talks to :class:`GameEvaluator`, so
synthetic games, grid-masked models, and remote endpoints are
interchangeable.
"""

from __future__ import annotations

import hashlib
import itertools
import threading
from abc import ABC, abstractmethod
from collections import OrderedDict
from concurrent.futures import Future
from typing import Iterable, Sequence

import numpy as np

from .coalition import Coalition, mask_matrix
from .errors import EvaluatorFailure, InvalidPlayer, PlayerInCoalition, SizeLimit

DEFAULT_CACHE_CAPACITY = 1 << 22
TABLE_GAME_MAX_PLAYERS = 20


class GameEvaluator(ABC):
    """Contract for a coalition value function v(S).

    Implementations must be deterministic: the same coalition yields the
    same score on every call.  ``concurrency_safe`` declares whether
    ``evaluate_batch`` may be entered from several threads at once; when
    False the caching layer serializes dispatch.
    """

    concurrency_safe: bool = True

    #: number of players the game is defined over
    n: int

    @property
    @abstractmethod
    def descriptor(self) -> str:
        """Stable identity string, used for cache keying and manifests."""

    @abstractmethod
    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        """Scores for the given coalitions, in input order."""

    def evaluate(self, coalition: Coalition) -> float:
        return self.evaluate_batch([coalition])[0]

    def _check_coalitions(self, coalitions: Sequence[Coalition]) -> None:
        for c in coalitions:
            if c.bits >> self.n:
                raise InvalidPlayer(
                    f"coalition with {c.n} players passed to game with n={self.n}"
                )


class EvalCache:
    """Bounded LRU map from coalition bits to score, with hit/miss counters.

    Thread safe; eviction only happens past ``capacity`` entries, so exact
    runs with n <= 20 never evict at the default budget.
    """

    def __init__(self, capacity: int = DEFAULT_CACHE_CAPACITY):
        if capacity < 1:
            raise ValueError("cache capacity must be positive")
        self.capacity = capacity
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()
        self._data: OrderedDict[int, float] = OrderedDict()

    def get(self, bits: int) -> float | None:
        with self._lock:
            value = self._data.get(bits)
            if value is None:
                self.misses += 1
                return None
            self._data.move_to_end(bits)
            self.hits += 1
            return value

    def put(self, bits: int, value: float) -> None:
        with self._lock:
            self._data[bits] = value
            self._data.move_to_end(bits)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


class CachedGame(GameEvaluator):
    """Memoizing wrapper: each distinct coalition hits the evaluator once.

    Batches are deduplicated before dispatch.  Concurrent callers asking
    for the same coalition are coalesced onto a single in-flight
    evaluation, so the at-most-once guarantee holds across threads.
    """

    concurrency_safe = True

    def __init__(self, game: GameEvaluator, cache: EvalCache | None = None):
        self._game = game
        self.n = game.n
        self.cache = cache if cache is not None else EvalCache()
        self._inflight: dict[int, Future] = {}
        self._lock = threading.Lock()
        self._dispatched = 0
        # non-concurrency-safe evaluators get serialized dispatch
        self._dispatch_lock = None if game.concurrency_safe else threading.Lock()

    @property
    def descriptor(self) -> str:
        return self._game.descriptor

    @property
    def evaluator_calls(self) -> int:
        """Coalitions actually sent to the wrapped evaluator so far."""
        return self._dispatched

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        todo: list[Coalition] = []
        waits: list[Future] = []
        resolved: dict[int, float] = {}
        pending: set[int] = set()
        with self._lock:
            for c in coalitions:
                bits = c.bits
                if bits in resolved or bits in pending:
                    continue
                cached = self.cache.get(bits)
                if cached is not None:
                    resolved[bits] = cached
                elif bits in self._inflight:
                    waits.append(self._inflight[bits])
                    pending.add(bits)
                else:
                    fut: Future = Future()
                    self._inflight[bits] = fut
                    todo.append(c)
                    pending.add(bits)
            self._dispatched += len(todo)

        if todo:
            try:
                if self._dispatch_lock is not None:
                    with self._dispatch_lock:
                        scores = self._game.evaluate_batch(todo)
                else:
                    scores = self._game.evaluate_batch(todo)
            except Exception as exc:
                with self._lock:
                    for c in todo:
                        fut = self._inflight.pop(c.bits)
                        fut.set_exception(exc)
                if isinstance(exc, EvaluatorFailure):
                    raise
                raise EvaluatorFailure(str(exc), coalitions=todo) from exc
            if len(scores) != len(todo):
                raise EvaluatorFailure(
                    f"evaluator returned {len(scores)} scores for {len(todo)} coalitions",
                    coalitions=todo,
                )
            with self._lock:
                for c, s in zip(todo, scores):
                    value = float(s)
                    self.cache.put(c.bits, value)
                    resolved[c.bits] = value
                    self._inflight.pop(c.bits).set_result(value)

        for fut in waits:
            fut.result()

        out = []
        for c in coalitions:
            value = resolved.get(c.bits)
            if value is None:
                value = self.cache.get(c.bits)
            if value is None:  # raced with eviction or another thread's error
                value = self.evaluate_batch([c])[0]
            out.append(value)
        return out


def evaluate_cached(
    game: GameEvaluator,
    coalitions: Sequence[Coalition],
    cache: EvalCache | None = None,
) -> list[float]:
    """Score coalitions through a memoizing layer.

    Pass an :class:`EvalCache` to persist memoization across calls;
    wrapping the game in :class:`CachedGame` once is equivalent.
    """
    if isinstance(game, CachedGame):
        return game.evaluate_batch(coalitions)
    return CachedGame(game, cache).evaluate_batch(coalitions)


def delta_v(game: GameEvaluator, context: Coalition, i: int, j: int) -> float:
    """Pair synergy of (i, j) under a fixed context S.

    Returns v(S+ij) - v(S+i) - v(S+j) + v(S) from at most four underlying
    evaluations (fewer when the game is cached).
    """
    n = game.n
    if i == j:
        raise InvalidPlayer(f"pair players must be distinct, got ({i}, {j})")
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidPlayer(f"pair ({i}, {j}) out of range for n={n}")
    if i in context or j in context:
        raise PlayerInCoalition(f"players ({i}, {j}) must not be in the context")
    both, only_i, only_j = context.add(i, j), context.add(i), context.add(j)
    v11, v10, v01, v00 = game.evaluate_batch([both, only_i, only_j, context])
    return v11 - v10 - v01 + v00


# ---------------------------------------------------------------------------
# Built-in games used as analytic oracles


class AdditiveGame(GameEvaluator):
    """v(S) = sum of per-player weights over S; all interactions vanish."""

    def __init__(self, weights: Sequence[float], label: str = ""):
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.ndim != 1 or self.weights.size < 1:
            raise SizeLimit("additive game needs a 1-d, non-empty weight vector")
        self.n = int(self.weights.size)
        self._label = label or hashlib.sha256(self.weights.tobytes()).hexdigest()[:12]

    @property
    def descriptor(self) -> str:
        return f"additive:n={self.n}:w={self._label}"

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        masks = mask_matrix(coalitions, self.n).astype(np.float64)
        return (masks @ self.weights).tolist()


class PairAndGame(GameEvaluator):
    """v(S) = c when the designated pair is fully inside S, else 0."""

    def __init__(self, n: int, i: int, j: int, c: float = 1.0):
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise InvalidPlayer(f"bad pair ({i}, {j}) for n={n}")
        self.n = n
        self.i, self.j, self.c = i, j, float(c)

    @property
    def descriptor(self) -> str:
        return f"pair_and:n={self.n}:i={self.i}:j={self.j}:c={self.c!r}"

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        need = (1 << self.i) | (1 << self.j)
        return [self.c if (c.bits & need) == need else 0.0 for c in coalitions]


class FullCoalitionGame(GameEvaluator):
    """v(N) = c and zero on every proper subset; pure memorization."""

    def __init__(self, n: int, c: float = 1.0):
        self.n = n
        self.c = float(c)

    @property
    def descriptor(self) -> str:
        return f"full_coalition:n={self.n}:c={self.c!r}"

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        full = (1 << self.n) - 1
        return [self.c if c.bits == full else 0.0 for c in coalitions]


class TableGame(GameEvaluator):
    """Explicit score table over all 2**n coalitions (n <= 20)."""

    def __init__(self, n: int, table: np.ndarray, label: str = ""):
        if n > TABLE_GAME_MAX_PLAYERS:
            raise SizeLimit(f"table game limited to n <= {TABLE_GAME_MAX_PLAYERS}, got {n}")
        table = np.asarray(table, dtype=np.float64)
        if table.shape != (1 << n,):
            raise SizeLimit(f"table must have 2**{n} entries, got {table.shape}")
        self.n = n
        self.table = table
        self._label = label or hashlib.sha256(table.tobytes()).hexdigest()[:12]

    @classmethod
    def seeded(cls, n: int, seed: int) -> "TableGame":
        if n > TABLE_GAME_MAX_PLAYERS:
            raise SizeLimit(f"table game limited to n <= {TABLE_GAME_MAX_PLAYERS}, got {n}")
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
        return cls(n, rng.standard_normal(1 << n), label=f"seed{seed}")

    @property
    def descriptor(self) -> str:
        return f"table:n={self.n}:{self._label}"

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        idx = np.fromiter((c.bits for c in coalitions), dtype=np.int64, count=len(coalitions))
        return self.table[idx].tolist()


class SignedContextGame(GameEvaluator):
    """Game whose pair deltas carry a chosen per-context sign.

    For the designated pair (i, j), delta_v(S, i, j) equals the signed
    unit drawn from the context table: +1 everywhere in ``positive`` mode,
    alternating +1/-1 along each order's lexicographic context enumeration
    in ``alternating`` mode, and seeded Rademacher signs in ``random``
    mode.
    """

    MODES = ("positive", "alternating", "random")

    def __init__(self, n: int, i: int, j: int, signs: str = "positive", seed: int = 0):
        if n > TABLE_GAME_MAX_PLAYERS:
            raise SizeLimit(f"signed-context game limited to n <= {TABLE_GAME_MAX_PLAYERS}")
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise InvalidPlayer(f"bad pair ({i}, {j}) for n={n}")
        if signs not in self.MODES:
            raise ValueError(f"signs must be one of {self.MODES}")
        self.n, self.i, self.j = n, i, j
        self.signs = signs
        self.seed = seed
        self._table = self._build_sign_table()

    def _build_sign_table(self) -> dict[int, float]:
        others = [k for k in range(self.n) if k not in (self.i, self.j)]
        table: dict[int, float] = {}
        if self.signs == "random":
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(2,)))
        for m in range(len(others) + 1):
            for rank, combo in enumerate(itertools.combinations(others, m)):
                bits = 0
                for k in combo:
                    bits |= 1 << k
                if self.signs == "positive":
                    table[bits] = 1.0
                elif self.signs == "alternating":
                    table[bits] = 1.0 if rank % 2 == 0 else -1.0
                else:
                    table[bits] = float(rng.integers(0, 2) * 2 - 1)
        return table

    @property
    def descriptor(self) -> str:
        return (
            f"signed_context:n={self.n}:i={self.i}:j={self.j}"
            f":signs={self.signs}:seed={self.seed}"
        )

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        need = (1 << self.i) | (1 << self.j)
        out = []
        for c in coalitions:
            if (c.bits & need) == need:
                out.append(self._table[c.bits & ~need])
            else:
                out.append(0.0)
        return out


class LocalPairsGame(GameEvaluator):
    """Sum of damped pair detectors over adjacent cells of a g x g grid.

    Each 4-neighborhood pair (a, b) contributes c_ab when both cells are
    present, scaled by damping**(extra context size).  The damping makes
    the response of a local detector fade as the context grows, which
    concentrates interaction strength at low orders; with damping = 1 the
    game degenerates to a plain sum of pair-AND terms and the strength
    profile is flat across orders.
    """

    def __init__(self, g: int, coef: float = 1.0, damping: float = 0.5, seed: int = 0):
        if g < 2:
            raise SizeLimit("local-pairs game needs g >= 2")
        if not 0.0 < damping <= 1.0:
            raise ValueError("damping must be in (0, 1]")
        self.g = g
        self.n = g * g
        self.damping = float(damping)
        self.seed = seed
        pairs = []
        for r in range(g):
            for c in range(g):
                cell = r * g + c
                if c + 1 < g:
                    pairs.append((cell, cell + 1))
                if r + 1 < g:
                    pairs.append((cell, cell + g))
        self.pairs = tuple(pairs)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
        self.coefs = coef * rng.uniform(0.5, 1.5, len(pairs))

    @property
    def descriptor(self) -> str:
        return f"local_pairs:g={self.g}:damping={self.damping!r}:seed={self.seed}"

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        masks = mask_matrix(coalitions, self.n).astype(np.float64)
        sizes = masks.sum(axis=1)
        scores = np.zeros(len(coalitions))
        for (a, b), c_ab in zip(self.pairs, self.coefs):
            both = masks[:, a] * masks[:, b]
            scores += c_ab * both * self.damping ** (sizes - 2.0)
        return scores.tolist()


class FreezePlayerGame(GameEvaluator):
    """Restriction of a game to n-1 players with one player frozen.

    Remaining players are relabeled 0..n-2, skipping the frozen id.  Used
    by the marginal-attribution check: the pair interaction index equals
    the difference of player j's Shapley value between the frozen-present
    and frozen-absent restrictions.
    """

    def __init__(self, game: GameEvaluator, player: int, present: bool):
        if not 0 <= player < game.n:
            raise InvalidPlayer(f"player {player} out of range for n={game.n}")
        self._game = game
        self.player = player
        self.present = present
        self.n = game.n - 1
        self._map = [k for k in range(game.n) if k != player]

    @property
    def descriptor(self) -> str:
        state = "present" if self.present else "absent"
        return f"freeze[{self._game.descriptor}:player={self.player}:{state}]"

    def evaluate_batch(self, coalitions: Sequence[Coalition]) -> list[float]:
        self._check_coalitions(coalitions)
        base = (1 << self.player) if self.present else 0
        lifted = []
        for c in coalitions:
            bits = base
            rem = c.bits
            while rem:
                low = rem & -rem
                bits |= 1 << self._map[low.bit_length() - 1]
                rem ^= low
            lifted.append(Coalition(self._game.n, bits))
        return self._game.evaluate_batch(lifted)


_SYNTHETIC_KINDS = (
    "additive",
    "pair_and",
    "full_coalition",
    "table",
    "signed_context",
    "local_pairs",
)


def make_synthetic(kind: str, seed: int = 0, **params) -> GameEvaluator:
    """Deterministic factory for the built-in games.

    The same (kind, seed, params) always produces the same game; the
    descriptor encodes the full identity.
    """
    if kind == "additive":
        weights = params.get("weights")
        if weights is None:
            n = int(params["n"])
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(4,)))
            return AdditiveGame(rng.uniform(-1.0, 1.0, n), label=f"seed{seed}")
        return AdditiveGame(weights)
    if kind == "pair_and":
        return PairAndGame(int(params["n"]), int(params.get("i", 0)),
                           int(params.get("j", 1)), float(params.get("c", 1.0)))
    if kind == "full_coalition":
        return FullCoalitionGame(int(params["n"]), float(params.get("c", 1.0)))
    if kind == "table":
        return TableGame.seeded(int(params["n"]), seed)
    if kind == "signed_context":
        return SignedContextGame(int(params["n"]), int(params.get("i", 0)),
                                 int(params.get("j", 1)),
                                 signs=params.get("signs", "positive"), seed=seed)
    if kind == "local_pairs":
        return LocalPairsGame(int(params.get("g", 3)), coef=float(params.get("coef", 1.0)),
                              damping=float(params.get("damping", 0.5)), seed=seed)
    raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {_SYNTHETIC_KINDS}")
