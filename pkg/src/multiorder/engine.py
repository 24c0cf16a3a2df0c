"""Exact and Monte Carlo interaction computation.

Implements the per-player attribution score, the order-m pair interaction
(the mean of the four-term synergy Delta v over contexts of size m), and
the accumulation identity that averages per-order means into the classic
pairwise interaction index.

Exact mode enumerates every context and is the ground truth for the
sampled estimator.  Sampled mode draws contexts from a per-(pair, order)
random stream, so results are reproducible bit for bit no matter how the
work is scheduled across threads.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb, fsum, sqrt
from typing import Iterable, Sequence

import numpy as np

from .coalition import Coalition
from .errors import (
    DegenerateOrder,
    ExactSizeLimit,
    IncompleteProfile,
    InvalidPlayer,
)
from .games import CachedGame, EvalCache, GameEvaluator

EXACT_PLAYER_LIMIT = 20
EXACT_CONTEXT_BUDGET = 1 << 20
_CHUNK = 4096


@dataclass(frozen=True)
class SamplingPlan:
    """How a sampled run draws its work: which orders, how many contexts
    per (pair, order), how many pairs per sample, and the base seed."""

    orders: tuple[int, ...]
    contexts_per_order: int = 100
    pairs_per_sample: int = 50
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(int(m) for m in self.orders))
        if len(self.orders) == 0:
            raise DegenerateOrder("sampling plan needs at least one order")
        if any(m < 0 for m in self.orders):
            raise DegenerateOrder(f"orders must be non-negative, got {self.orders}")
        if len(set(self.orders)) != len(self.orders):
            raise DegenerateOrder(f"orders must be distinct, got {self.orders}")
        if self.contexts_per_order < 1:
            raise ValueError("contexts_per_order must be >= 1")
        if self.pairs_per_sample < 1:
            raise ValueError("pairs_per_sample must be >= 1")

    def check_orders(self, n: int) -> None:
        bad = [m for m in self.orders if m > n - 2]
        if bad:
            raise DegenerateOrder(f"orders {bad} exceed n-2={n - 2}")


def default_orders(n: int, points: int = 18) -> tuple[int, ...]:
    """Evenly spaced order grid spanning 5% to 90% of the player count.

    Orders are rounded to integers, clamped to the valid range [0, n-2],
    and deduplicated, so small n yields fewer than ``points`` entries.
    """
    if n < 2:
        raise DegenerateOrder(f"need n >= 2 for any pair order, got n={n}")
    grid = np.linspace(0.05 * n, 0.9 * n, points)
    orders = {min(n - 2, max(0, int(round(m)))) for m in grid}
    return tuple(sorted(orders))


@dataclass(frozen=True)
class PairOrderEstimate:
    """Estimated order-m interaction of one pair.

    ``stderr`` is 0 for exact results and the sample standard error for
    Monte Carlo ones.  ``deltas`` optionally retains the per-context
    synergy samples behind the mean (needed by the disentanglement
    metric).
    """

    i: int
    j: int
    m: int
    mean: float
    stderr: float
    contexts_used: int
    deltas: tuple[float, ...] | None = None

    @property
    def exact(self) -> bool:
        return self.stderr == 0.0


@dataclass(frozen=True)
class InteractionProfile:
    """Per-order interaction estimates of one pair, sorted by order.

    A complete profile covers every order 0..n-2 and supports the
    accumulation identity; sampled runs produce partial profiles
    restricted to the planned orders.
    """

    n: int
    i: int
    j: int
    values: tuple[PairOrderEstimate, ...]

    def __post_init__(self):
        orders = [e.m for e in self.values]
        if orders != sorted(set(orders)):
            raise IncompleteProfile(f"orders must be sorted and distinct, got {orders}")
        if any(not (0 <= m <= self.n - 2) for m in orders):
            raise IncompleteProfile(f"orders {orders} out of range for n={self.n}")
        if any((e.i, e.j) != (self.i, self.j) for e in self.values):
            raise IncompleteProfile("estimates belong to a different pair")

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(e.m for e in self.values)

    @property
    def is_complete(self) -> bool:
        return self.orders == tuple(range(self.n - 1))

    def by_order(self, m: int) -> PairOrderEstimate:
        for e in self.values:
            if e.m == m:
                return e
        raise IncompleteProfile(f"order {m} not present in profile of pair ({self.i}, {self.j})")


def _check_pair(n: int, i: int, j: int) -> None:
    if i == j:
        raise InvalidPlayer(f"pair players must be distinct, got ({i}, {j})")
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidPlayer(f"pair ({i}, {j}) out of range for n={n}")


def _context_count(n: int, m: int) -> int:
    if not 0 <= m <= n - 2:
        raise DegenerateOrder(f"order m={m} must satisfy 0 <= m <= n-2 (n={n})")
    return comb(n - 2, m)


def shapley_value_exact(
    game: GameEvaluator,
    i: int,
    limit: int = EXACT_PLAYER_LIMIT,
    cardinality_weights: Sequence[float] | None = None,
) -> float:
    """Per-player attribution by full enumeration.

    Sums the marginal contribution of player i over every coalition of
    the remaining players, weighted per cardinality by 1/(n*C(n-1, s)).
    The per-cardinality form avoids factorial overflow at the size limit.

    ``cardinality_weights`` overrides the weight table; it exists so the
    self-check suite can corrupt the weights as a negative control.
    """
    n = game.n
    if n > limit:
        raise ExactSizeLimit(f"exact enumeration limited to n <= {limit}, got n={n}")
    if not 0 <= i < n:
        raise InvalidPlayer(f"player {i} out of range for n={n}")
    if cardinality_weights is None:
        weights = [1.0 / (n * comb(n - 1, s)) for s in range(n)]
    else:
        weights = [float(w) for w in cardinality_weights]
        if len(weights) != n:
            raise ValueError(f"need {n} cardinality weights, got {len(weights)}")

    others = [k for k in range(n) if k != i]
    bit_i = 1 << i
    terms: list[float] = []
    batch: list[Coalition] = []
    batch_meta: list[tuple[int, int]] = []  # (cardinality, sign) per coalition

    def flush():
        if not batch:
            return
        scores = game.evaluate_batch(batch)
        for (size, sign), v in zip(batch_meta, scores):
            terms.append(sign * weights[size] * v)
        batch.clear()
        batch_meta.clear()

    for picks in _all_subsets_bits(others):
        size = picks.bit_count()
        batch.append(Coalition(n, picks | bit_i))
        batch_meta.append((size, 1))
        batch.append(Coalition(n, picks))
        batch_meta.append((size, -1))
        if len(batch) >= 2 * _CHUNK:
            flush()
    flush()
    return fsum(terms)


def _all_subsets_bits(players: Sequence[int]) -> Iterable[int]:
    """All subset bitmasks of the given player ids, by increasing size."""
    for m in range(len(players) + 1):
        for combo in itertools.combinations(players, m):
            bits = 0
            for k in combo:
                bits |= 1 << k
            yield bits


def _pair_deltas(
    game: GameEvaluator, n: int, i: int, j: int, context_bits: Sequence[int]
) -> np.ndarray:
    """Batched four-term synergy for each context bitmask."""
    bit_i, bit_j = 1 << i, 1 << j
    out = np.empty(len(context_bits), dtype=np.float64)
    for lo in range(0, len(context_bits), _CHUNK):
        chunk = context_bits[lo : lo + _CHUNK]
        coalitions = []
        for bits in chunk:
            coalitions.append(Coalition(n, bits | bit_i | bit_j))
            coalitions.append(Coalition(n, bits | bit_i))
            coalitions.append(Coalition(n, bits | bit_j))
            coalitions.append(Coalition(n, bits))
        scores = np.asarray(game.evaluate_batch(coalitions), dtype=np.float64)
        scores = scores.reshape(len(chunk), 4)
        out[lo : lo + len(chunk)] = scores[:, 0] - scores[:, 1] - scores[:, 2] + scores[:, 3]
    return out


def multi_order_exact(
    game: GameEvaluator,
    i: int,
    j: int,
    m: int,
    retain_deltas: bool = False,
    context_budget: int = EXACT_CONTEXT_BUDGET,
) -> PairOrderEstimate:
    """Order-m interaction of (i, j) by enumerating every size-m context."""
    n = game.n
    _check_pair(n, i, j)
    count = _context_count(n, m)
    if count > context_budget:
        raise ExactSizeLimit(
            f"C({n - 2}, {m}) = {count} contexts exceed the exact budget {context_budget}"
        )
    others = [k for k in range(n) if k not in (i, j)]
    context_bits = []
    for combo in itertools.combinations(others, m):
        bits = 0
        for k in combo:
            bits |= 1 << k
        context_bits.append(bits)
    deltas = _pair_deltas(game, n, i, j, context_bits)
    mean = fsum(deltas.tolist()) / count
    return PairOrderEstimate(
        i=i, j=j, m=m, mean=mean, stderr=0.0, contexts_used=count,
        deltas=tuple(deltas.tolist()) if retain_deltas else None,
    )


def _sample_context_bits(
    rng: np.random.Generator, others: np.ndarray, m: int, draws: int
) -> list[int]:
    """Uniform size-m subsets of ``others``, with replacement across draws.

    Each draw runs the first m steps of a Fisher-Yates shuffle; the swap
    offsets for all draws come from one generator call so the stream
    consumption is a pure function of (draws, m).
    """
    width = len(others)
    if m == 0:
        return [0] * draws
    # A uniform size-m subset is the complement (within ``others``) of a
    # uniform size-(width - m) subset, so always shuffle the smaller side.
    take = min(m, width - m)
    flip = take != m
    full = 0
    if flip:
        for k in others.tolist():
            full |= 1 << k
        if take == 0:
            return [full] * draws
    offsets = rng.integers(0, width - np.arange(take), size=(draws, take))
    out = []
    pool = others.tolist()
    for d in range(draws):
        arr = pool.copy()
        row = offsets[d]
        for t in range(take):
            u = t + row[t]
            arr[t], arr[u] = arr[u], arr[t]
        bits = 0
        for k in arr[:take]:
            bits |= 1 << k
        out.append(full ^ bits if flip else bits)
    return out


def multi_order_sampled(
    game: GameEvaluator,
    i: int,
    j: int,
    m: int,
    plan: SamplingPlan,
    retain_deltas: bool = False,
) -> PairOrderEstimate:
    """Monte Carlo order-m interaction of (i, j).

    Contexts are drawn uniformly from the size-m subsets of the remaining
    players, with replacement, from a random stream derived from
    (plan.seed, i, j, m); the estimate does not depend on scheduling.
    When the plan asks for at least as many contexts as exist the
    estimator degrades to exact enumeration without replacement.

    ``stderr`` is the sample standard error; it needs at least two
    contexts and is NaN for a single genuinely sampled draw.
    """
    n = game.n
    _check_pair(n, i, j)
    count = _context_count(n, m)
    k_s = plan.contexts_per_order
    if k_s >= count:
        return multi_order_exact(game, i, j, m, retain_deltas=retain_deltas)
    rng = np.random.default_rng(np.random.SeedSequence(plan.seed, spawn_key=(i, j, m)))
    others = np.array([k for k in range(n) if k not in (i, j)], dtype=np.int64)
    context_bits = _sample_context_bits(rng, others, m, k_s)
    deltas = _pair_deltas(game, n, i, j, context_bits)
    mean = fsum(deltas.tolist()) / k_s
    stderr = float(np.std(deltas, ddof=1) / sqrt(k_s)) if k_s >= 2 else float("nan")
    return PairOrderEstimate(
        i=i, j=j, m=m, mean=mean, stderr=stderr, contexts_used=k_s,
        deltas=tuple(deltas.tolist()) if retain_deltas else None,
    )


def interaction_index(profile: InteractionProfile) -> float:
    """Pairwise interaction index via the accumulation identity.

    The index equals the plain mean of the order means over all orders
    0..n-2, so it needs a complete profile.
    """
    if not profile.is_complete:
        missing = sorted(set(range(profile.n - 1)) - set(profile.orders))
        raise IncompleteProfile(
            f"profile of pair ({profile.i}, {profile.j}) missing orders {missing}"
        )
    return fsum(e.mean for e in profile.values) / (profile.n - 1)


def profile_pairs(
    game: GameEvaluator,
    pairs: Sequence[tuple[int, int]],
    plan: SamplingPlan,
    mode: str = "exact",
    workers: int = 1,
    retain_deltas: bool = False,
    cache: EvalCache | None = None,
) -> list[InteractionProfile]:
    """Interaction profiles for many pairs, sharing one evaluation cache.

    Exact mode covers every order 0..n-2 regardless of the plan's order
    grid; sampled mode is restricted to plan.orders.  Results align with
    the input pair order and are identical for any worker count.
    """
    if mode not in ("exact", "sampled"):
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    n = game.n
    seen = set()
    for i, j in pairs:
        _check_pair(n, i, j)
        if (i, j) in seen:
            raise InvalidPlayer(f"duplicate pair ({i}, {j})")
        seen.add((i, j))
    if mode == "exact":
        orders = tuple(range(n - 1))
    else:
        plan.check_orders(n)
        orders = tuple(sorted(plan.orders))

    cached = game if isinstance(game, CachedGame) else CachedGame(game, cache)
    tasks = [(pi, (i, j), m) for pi, (i, j) in enumerate(pairs) for m in orders]

    def run(task):
        _, (i, j), m = task
        if mode == "exact":
            return multi_order_exact(cached, i, j, m, retain_deltas=retain_deltas)
        return multi_order_sampled(cached, i, j, m, plan, retain_deltas=retain_deltas)

    results: dict[tuple[int, int], PairOrderEstimate] = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for task, est in zip(tasks, pool.map(run, tasks)):
                results[(task[0], task[2])] = est
    else:
        for task in tasks:
            results[(task[0], task[2])] = run(task)

    return [
        InteractionProfile(
            n=n, i=i, j=j, values=tuple(results[(pi, m)] for m in orders)
        )
        for pi, (i, j) in enumerate(pairs)
    ]
