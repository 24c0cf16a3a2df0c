"""Built-in invariant suite for the exact attribution engine.

Runs six analytic properties against seeded score-table games and
reports the worst deviation seen for each.  Every property has an exact
answer, so a healthy build sits at rounding error (< 1e-9); anything
larger means the engine, not the game, is broken.

The checks, per player count:

efficiency            per-player attributions sum to v(N) - v(empty)
linearity             interactions of a*A + b*B split linearly
nullity               a do-nothing player gets zero everywhere
symmetry              interchangeable players get equal attributions
marginal-attribution  pair index equals the attribution shift caused
                      by freezing the partner in versus out
accumulation          mean of per-order interactions equals the
                      factorial-weighted interaction sum

``cardinality_weights`` feeds the same override that
``shapley_value_exact`` exposes; corrupting it is the suite's negative
control (efficiency must go red).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coalition import Coalition
from .engine import interaction_index, multi_order_exact, shapley_value_exact
from .games import FreezePlayerGame, GameEvaluator, TableGame

DEFAULT_SIZES = (4, 6, 8)
DEFAULT_TOLERANCE = 1e-9
PROPERTY_NAMES = (
    "efficiency",
    "linearity",
    "nullity",
    "symmetry",
    "marginal-attribution",
    "accumulation",
)


@dataclass(frozen=True)
class PropertyResult:
    """Worst deviation of one property across all checked games."""

    name: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance

    def format_line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{self.name:<22} max deviation {self.deviation:.3e} "
            f"(tolerance {self.tolerance:.0e})  {status}"
        )


@dataclass(frozen=True)
class SelfCheckReport:
    results: tuple[PropertyResult, ...]
    sizes: tuple[int, ...]
    elapsed: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def format_lines(self) -> list[str]:
        lines = [r.format_line() for r in self.results]
        verdict = "all properties hold" if self.passed else "PROPERTY VIOLATION"
        lines.append(
            f"{verdict} (n in {list(self.sizes)}, {self.elapsed:.2f}s)"
        )
        return lines


def _exact_profile_index(game: GameEvaluator, i: int, j: int) -> float:
    n = game.n
    means = [multi_order_exact(game, i, j, m).mean for m in range(n - 1)]
    return math.fsum(means) / (n - 1)


def _factorial_weight_index(game: GameEvaluator, i: int, j: int) -> float:
    """Interaction index straight from the factorial-weight definition.

    Independent of the per-order path: enumerates contexts once and
    weighs each by (n-s-2)! s! / (n-1)!.
    """
    n = game.n
    rest = [p for p in range(n) if p not in (i, j)]
    terms = []
    for bits in range(1 << len(rest)):
        context = 0
        for pos, player in enumerate(rest):
            if bits >> pos & 1:
                context |= 1 << player
        s = bin(context).count("1")
        weight = (
            math.factorial(n - s - 2) * math.factorial(s) / math.factorial(n - 1)
        )
        v00, v10, v01, v11 = game.evaluate_batch(
            [
                Coalition(n, context),
                Coalition(n, context | 1 << i),
                Coalition(n, context | 1 << j),
                Coalition(n, context | 1 << i | 1 << j),
            ]
        )
        terms.append(weight * (v11 - v10 - v01 + v00))
    return math.fsum(terms)


def _with_null_player(base: TableGame) -> TableGame:
    """Extend by one player whose presence never changes the score."""
    n = base.n + 1
    table = np.empty(1 << n)
    low = 1 << base.n
    table[:low] = base.table
    table[low:] = base.table
    return TableGame(n, table, label=f"{base.descriptor}+null")


def _with_twin_player(base: TableGame, twin: int) -> TableGame:
    """Extend by one player interchangeable with ``twin``.

    The new player acts through OR with the twin, so swapping the two
    never changes the score.
    """
    n = base.n + 1
    table = np.empty(1 << n)
    for bits in range(1 << n):
        projected = bits & ((1 << base.n) - 1)
        if bits >> base.n & 1:
            projected |= 1 << twin
        table[bits] = base.table[projected]
    return TableGame(n, table, label=f"{base.descriptor}+twin{twin}")


def _check_efficiency(
    game: GameEvaluator, weights: Sequence[float] | None
) -> float:
    n = game.n
    total = math.fsum(
        shapley_value_exact(game, i, cardinality_weights=weights) for i in range(n)
    )
    span = game.evaluate(Coalition.full(n)) - game.evaluate(Coalition.empty(n))
    return abs(total - span)


def _check_linearity(a: TableGame, b: TableGame, i: int, j: int) -> float:
    ca, cb = 2.5, -1.25
    mixed = TableGame(a.n, ca * a.table + cb * b.table, label="mix")
    worst = 0.0
    for m in range(a.n - 1):
        lhs = multi_order_exact(mixed, i, j, m).mean
        rhs = ca * multi_order_exact(a, i, j, m).mean + cb * multi_order_exact(b, i, j, m).mean
        worst = max(worst, abs(lhs - rhs))
    return worst


def _check_nullity(base: TableGame) -> float:
    game = _with_null_player(base)
    null = base.n
    worst = abs(shapley_value_exact(game, null))
    for m in range(game.n - 1):
        worst = max(worst, abs(multi_order_exact(game, 0, null, m).mean))
    return worst


def _check_symmetry(base: TableGame, twin: int) -> float:
    game = _with_twin_player(base, twin)
    added = base.n
    worst = abs(
        shapley_value_exact(game, twin) - shapley_value_exact(game, added)
    )
    other = next(p for p in range(base.n) if p != twin)
    for m in range(game.n - 1):
        lhs = multi_order_exact(game, min(other, twin), max(other, twin), m).mean
        rhs = multi_order_exact(game, other, added, m).mean
        worst = max(worst, abs(lhs - rhs))
    return worst


def _check_marginal_attribution(game: GameEvaluator, i: int, j: int) -> float:
    index = _exact_profile_index(game, i, j)
    j_sub = j - 1 if j > i else j
    present = shapley_value_exact(FreezePlayerGame(game, player=i, present=True), j_sub)
    absent = shapley_value_exact(FreezePlayerGame(game, player=i, present=False), j_sub)
    return abs(index - (present - absent))


def _check_accumulation(game: GameEvaluator, i: int, j: int) -> float:
    ordered = _exact_profile_index(game, i, j)
    weighted = _factorial_weight_index(game, i, j)
    return abs(ordered - weighted)


def run_selfcheck(
    sizes: Sequence[int] = DEFAULT_SIZES,
    seed: int = 2024,
    tolerance: float = DEFAULT_TOLERANCE,
    cardinality_weights: Sequence[float] | None = None,
) -> SelfCheckReport:
    """Run all six properties on seeded table games of the given sizes."""
    start = time.perf_counter()
    worst = dict.fromkeys(PROPERTY_NAMES, 0.0)
    for k, n in enumerate(sizes):
        a = TableGame.seeded(n, seed + 2 * k)
        b = TableGame.seeded(n, seed + 2 * k + 1)
        i, j = 0, n // 2
        worst["efficiency"] = max(
            worst["efficiency"], _check_efficiency(a, cardinality_weights)
        )
        worst["linearity"] = max(worst["linearity"], _check_linearity(a, b, i, j))
        worst["nullity"] = max(worst["nullity"], _check_nullity(a))
        worst["symmetry"] = max(worst["symmetry"], _check_symmetry(a, i))
        worst["marginal-attribution"] = max(
            worst["marginal-attribution"], _check_marginal_attribution(a, i, j)
        )
        worst["accumulation"] = max(
            worst["accumulation"], _check_accumulation(a, i, j)
        )
    results = tuple(
        PropertyResult(name=name, deviation=worst[name], tolerance=tolerance)
        for name in PROPERTY_NAMES
    )
    return SelfCheckReport(
        results=results, sizes=tuple(sizes), elapsed=time.perf_counter() - start
    )
