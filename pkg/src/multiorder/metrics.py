"""Order-indexed aggregate metrics over recorded interaction profiles.

All expectations are nested sample-then-pair means: E_x E_{i,j}[...] is
the mean over samples of the mean over that sample's recorded pairs.
Pairs are unordered and distinct (i != j throughout).  Summation is
compensated, so results do not depend on reduction order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

from .engine import InteractionProfile
from .errors import (
    AllZeroStrength,
    DegenerateGame,
    DeltasNotRetained,
    GridMismatch,
    MissingOrder,
    OrderGridMismatch,
    ZeroDenominatorWarning,
    ZeroStrength,
)

PROFILE_KINDS = (
    "strength",
    "normalized",
    "disentanglement",
    "purity",
    "average",
    "delta",
)


@dataclass(frozen=True)
class SampleRecord:
    """Interaction profiles of one input sample plus its score range."""

    sample_id: str
    profiles: tuple[InteractionProfile, ...]
    v_full: float
    v_empty: float

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if not self.profiles:
            raise MissingOrder(f"sample {self.sample_id!r} has no profiles")
        n = self.profiles[0].n
        if any(p.n != n for p in self.profiles):
            raise GridMismatch(f"sample {self.sample_id!r} mixes player counts")
        pairs = [(p.i, p.j) for p in self.profiles]
        if len(set(pairs)) != len(pairs):
            raise GridMismatch(f"sample {self.sample_id!r} repeats a pair")

    @property
    def n(self) -> int:
        return self.profiles[0].n


@dataclass(frozen=True)
class SampleRecordSet:
    """A set of per-sample records sharing one player universe."""

    records: tuple[SampleRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise MissingOrder("record set is empty")
        n = self.records[0].n
        if any(r.n != n for r in self.records):
            raise GridMismatch("records mix player counts")

    @classmethod
    def single(
        cls,
        sample_id: str,
        profiles: Sequence[InteractionProfile],
        v_full: float,
        v_empty: float,
    ) -> "SampleRecordSet":
        return cls((SampleRecord(sample_id, tuple(profiles), v_full, v_empty),))

    @property
    def n(self) -> int:
        return self.records[0].n

    def orders(self) -> tuple[int, ...]:
        """Orders recorded in every profile of every sample."""
        common: set[int] | None = None
        for rec in self.records:
            for prof in rec.profiles:
                got = set(prof.orders)
                common = got if common is None else common & got
        return tuple(sorted(common or ()))


@dataclass(frozen=True)
class OrderProfile:
    """A metric evaluated along an order grid."""

    orders: tuple[int, ...]
    values: tuple[float, ...]
    kind: str
    stderrs: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(int(m) for m in self.orders))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.stderrs is not None:
            object.__setattr__(self, "stderrs", tuple(float(s) for s in self.stderrs))
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"kind must be one of {PROFILE_KINDS}, got {self.kind!r}")
        if len(self.orders) != len(self.values):
            raise OrderGridMismatch("orders and values must align")
        if self.stderrs is not None and len(self.stderrs) != len(self.orders):
            raise OrderGridMismatch("stderrs must align with orders")
        if list(self.orders) != sorted(set(self.orders)):
            raise OrderGridMismatch(f"orders must be sorted and distinct: {self.orders}")
        finite = [v for v in self.values if not math.isnan(v)]
        if self.kind == "normalized" and finite:
            mean = math.fsum(finite) / len(finite)
            if len(finite) == len(self.values) and abs(mean - 1.0) > 1e-9:
                raise OrderGridMismatch(f"normalized profile averages to {mean}, not 1")
        if self.kind in ("purity", "disentanglement"):
            for v in finite:
                if not -1e-12 <= v <= 1.0 + 1e-12:
                    raise OrderGridMismatch(f"{self.kind} value {v} outside [0, 1]")


def _pair_means(rec: SampleRecord, m: int) -> list[float]:
    means = []
    for prof in rec.profiles:
        try:
            means.append(prof.by_order(m).mean)
        except Exception:
            raise MissingOrder(
                f"order {m} missing from pair ({prof.i}, {prof.j}) "
                f"of sample {rec.sample_id!r}"
            ) from None
    return means


def _nested_mean(records: SampleRecordSet, m: int, f: Callable[[float], float]) -> float:
    per_sample = []
    for rec in records.records:
        means = _pair_means(rec, m)
        per_sample.append(math.fsum(f(v) for v in means) / len(means))
    return math.fsum(per_sample) / len(per_sample)


def strength(records: SampleRecordSet, m: int) -> float:
    """Mean absolute order-m interaction over samples and pairs."""
    return _nested_mean(records, m, abs)


def average_interaction(records: SampleRecordSet, m: int) -> float:
    """Signed mean order-m interaction over samples and pairs."""
    return _nested_mean(records, m, lambda v: v)


def purity(records: SampleRecordSet, m: int) -> float:
    """Share of order-m interaction strength carried by positive pairs."""
    s = strength(records, m)
    if s == 0.0:
        raise ZeroStrength(f"strength at order {m} is zero; purity undefined")
    positive = _nested_mean(records, m, lambda v: max(v, 0.0))
    return positive / s


def disentanglement(records: SampleRecordSet, m: int) -> float:
    """How consistently signed the per-context synergies are at order m.

    Ratio of E_x E_{i!=j} |sum of retained deltas| to E_x E_{i!=j} of the
    sum of their absolutes; 1 means every context pushes the same way.
    Under sampling the retained contexts stand in for the full sums (a
    ratio estimator, slightly biased).  A zero denominator is defined as
    1 by convention and flagged with a warning.
    """
    num_terms, den_terms = [], []
    for rec in records.records:
        nums, dens = [], []
        for prof in rec.profiles:
            est = prof.by_order(m) if m in prof.orders else None
            if est is None:
                raise MissingOrder(
                    f"order {m} missing from pair ({prof.i}, {prof.j}) "
                    f"of sample {rec.sample_id!r}"
                )
            if est.deltas is None:
                raise DeltasNotRetained(
                    f"pair ({prof.i}, {prof.j}) of sample {rec.sample_id!r} "
                    f"kept no per-context deltas at order {m}"
                )
            nums.append(abs(math.fsum(est.deltas)))
            dens.append(math.fsum(abs(d) for d in est.deltas))
        num_terms.append(math.fsum(nums) / len(nums))
        den_terms.append(math.fsum(dens) / len(dens))
    num = math.fsum(num_terms) / len(num_terms)
    den = math.fsum(den_terms) / len(den_terms)
    if den == 0.0:
        warnings.warn(
            f"zero synergy denominator at order {m}; disentanglement defined as 1",
            ZeroDenominatorWarning,
        )
        return 1.0
    return num / den


def normalized_strength(records: SampleRecordSet, orders: Sequence[int] | None = None) -> OrderProfile:
    """Strength per order divided by its mean over the recorded orders.

    The output averages to 1 by construction, which makes profiles of
    differently scaled games comparable.
    """
    grid = tuple(orders) if orders is not None else records.orders()
    if not grid:
        raise MissingOrder("no common orders recorded across samples")
    raw = [strength(records, m) for m in grid]
    z = math.fsum(raw) / len(raw)
    if z == 0.0:
        raise AllZeroStrength("strength is zero at every recorded order")
    return OrderProfile(grid, tuple(v / z for v in raw), "normalized")


def flexibility_delta(a: OrderProfile, b: OrderProfile) -> OrderProfile:
    """Element-wise |a - b| of two normalized strength profiles."""
    if a.kind != "normalized" or b.kind != "normalized":
        raise OrderGridMismatch(
            f"flexibility compares normalized profiles, got {a.kind!r} vs {b.kind!r}"
        )
    if a.orders != b.orders:
        raise OrderGridMismatch(f"order grids differ: {a.orders} vs {b.orders}")
    return OrderProfile(a.orders, tuple(abs(x - y) for x, y in zip(a.values, b.values)), "delta")


def eta_order(n: int) -> int:
    """The high-order probe point: 0.9n rounded to nearest, capped at n-2."""
    return min(n - 2, round(0.9 * n))


def eta(records: SampleRecordSet, game=None) -> float:
    """High-order reliance of a single sample.

    Mean absolute pair interaction at order round(0.9 n), clamped to
    n-2, normalized by |v(N) - v(empty)|.  The score range comes from the
    record; pass a game to recompute it instead.
    """
    if len(records.records) != 1:
        raise DegenerateGame("eta is defined per sample; pass a single-sample set")
    rec = records.records[0]
    m_star = eta_order(records.n)
    if game is not None:
        from .coalition import Coalition

        v_full = game.evaluate(Coalition.full(game.n))
        v_empty = game.evaluate(Coalition.empty(game.n))
    else:
        v_full, v_empty = rec.v_full, rec.v_empty
    z = abs(v_full - v_empty)
    if z <= 1e-12:
        raise DegenerateGame("v(N) equals v(empty); eta undefined")
    return strength(records, m_star) / z


def order_profile(
    records: SampleRecordSet,
    which: str,
    orders: Sequence[int] | None = None,
    on_degenerate: str = "nan",
) -> OrderProfile:
    """Evaluate one metric along an order grid.

    ``on_degenerate`` controls orders where the metric is undefined
    (zero strength): "nan" records a flagged sentinel so dataset-scale
    runs survive degenerate samples, "raise" propagates the error.
    """
    if which == "normalized":
        return normalized_strength(records, orders)
    ops: dict[str, Callable[[SampleRecordSet, int], float]] = {
        "strength": strength,
        "average": average_interaction,
        "purity": purity,
        "disentanglement": disentanglement,
    }
    if which not in ops:
        raise ValueError(f"unknown metric {which!r}; expected one of {sorted(ops) + ['normalized']}")
    if on_degenerate not in ("nan", "raise"):
        raise ValueError("on_degenerate must be 'nan' or 'raise'")
    grid = tuple(orders) if orders is not None else records.orders()
    if not grid:
        raise MissingOrder("no common orders recorded across samples")
    values = []
    for m in grid:
        try:
            values.append(ops[which](records, m))
        except ZeroStrength:
            if on_degenerate == "raise":
                raise
            warnings.warn(
                f"{which} undefined at order {m}; recording NaN", ZeroDenominatorWarning
            )
            values.append(float("nan"))
    return OrderProfile(grid, tuple(values), which)


def compare_sets(a: SampleRecordSet, b: SampleRecordSet, metric: str) -> OrderProfile:
    """Per-order difference metric(a) - metric(b) between two sets."""
    if metric not in ("avg", "purity"):
        raise ValueError(f"metric must be 'avg' or 'purity', got {metric!r}")
    if a.n != b.n:
        raise GridMismatch(f"player counts differ: {a.n} vs {b.n}")
    grid_a, grid_b = a.orders(), b.orders()
    if grid_a != grid_b:
        raise GridMismatch(f"order grids differ: {grid_a} vs {grid_b}")
    which = "average" if metric == "avg" else "purity"
    pa = order_profile(a, which, orders=grid_a)
    pb = order_profile(b, which, orders=grid_b)
    return OrderProfile(grid_a, tuple(x - y for x, y in zip(pa.values, pb.values)), "delta")
