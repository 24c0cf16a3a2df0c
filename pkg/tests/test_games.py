"""Built-in games, the caching layer, and pair deltas."""

import threading

import numpy as np
import pytest

from multiorder.coalition import Coalition
from multiorder.errors import (
    EvaluatorFailure,
    InvalidPlayer,
    PlayerInCoalition,
    SizeLimit,
)
from multiorder.games import (
    AdditiveGame,
    CachedGame,
    EvalCache,
    FreezePlayerGame,
    FullCoalitionGame,
    GameEvaluator,
    LocalPairsGame,
    PairAndGame,
    SignedContextGame,
    TableGame,
    delta_v,
    evaluate_cached,
    make_synthetic,
)

from .oracles import delta_brute, game_fn, subsets


def coalitions_of(n):
    return [Coalition(n, bits) for bits in range(1 << n)]


class CountingGame(GameEvaluator):
    """Additive toy that records every batch it is asked to score."""

    def __init__(self, n=6, concurrency_safe=True):
        self.n = n
        self.concurrency_safe = concurrency_safe
        self.batches = []
        self.active = 0
        self.max_active = 0
        self._lock = threading.Lock()

    @property
    def descriptor(self):
        return f"counting:n={self.n}"

    def evaluate_batch(self, coalitions):
        with self._lock:
            self.active += 1
            self.max_active = max(self.max_active, self.active)
            self.batches.append([c.bits for c in coalitions])
        out = [float(c.size) for c in coalitions]
        with self._lock:
            self.active -= 1
        return out


class TestSyntheticGames:
    def test_additive_is_sum_of_weights(self):
        g = AdditiveGame([1.0, -2.0, 0.5])
        assert g.evaluate(Coalition.from_members(3, [0, 2])) == pytest.approx(1.5)
        assert g.evaluate(Coalition.empty(3)) == 0.0

    def test_pair_and_requires_both(self):
        g = PairAndGame(5, 1, 3, c=2.5)
        assert g.evaluate(Coalition.from_members(5, [1, 3])) == 2.5
        assert g.evaluate(Coalition.from_members(5, [1, 3, 4])) == 2.5
        assert g.evaluate(Coalition.from_members(5, [1])) == 0.0
        assert g.evaluate(Coalition.from_members(5, [3, 4])) == 0.0

    def test_full_coalition_only_grand(self):
        g = FullCoalitionGame(4, c=3.0)
        assert g.evaluate(Coalition.full(4)) == 3.0
        assert all(g.evaluate(c) == 0.0 for c in coalitions_of(4) if c.size < 4)

    def test_table_game_round_trip(self):
        g = TableGame.seeded(5, seed=7)
        again = TableGame.seeded(5, seed=7)
        assert np.array_equal(g.table, again.table)
        assert g.descriptor == again.descriptor
        other = TableGame.seeded(5, seed=8)
        assert not np.array_equal(g.table, other.table)

    def test_table_game_size_limit(self):
        with pytest.raises(SizeLimit):
            TableGame.seeded(21, seed=0)

    def test_signed_context_positive_deltas(self):
        g = SignedContextGame(5, 0, 1, signs="positive")
        v = game_fn(g)
        for s in subsets([2, 3, 4]):
            assert delta_brute(v, s, 0, 1) == pytest.approx(1.0)

    def test_signed_context_alternating_cancels_even_counts(self):
        # m=1 over n=6 gives four contexts per order, +1 -1 +1 -1
        g = SignedContextGame(6, 0, 1, signs="alternating")
        v = game_fn(g)
        deltas = [delta_brute(v, s, 0, 1) for s in subsets([2, 3, 4, 5], 1)]
        assert deltas == [1.0, -1.0, 1.0, -1.0]

    def test_signed_context_random_is_seeded(self):
        a = SignedContextGame(5, 0, 1, signs="random", seed=3)
        b = SignedContextGame(5, 0, 1, signs="random", seed=3)
        assert all(a.evaluate(c) == b.evaluate(c) for c in coalitions_of(5))

    def test_local_pairs_counts_grid_edges(self):
        g = LocalPairsGame(3, damping=0.5, seed=0)
        assert g.n == 9
        assert len(g.pairs) == 12  # 2*g*(g-1) four-neighborhood edges

    def test_local_pairs_damping_scales_context(self):
        g = LocalPairsGame(3, coef=1.0, damping=0.5, seed=1)
        bare = g.evaluate(Coalition.from_members(9, [0, 1]))
        # cell 8 is the far corner, adjacent to neither 0 nor 1, so the
        # only effect is halving the (0, 1) detector
        with_ctx = g.evaluate(Coalition.from_members(9, [0, 1, 8]))
        assert with_ctx == pytest.approx(0.5 * bare)

    def test_make_synthetic_deterministic(self):
        a = make_synthetic("table", seed=5, n=6)
        b = make_synthetic("table", seed=5, n=6)
        assert a.descriptor == b.descriptor
        assert np.array_equal(a.table, b.table)

    def test_make_synthetic_rejects_unknown(self):
        with pytest.raises(ValueError):
            make_synthetic("nope", n=4)

    def test_wrong_n_coalition_rejected(self):
        g = AdditiveGame([1.0, 2.0])
        with pytest.raises(InvalidPlayer):
            g.evaluate_batch([Coalition.from_members(5, [4])])


class TestDeltaV:
    def test_matches_four_term_oracle(self):
        g = TableGame.seeded(6, seed=11)
        v = game_fn(g)
        for s in subsets([2, 3, 4, 5]):
            ctx = Coalition.from_members(6, s)
            assert delta_v(g, ctx, 0, 1) == pytest.approx(delta_brute(v, s, 0, 1))

    def test_rejects_equal_players(self):
        g = TableGame.seeded(4, seed=0)
        with pytest.raises(InvalidPlayer):
            delta_v(g, Coalition.empty(4), 2, 2)

    def test_rejects_player_in_context(self):
        g = TableGame.seeded(4, seed=0)
        with pytest.raises(PlayerInCoalition):
            delta_v(g, Coalition.from_members(4, [1]), 1, 2)

    def test_rejects_out_of_range(self):
        g = TableGame.seeded(4, seed=0)
        with pytest.raises(InvalidPlayer):
            delta_v(g, Coalition.empty(4), 0, 4)


class TestEvalCache:
    def test_lru_eviction(self):
        cache = EvalCache(capacity=2)
        cache.put(1, 1.0)
        cache.put(2, 2.0)
        assert cache.get(1) == 1.0  # refresh 1
        cache.put(3, 3.0)  # evicts 2
        assert cache.get(2) is None
        assert cache.get(1) == 1.0 and cache.get(3) == 3.0

    def test_counters(self):
        cache = EvalCache()
        cache.put(0, 0.5)
        cache.get(0)
        cache.get(9)
        assert cache.hits == 1 and cache.misses == 1
        assert cache.hit_rate == 0.5

    def test_rejects_bad_capacity(self):
        with pytest.raises(ValueError):
            EvalCache(capacity=0)


class TestCachedGame:
    def test_each_coalition_evaluated_once(self):
        inner = CountingGame()
        g = CachedGame(inner)
        cs = [Coalition.from_members(6, m) for m in ([0], [1], [0])]
        assert g.evaluate_batch(cs) == [1.0, 1.0, 1.0]
        g.evaluate_batch(cs)
        seen = [b for batch in inner.batches for b in batch]
        assert sorted(seen) == [1, 2]
        assert g.evaluator_calls == 2

    def test_batch_dedup_within_call(self):
        inner = CountingGame()
        g = CachedGame(inner)
        c = Coalition.from_members(6, [2, 3])
        out = g.evaluate_batch([c, c, c])
        assert out == [2.0, 2.0, 2.0]
        assert sum(len(b) for b in inner.batches) == 1

    def test_concurrent_callers_coalesce(self):
        inner = CountingGame()
        g = CachedGame(inner)
        cs = [Coalition(6, bits) for bits in range(40)]
        results = {}

        def worker(tid):
            results[tid] = g.evaluate_batch(cs)

        threads = [threading.Thread(target=worker, args=(t,)) for t in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        expected = [float(c.size) for c in cs]
        assert all(results[t] == expected for t in range(8))
        seen = [b for batch in inner.batches for b in batch]
        assert sorted(seen) == sorted(set(seen))  # at most once each

    def test_serializes_non_concurrency_safe_games(self):
        inner = CountingGame(concurrency_safe=False)
        g = CachedGame(inner)
        cs = [Coalition(6, bits) for bits in range(64)]

        def worker(lo):
            g.evaluate_batch(cs[lo::4])

        threads = [threading.Thread(target=worker, args=(lo,)) for lo in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert inner.max_active == 1

    def test_failure_carries_coalitions(self):
        class Broken(GameEvaluator):
            n = 4
            descriptor = "broken"

            def evaluate_batch(self, coalitions):
                raise RuntimeError("score backend down")

        bad = Coalition.from_members(4, [1])
        with pytest.raises(EvaluatorFailure) as info:
            CachedGame(Broken()).evaluate_batch([bad])
        assert info.value.coalitions == (bad,)
        assert "score backend down" in str(info.value)

    def test_length_mismatch_is_failure(self):
        class Short(GameEvaluator):
            n = 4
            descriptor = "short"

            def evaluate_batch(self, coalitions):
                return [0.0]

        with pytest.raises(EvaluatorFailure):
            CachedGame(Short()).evaluate_batch(coalitions_of(4)[:3])

    def test_evaluate_cached_helper_shares_cache(self):
        inner = CountingGame()
        cache = EvalCache()
        c = Coalition.from_members(6, [0, 1])
        evaluate_cached(inner, [c], cache)
        evaluate_cached(inner, [c], cache)
        assert sum(len(b) for b in inner.batches) == 1


class TestFreezePlayerGame:
    def test_present_lifts_with_player(self):
        g = TableGame.seeded(5, seed=2)
        frozen = FreezePlayerGame(g, 2, present=True)
        assert frozen.n == 4
        # sub-coalition {0, 3} maps to original {0, 4} plus frozen 2
        sub = Coalition.from_members(4, [0, 3])
        want = g.evaluate(Coalition.from_members(5, [0, 2, 4]))
        assert frozen.evaluate(sub) == pytest.approx(want)

    def test_absent_drops_player(self):
        g = TableGame.seeded(5, seed=2)
        frozen = FreezePlayerGame(g, 2, present=False)
        sub = Coalition.from_members(4, [0, 3])
        want = g.evaluate(Coalition.from_members(5, [0, 4]))
        assert frozen.evaluate(sub) == pytest.approx(want)

    def test_rejects_bad_player(self):
        with pytest.raises(InvalidPlayer):
            FreezePlayerGame(TableGame.seeded(4, seed=0), 4, present=True)
