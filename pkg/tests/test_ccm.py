import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccmcoord.ccm import (
    EmbeddingParams,
    ccm_curve,
    ccm_score,
    cross_map,
    delay_embed,
    neighbor_query,
    pairwise_coordination,
    pearson,
    simplex_weights,
)
from ccmcoord.errors import InvalidInputError
from ccmcoord.synth import LogisticPairParams, coupled_logistic, signal_series

from oracles import naive_cross_map, naive_weights


def manifold_1d(values, theiler=0):
    return delay_embed(values, EmbeddingParams(E=1, tau=1, theiler=theiler))


class TestDelayEmbed:
    def test_point_count(self):
        m = delay_embed(np.arange(10.0), EmbeddingParams(E=3, tau=2))
        assert len(m) == 6

    def test_identity_embedding(self):
        x = np.array([3.0, 1.0, 4.0, 1.0, 5.0])
        m = delay_embed(x, EmbeddingParams(E=1, tau=1))
        assert len(m) == 5
        np.testing.assert_array_equal(m.points[:, 0], x)

    def test_most_recent_coordinate_first(self):
        m = delay_embed([0, 1, 2, 3, 4], EmbeddingParams(E=2, tau=1))
        np.testing.assert_array_equal(m.points[0], [1, 0])
        np.testing.assert_array_equal(m.points[-1], [4, 3])
        assert m.time_index[0] == 1 and m.time_index[-1] == 4

    def test_too_short_names_minimum(self):
        with pytest.raises(InvalidInputError, match="at least 7"):
            delay_embed(np.arange(6.0), EmbeddingParams(E=3, tau=1))

    def test_non_finite(self):
        with pytest.raises(InvalidInputError, match="non-finite"):
            delay_embed([0.0, 1.0, np.nan, 2.0, 3.0, 4.0, 5.0], EmbeddingParams(E=2))

    @given(n=st.integers(5, 200), E=st.integers(1, 5), tau=st.integers(1, 4))
    def test_length_property(self, n, E, tau):
        params = EmbeddingParams(E=E, tau=tau)
        if n < params.min_length():
            return
        m = delay_embed(np.arange(n, dtype=float), params)
        assert len(m) == n - (E - 1) * tau
        assert np.all(np.diff(m.time_index) > 0)
        # with x(t) = t, coordinate j equals t - j*tau
        expected = m.time_index[:, None] - tau * np.arange(E)[None, :]
        np.testing.assert_array_equal(m.points, expected)

    def test_default_theiler(self):
        assert EmbeddingParams(E=3, tau=2).theiler == 4
        assert EmbeddingParams(E=3, tau=2, theiler=0).theiler == 0

    @pytest.mark.parametrize("kwargs", [{"E": 0}, {"tau": 0}, {"theiler": -1}])
    def test_param_validation(self, kwargs):
        with pytest.raises(InvalidInputError):
            EmbeddingParams(**kwargs)


class TestNeighborQuery:
    def test_collinear(self):
        m = manifold_1d([0.0, 1.0, 3.0, 7.0, 9.0])
        # restrict to the first three points
        assert neighbor_query(m, 0, 2, candidates=[0, 1, 2]) == [(1, 1.0), (2, 3.0)]

    def test_duplicate_point_at_zero_distance(self):
        m = manifold_1d([2.0, 5.0, 8.0, 2.0, 11.0])
        nn = neighbor_query(m, 0, 1)
        assert nn == [(3, 0.0)]

    def test_theiler_excludes_temporal_neighbors(self):
        m = manifold_1d([0.0, 0.1, 0.2, 5.0, 6.0, 7.0], theiler=1)
        idx = [i for i, _ in neighbor_query(m, 2, 3)]
        assert 1 not in idx and 3 not in idx and 2 not in idx
        assert idx == [0, 4, 5]

    def test_ties_prefer_lower_index(self):
        m = manifold_1d([0.0, 1.0, -1.0, 1.0, -1.0])
        assert [i for i, _ in neighbor_query(m, 0, 4)] == [1, 2, 3, 4]

    def test_not_enough_admissible(self):
        m = manifold_1d([0.0, 1.0, 2.0], theiler=1)
        with pytest.raises(InvalidInputError):
            neighbor_query(m, 1, 1)


class TestSimplexWeights:
    def test_equal_distances(self):
        np.testing.assert_allclose(simplex_weights([0.7, 0.7, 0.7]), [1 / 3] * 3, rtol=1e-15)
        np.testing.assert_allclose(simplex_weights([0.0, 0.0, 0.0]), [1 / 3] * 3, rtol=1e-15)

    def test_exact_match_dominates(self):
        np.testing.assert_allclose(simplex_weights([0.0, 1.0, 2.0]), [1.0, 0.0, 0.0], atol=1e-300)

    def test_frozen_values(self):
        # scalar-arithmetic oracle: exp(-1), exp(-2), exp(-3) normalized
        expected = naive_weights([1.0, 2.0, 3.0])
        np.testing.assert_allclose(expected, [0.66524096, 0.24472847, 0.09003057], atol=1e-8)
        np.testing.assert_allclose(simplex_weights([1.0, 2.0, 3.0]), expected, rtol=1e-14)

    @pytest.mark.parametrize("bad", [[], [2.0, 1.0], [-1.0, 0.0]])
    def test_invalid(self, bad):
        with pytest.raises(InvalidInputError):
            simplex_weights(bad)

    @given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=12))
    def test_normalized_and_positive(self, d):
        w = simplex_weights(sorted(d))
        assert abs(w.sum() - 1.0) <= 1e-12
        assert np.all(w >= 0)
        # nearest neighbor always gets the largest weight
        assert w[0] == w.max()


class TestPearson:
    def test_perfect(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == (1.0, False)
        assert pearson([1, 2, 3], [3, 2, 1]) == (-1.0, False)

    def test_zero_variance(self):
        assert pearson([5, 5, 5], [1, 2, 3]) == (0.0, True)

    @pytest.mark.parametrize("a,b", [([1, 2], [1, 2, 3]), ([1], [1])])
    def test_invalid(self, a, b):
        with pytest.raises(InvalidInputError):
            pearson(a, b)


class TestCrossMap:
    def test_self_prediction_sine(self):
        x = signal_series("sine", 500, 0, f=0.01)
        m = delay_embed(x, EmbeddingParams(E=2, tau=1))
        res = cross_map(m, x, np.arange(len(m)))
        assert res.skill >= 0.99

    def test_constant_library_targets(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(60)
        y = rng.standard_normal(60)
        m = delay_embed(x, EmbeddingParams(E=2))
        lib = np.arange(10, 30)
        y[m.time_index[lib]] = 4.25
        res = cross_map(m, y, lib)
        np.testing.assert_allclose(res.estimates, 4.25, rtol=1e-14)
        assert res.skill == 0.0 and res.degenerate

    def test_library_too_small(self):
        x = np.random.default_rng(1).standard_normal(50)
        m = delay_embed(x, EmbeddingParams(E=3))
        with pytest.raises(InvalidInputError, match="E \\+ 2"):
            cross_map(m, x, [0, 10, 20, 30])

    def test_target_length_mismatch(self):
        x = np.random.default_rng(1).standard_normal(50)
        m = delay_embed(x, EmbeddingParams(E=3))
        with pytest.raises(InvalidInputError):
            cross_map(m, x[:-1], np.arange(20))

    def test_coupled_driver_recovered(self):
        x, y = coupled_logistic(LogisticPairParams(), 0)
        m = delay_embed(y, EmbeddingParams())
        assert cross_map(m, x, np.arange(len(m))).skill > 0.8

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(20, 120), E=st.integers(1, 4))
    def test_estimates_bounded_by_neighbor_targets(self, seed, n, E):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        params = EmbeddingParams(E=E)
        m = delay_embed(x, params)
        lib = np.sort(rng.choice(len(m), size=max(E + 2, len(m) // 2), replace=False))
        res = cross_map(m, y, lib)
        targets = y[m.time_index][res.neighbors]
        assert np.all(res.estimates >= targets.min(axis=1) - 1e-12)
        assert np.all(res.estimates <= targets.max(axis=1) + 1e-12)
        assert -1.0 <= res.skill <= 1.0

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_naive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(40, 160))
        E = int(rng.integers(1, 5))
        tau = int(rng.integers(1, 3))
        theiler = int(rng.integers(0, 4))
        x = np.cumsum(rng.standard_normal(n))
        y = np.sin(x) + 0.1 * rng.standard_normal(n)
        params = EmbeddingParams(E, tau, theiler)
        m = delay_embed(x, params)
        lib = rng.choice(len(m), size=int(rng.integers(E + 2 + 2 * theiler + 1, len(m) + 1)), replace=False)
        res = cross_map(m, y, lib)
        times, est, skill = naive_cross_map(list(x), list(y), E, tau, theiler, lib.tolist())
        np.testing.assert_array_equal(res.times, times)
        np.testing.assert_allclose(res.estimates, est, rtol=0, atol=1e-12)
        assert abs(res.skill - skill) < 1e-9

    def test_oracle_tie_handling(self):
        # integer-valued series create many exact distance ties
        rng = np.random.default_rng(42)
        x = rng.integers(0, 3, 80).astype(float)
        y = rng.standard_normal(80)
        params = EmbeddingParams(E=2, tau=1, theiler=0)
        m = delay_embed(x, params)
        res = cross_map(m, y, np.arange(len(m)))
        _, est, skill = naive_cross_map(list(x), list(y), 2, 1, 0, list(range(len(m))))
        np.testing.assert_allclose(res.estimates, est, atol=1e-12)
        assert abs(res.skill - skill) < 1e-9


class TestCcmCurve:
    def test_self_prediction_logistic(self):
        x, _ = coupled_logistic(LogisticPairParams(), 1)
        res = ccm_curve(x, x, EmbeddingParams(), [50, 400], 8, np.random.default_rng(0))
        assert min(res.skills) >= 0.99
        assert abs(res.convergence_delta) < 0.01
        assert res.score == res.skills[-1]

    def test_convergence_driven_to_driver(self):
        x, y = coupled_logistic(LogisticPairParams(), 2)
        res = ccm_curve(y, x, EmbeddingParams(), [100, 998], 16, np.random.default_rng(2))
        assert res.skills[1] > res.skills[0]
        assert res.convergence_delta > 0.1

    def test_deterministic(self):
        x, y = coupled_logistic(LogisticPairParams(n=300), 5)
        a = ccm_curve(y, x, EmbeddingParams(), [20, 60, 150], 4, np.random.default_rng(9))
        b = ccm_curve(y, x, EmbeddingParams(), [20, 60, 150], 4, np.random.default_rng(9))
        assert a == b

    def test_library_larger_than_manifold(self):
        x = np.random.default_rng(0).standard_normal(100)
        with pytest.raises(InvalidInputError, match="exceeds manifold size 98"):
            ccm_curve(x, x, EmbeddingParams(), [50, 99], 2, np.random.default_rng(0))

    def test_constant_series_is_degenerate(self):
        x = np.full(100, 2.0)
        y = np.random.default_rng(0).standard_normal(100)
        res = ccm_curve(x, y, EmbeddingParams(), [50], 3, np.random.default_rng(0))
        assert res.degenerate and res.skills == [0.0]


class TestCcmScore:
    def test_self(self):
        x = signal_series("sine", 300, 0, f=0.013)
        assert ccm_score(x, x, EmbeddingParams(), 298, 1, None).value >= 0.99

    def test_constant(self):
        s = ccm_score(np.ones(50), np.arange(50.0), EmbeddingParams(), 40, 2, np.random.default_rng(0))
        assert s == (0.0, True)

    @settings(max_examples=15, deadline=None)
    @given(
        a=st.floats(0.01, 100),
        b=st.floats(-100, 100),
        c=st.floats(0.01, 100),
        d=st.floats(-100, 100),
        seed=st.integers(0, 1000),
    )
    def test_affine_invariance(self, a, b, c, d, seed):
        x, y = coupled_logistic(LogisticPairParams(n=200), seed)
        base = ccm_score(y, x, EmbeddingParams(), 120, 3, np.random.default_rng(seed)).value
        moved = ccm_score(a * y + b, c * x + d, EmbeddingParams(), 120, 3, np.random.default_rng(seed)).value
        assert abs(base - moved) < 1e-9


class TestPairwise:
    def test_identical_agents(self):
        s = signal_series("sine", 200, 0, f=0.02)
        summary = pairwise_coordination([s, s, s], EmbeddingParams(), 198, 1, np.random.default_rng(0))
        off = ~np.eye(3, dtype=bool)
        assert np.all(summary.pair_scores[off] >= 0.99)
        assert summary.overall_mean >= 0.99
        assert np.all(np.isnan(np.diag(summary.pair_scores)))

    def test_two_agents_counting(self):
        rng = np.random.default_rng(3)
        x, y = coupled_logistic(LogisticPairParams(n=200), 3)
        summary = pairwise_coordination([x, y], EmbeddingParams(), 150, 2, rng)
        s01, s10 = summary.pair_scores[0, 1], summary.pair_scores[1, 0]
        assert np.isfinite(s01) and np.isfinite(s10)
        np.testing.assert_allclose(summary.per_agent_mean, [(s01 + s10) / 2] * 2)
        assert summary.overall_mean == pytest.approx((s01 + s10) / 2)

    def test_direction_convention(self):
        # X drives Y, so Y's manifold (agent 1) estimates X (agent 0) well
        x, y = coupled_logistic(LogisticPairParams(), 4)
        summary = pairwise_coordination([x, y], EmbeddingParams(), 998, 1, np.random.default_rng(0))
        assert summary.pair_scores[1, 0] > summary.pair_scores[0, 1] + 0.3

    def test_per_agent_mean_excludes_diagonal(self):
        rng = np.random.default_rng(5)
        series = [rng.standard_normal(120) for _ in range(3)]
        summary = pairwise_coordination(series, EmbeddingParams(), 100, 2, np.random.default_rng(1))
        P = summary.pair_scores
        for i in range(3):
            vals = [P[i, j] for j in range(3) if j != i] + [P[j, i] for j in range(3) if j != i]
            assert summary.per_agent_mean[i] == pytest.approx(np.mean(vals))
        assert -1 <= summary.overall_mean <= 1

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError, match="differ in length"):
            pairwise_coordination([np.zeros(50), np.zeros(51)], EmbeddingParams(), 40, 1, np.random.default_rng(0))
