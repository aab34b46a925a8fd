"""Closed-form rates, gains, bounds, and the memory-sharing envelope.

Frozen expected values were computed with straightforward independent
enumerations of the same closed forms (exact rational arithmetic).
"""

from fractions import Fraction as F

import pytest

from coopcache.analysis import (
    baseline_D2D,
    baseline_MN,
    delay_report,
    envelope,
    gains,
    lower_bound,
    memory_grid,
    rate_RC,
    rates_R1_R2,
    verify_gap,
)
from coopcache.params import SystemParams


def make(N, K, M, amax):
    return SystemParams(N=N, K=K, M=F(M), alpha_max=amax)


class TestRates:
    def test_endpoints(self):
        assert rate_RC(make(6, 6, 6, 2)) == 0
        assert rate_RC(make(6, 6, 0, 2)) == 6

    def test_minimum_over_alpha(self):
        # K=4, N=4, M=2: t=2, both alpha choices give denominator 5
        assert rate_RC(make(4, 4, 2, 2)) == F(2, 5)
        # K=6, M=4: denominator 9 for alpha in {1,2}
        assert rate_RC(make(6, 6, 4, 2)) == F(2, 9)

    def test_split_rates_balanced_loads(self):
        r1, r2 = rates_R1_R2(make(4, 4, 2, 2), alpha=2, L1=2, L2=3)
        assert r1 == r2 == F(2, 5)

    def test_split_rates_unbalanced_loads(self):
        # the minimal split meeting only the divisibility condition
        r1, r2 = rates_R1_R2(make(6, 6, 4, 2), alpha=2, L1=2, L2=1)
        assert (r1, r2) == (F(2, 15), F(1, 3))

    def test_server_only_split(self):
        p = make(4, 4, 2, 2)
        r1, r2 = rates_R1_R2(p, alpha=1, L1=0, L2=1)
        assert r2 == 0
        assert r1 == baseline_MN(p)


class TestBaselines:
    def test_known_values(self):
        p = make(20, 10, 4, 5)
        assert baseline_MN(p) == F(8, 3)
        assert baseline_D2D(p) == 4

    def test_full_cache(self):
        p = make(6, 6, 6, 2)
        assert baseline_MN(p) == 0
        assert baseline_D2D(p) == 0

    def test_d2d_requires_positive_cache(self):
        with pytest.raises(ValueError):
            baseline_D2D(make(6, 6, 0, 2))

    def test_cooperation_beats_server_only(self):
        p = make(6, 6, 4, 2)
        assert rate_RC(p) < baseline_MN(p)


class TestGains:
    def test_identities_on_grid(self):
        for i in range(1, 10):
            p = make(20, 10, F(20 * i, 10), 5)
            rep = delay_report(p)
            assert rep.R_C == rep.R_MN * rep.G_c
            assert rep.R_C == rep.R_D2D * rep.G_p

    def test_parallel_gain_undefined_without_cache(self):
        G_c, G_p = gains(make(6, 6, 0, 2))
        assert G_c == 1
        assert G_p is None

    def test_parallel_gain_strictly_increasing(self):
        vals = [gains(make(20, 10, 2 * i, 5))[1] for i in range(1, 10)]
        assert vals == [F(1, 7), F(2, 9), F(3, 10), F(4, 13), F(5, 14),
                        F(2, 5), F(7, 16), F(8, 17), F(9, 19)]
        assert all(a < b for a, b in zip(vals, vals[1:]))


class TestLowerBound:
    def test_empty_cache_equals_user_count(self):
        assert lower_bound(make(20, 10, 0, 5)) == 10

    def test_full_cache_is_zero(self):
        assert lower_bound(make(20, 10, 20, 5)) == 0

    def test_enumerated_value(self):
        assert lower_bound(make(20, 10, 4, 5)) == F(2, 5)

    def test_below_achievable_everywhere(self):
        env = envelope(make(20, 10, 0, 5))
        for M in memory_grid(20, 10):
            assert lower_bound(make(20, 10, M, 5)) <= env(M)


class TestEnvelope:
    def test_matches_corners_at_extremes(self):
        env = envelope(make(20, 10, 0, 5))
        assert env(0) == rate_RC(make(20, 10, 0, 5)) == 10
        assert env(20) == 0

    def test_below_pointwise_rate(self):
        env = envelope(make(20, 10, 0, 5))
        for M in memory_grid(20, 10):
            assert env(M) <= rate_RC(make(20, 10, M, 5))

    def test_vertices_frozen(self):
        env = envelope(make(20, 10, 0, 5))
        assert env.vertices == (
            (F(0), F(10)), (F(2), F(9, 7)), (F(4), F(8, 9)), (F(8), F(6, 13)),
            (F(10), F(5, 14)), (F(12), F(4, 15)), (F(14), F(3, 16)),
            (F(16), F(2, 17)), (F(18), F(1, 19)), (F(20), F(0)),
        )
        # M=6 is not extreme: the chord from M=4 to M=8 lies below it
        assert env(6) < rate_RC(make(20, 10, 6, 5))

    def test_convex_and_nonincreasing(self):
        env = envelope(make(20, 10, 0, 5))
        ys = [env(F(m, 2)) for m in range(0, 41)]
        assert all(a >= b for a, b in zip(ys, ys[1:]))
        slopes = [ys[i + 1] - ys[i] for i in range(len(ys) - 1)]
        assert all(a <= b for a, b in zip(slopes, slopes[1:]))

    def test_rejects_out_of_range(self):
        env = envelope(make(20, 10, 0, 5))
        with pytest.raises(ValueError):
            env(21)


class TestGap:
    def test_single_config_ratio(self):
        rep = verify_gap([(20, 10, 5)])
        assert rep.ok
        assert rep.max_ratio == F(20, 7)

    def test_alpha_star_non_increasing_in_cache_size(self):
        stars = [delay_report(make(20, 10, 2 * i, 5)).alpha_star for i in range(1, 10)]
        assert stars == [5, 3, 3, 2, 2, 2, 2, 2, 1]
        assert all(a >= b for a, b in zip(stars, stars[1:]))

    def test_sandwich_ordering(self):
        for i in range(1, 10):
            p = make(20, 10, 2 * i, 5)
            rep = delay_report(p)
            env = envelope(p)(p.M)
            assert rep.lower_bound <= env <= rep.R_MN
            assert env <= rep.R_D2D
