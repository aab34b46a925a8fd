"""Parameter validation, alpha selection, and load allocation."""

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from coopcache.params import (
    AlphaRangeError,
    CacheRangeError,
    NonIntegralReplicationError,
    SystemParams,
    UserCountError,
    allocate_loads,
    choose_alpha,
    delay_for_alpha,
    derive,
    integral_t,
    multicast_size,
    optimal_alpha,
)


def make(N, K, M, amax):
    return SystemParams(N=N, K=K, M=Fraction(M), alpha_max=amax)


class TestValidation:
    def test_rejects_single_user(self):
        with pytest.raises(UserCountError):
            make(4, 1, 1, 1)

    def test_rejects_alpha_above_half_k(self):
        with pytest.raises(AlphaRangeError):
            make(6, 6, 2, 4)

    def test_rejects_alpha_below_one(self):
        with pytest.raises(AlphaRangeError):
            make(6, 6, 2, 0)

    def test_rejects_cache_out_of_range(self):
        with pytest.raises(CacheRangeError):
            make(4, 4, 5, 2)
        with pytest.raises(CacheRangeError):
            make(4, 4, -1, 2)

    def test_nonintegral_t_raises_on_demand(self):
        p = make(6, 6, Fraction(1, 2), 2)  # t = 1/2
        with pytest.raises(NonIntegralReplicationError):
            integral_t(p)

    def test_accepts_fractional_cache_with_integral_t(self):
        p = SystemParams(N=9, K=6, M=Fraction(3, 2), alpha_max=3)
        assert integral_t(p) == 1


class TestAlphaChoice:
    def test_multicast_size_caps_at_group_size(self):
        # group size floor(6/2)=3 allows at most 2 fellow recipients
        assert multicast_size(6, 2, 4) == 2
        assert multicast_size(6, 1, 4) == 4
        assert multicast_size(10, 5, 1) == 1

    def test_large_t_forces_single_sender(self):
        # t >= K-1: every subset already reaches everyone, alpha* = 1
        p = make(6, 6, 5, 3)  # t = 5
        assert optimal_alpha(p) == 1

    def test_small_t_allows_max_parallelism(self):
        # t <= floor(K/alpha_max)-1: groups are big enough at full parallelism
        p = make(10, 10, 1, 5)  # t = 1, floor(10/5)-1 = 1
        assert optimal_alpha(p) == 5

    def test_intermediate_case(self):
        # [DERIVED] N=100,K=10,M=40: t=4; floor(10/2)-1 = 4 = t
        p = make(100, 10, 40, 5)
        assert optimal_alpha(p) == 2

    def test_alpha_matches_exhaustive_argmin(self):
        for K in range(2, 11):
            for amax in range(1, K // 2 + 1):
                for t in range(1, K):
                    p = SystemParams(N=K, K=K, M=Fraction(K * t, K), alpha_max=amax)
                    best = min(
                        range(1, amax + 1), key=lambda a: delay_for_alpha(p, a)
                    )
                    assert delay_for_alpha(p, optimal_alpha(p)) == delay_for_alpha(p, best)

    def test_fallback_flag_set_when_no_exact_group_match(self):
        # K=6, t=4, alpha_max=2: floor(6/a)-1 = 4 has no solution
        choice = choose_alpha(make(6, 6, 4, 2))
        assert choice.alpha == 2
        assert choice.fallback_used


class TestLoads:
    def test_balanced_ratio(self):
        # [DERIVED] K=4, t=2, alpha=2, g=1: L1/L2 = 2/3
        p = make(4, 4, 2, 2)
        assert allocate_loads(p, 2) == (2, 3)

    def test_example_configuration_ratio(self):
        # K=6, t=4, alpha=2, g=2: alpha*g/(1+t) = 4/5
        p = make(6, 6, 4, 2)
        assert allocate_loads(p, 2) == (4, 5)

    def test_cooperation_disabled_when_users_cannot_multicast(self):
        # t=0: no side information to XOR against
        p = make(4, 4, 0, 2)
        assert allocate_loads(p, 2) == (0, 1)

    def test_full_cache_needs_no_delivery(self):
        p = make(4, 4, 4, 2)
        assert allocate_loads(p, 2) == (0, 1)

    @given(
        K=st.integers(2, 12),
        t_frac=st.integers(1, 11),
        alpha=st.integers(1, 6),
    )
    def test_divisibility_condition_holds(self, K, t_frac, alpha):
        from math import comb

        t = min(t_frac, K - 1)
        if alpha > K // 2:
            alpha = K // 2 or 1
        p = SystemParams(N=K, K=K, M=Fraction(K * t, K), alpha_max=max(1, K // 2))
        L1, L2 = allocate_loads(p, alpha)
        g = multicast_size(K, alpha, t)
        if L1 == 0:
            assert t >= K or g <= 0
            return
        assert (K * comb(K - 1, t) * L1) % (alpha * g) == 0
        assert Fraction(L1, L2) == Fraction(alpha * g, 1 + t)

    def test_derive_round_trip(self):
        p = make(6, 6, 4, 2)
        d = derive(p)
        assert (d.t, d.alpha, d.L1, d.L2, d.g) == (4, 2, 4, 5, 2)
        assert d.L == 9

    def test_derive_accepts_explicit_loads_meeting_divisibility(self):
        p = make(6, 6, 4, 2)
        d = derive(p, alpha=2, loads=(2, 1))
        assert (d.L1, d.L2, d.L) == (2, 1, 3)

    def test_derive_rejects_loads_breaking_divisibility(self):
        p = make(6, 6, 4, 2)
        with pytest.raises(Exception):
            derive(p, alpha=2, loads=(1, 1))
