"""Closed-form performance analysis: achievable delay, gains, baselines,
cut-set lower bounds, the memory-sharing envelope, and the constant
multiplicative gap check. Everything is exact rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

from .params import (
    DerivedParams,
    SystemParams,
    allocate_loads,
    choose_alpha,
    compute_t,
    derive,
    integral_t,
    multicast_size,
)

GAP_CONSTANT = 31


def rate_RC(params: SystemParams) -> Fraction:
    """Achievable delay K(1-M/N)/(1+t+alpha*g), minimized over alpha."""
    if params.M == params.N:
        return Fraction(0)
    t = integral_t(params)
    if t == 0:
        # No cached side information: the server unicasts everything.
        return params.K * (1 - Fraction(params.M, params.N))
    best = min(
        Fraction(params.K, 1)
        * (1 - Fraction(params.M, params.N))
        / (1 + t + a * multicast_size(params.K, a, t))
        for a in range(1, params.alpha_max + 1)
    )
    return best


def rates_R1_R2(
    params: SystemParams, alpha: int, L1: int, L2: int
) -> tuple[Fraction, Fraction]:
    """(server rate R1, user rate R2) for an explicit load split."""
    t = integral_t(params)
    g = multicast_size(params.K, alpha, t)
    L = L1 + L2
    miss = params.K * (1 - Fraction(params.M, params.N))
    if L1 > 0 and g <= 0:
        raise ValueError("users cannot multicast (g=0) but L1 > 0")
    R2 = Fraction(L1, L) * miss / (alpha * g) if L1 > 0 else Fraction(0)
    R1 = Fraction(L2, L) * miss / (1 + t)
    return R1, R2


def baseline_MN(params: SystemParams) -> Fraction:
    """Server-only coded caching delay K(1-M/N)/(1+t)."""
    t = integral_t(params)
    return params.K * (1 - Fraction(params.M, params.N)) / (1 + t)


def baseline_D2D(params: SystemParams) -> Fraction:
    """Server-less device-to-device delay (N/M)(1-M/N); needs M > 0."""
    if params.M <= 0:
        raise ValueError("D2D baseline requires M > 0")
    return Fraction(params.N, 1) / params.M * (1 - Fraction(params.M, params.N))


def gains(params: SystemParams) -> tuple[Fraction, Fraction | None]:
    """(G_c, G_p) at the optimal alpha; G_p is None when t = 0."""
    t = integral_t(params)
    alpha = choose_alpha(params).alpha
    g = multicast_size(params.K, alpha, t)
    G_c = 1 / (1 + Fraction(alpha, 1 + t) * g)
    if t == 0:
        return G_c, None
    G_p = 1 / (1 + Fraction(1, t) + Fraction(alpha, t) * g)
    return G_c, G_p


def lower_bound(params: SystemParams) -> Fraction:
    """Cut-set bound: max of three terms, s enumerated exhaustively over [K]."""
    frac_M = Fraction(params.M)
    terms = [Fraction(1, 2) * (1 - frac_M / params.N)]
    for s in range(1, params.K + 1):
        per = params.N // s
        terms.append(s - Fraction(params.K, 1) * frac_M / per)
        terms.append((s - Fraction(s, 1) * frac_M / per) / (1 + params.alpha_max))
    return max(max(terms), Fraction(0))


def memory_grid(N: int, K: int) -> list[Fraction]:
    """The integer-t memory grid {0, N/K, 2N/K, ..., N}."""
    return [Fraction(N * i, K) for i in range(K + 1)]


@dataclass(frozen=True)
class Envelope:
    """Lower convex envelope of the (M, R_C) corner points; callable on [0, N]."""

    N: int
    vertices: tuple[tuple[Fraction, Fraction], ...]  # hull corners, M ascending

    def __call__(self, M) -> Fraction:
        M = Fraction(M)
        if not 0 <= M <= self.N:
            raise ValueError(f"M={M} outside [0, {self.N}]")
        xs = self.vertices
        for (x0, y0), (x1, y1) in zip(xs, xs[1:]):
            if x0 <= M <= x1:
                return y0 + (y1 - y0) * (M - x0) / (x1 - x0)
        return xs[-1][1]


def envelope(params: SystemParams) -> Envelope:
    """Lower hull (Andrew monotone chain, exact) of R_C over the memory grid."""
    pts = []
    for M in memory_grid(params.N, params.K):
        p = SystemParams(N=params.N, K=params.K, M=M, alpha_max=params.alpha_max)
        pts.append((M, rate_RC(p)))
    hull: list[tuple[Fraction, Fraction]] = []
    for p in pts:
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            # drop the middle point when it is on or above the chord
            if (y1 - y0) * (p[0] - x0) >= (p[1] - y0) * (x1 - x0):
                hull.pop()
            else:
                break
        hull.append(p)
    return Envelope(params.N, tuple(hull))


@dataclass(frozen=True)
class GapReport:
    """Result of the constant-gap sweep."""

    max_ratio: Fraction
    argmax: tuple[int, int, int, Fraction] | None  # (N, K, alpha_max, M)
    violations: tuple[tuple[int, int, int, Fraction, Fraction], ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_gap(
    grid: list[tuple[int, int, int]], gap: int = GAP_CONSTANT
) -> GapReport:
    """Check envelope(M)/lower_bound(M) <= gap over (N, K, alpha_max) configs.

    M runs over the integer-t grid excluding M=N, where both sides vanish
    and the ratio is 1 by convention.
    """
    max_ratio = Fraction(0)
    argmax = None
    violations = []
    for N, K, amax in grid:
        p0 = SystemParams(N=N, K=K, M=Fraction(0), alpha_max=amax)
        env = envelope(p0)
        for M in memory_grid(N, K)[:-1]:
            p = SystemParams(N=N, K=K, M=M, alpha_max=amax)
            lo = lower_bound(p)
            up = env(M)
            ratio = up / lo
            if ratio > max_ratio:
                max_ratio, argmax = ratio, (N, K, amax, M)
            if ratio > gap:
                violations.append((N, K, amax, M, ratio))
    return GapReport(max_ratio, argmax, tuple(violations))


@dataclass(frozen=True)
class DelayReport:
    """All single-configuration analysis quantities in one place."""

    params: SystemParams
    t: int
    alpha_star: int
    L1: int
    L2: int
    R1: Fraction
    R2: Fraction
    R_C: Fraction
    G_c: Fraction
    G_p: Fraction | None
    R_MN: Fraction
    R_D2D: Fraction | None
    lower_bound: Fraction
    gap_ratio: Fraction


def delay_report(params: SystemParams) -> DelayReport:
    """Evaluate every closed form at the allocator's optimal operating point."""
    t = integral_t(params)
    d = derive(params)
    R1, R2 = (
        rates_R1_R2(params, d.alpha, d.L1, d.L2)
        if params.M < params.N
        else (Fraction(0), Fraction(0))
    )
    R_C = rate_RC(params)
    G_c, G_p = gains(params)
    lb = lower_bound(params)
    gap = R_C / lb if lb > 0 else Fraction(1)
    return DelayReport(
        params=params,
        t=t,
        alpha_star=d.alpha,
        L1=d.L1,
        L2=d.L2,
        R1=R1,
        R2=R2,
        R_C=R_C,
        G_c=G_c,
        G_p=G_p,
        R_MN=baseline_MN(params),
        R_D2D=baseline_D2D(params) if params.M > 0 else None,
        lower_bound=lb,
        gap_ratio=gap,
    )
