"""System parameters and structural constants of the cooperative caching scheme.

Key quantities (all exact rationals, no floating point):
- t: cache replication factor K*M/N; every subfile is held by exactly t users.
- alpha: number of users transmitting concurrently over the cooperation
  network, 1 <= alpha <= alpha_max <= floor(K/2).
- g: per-symbol multicast size min(floor(K/alpha) - 1, t); each cooperating
  sender packs g subfiles into one XOR symbol.
- (L1, L2): layer split deciding which fraction of each file is delivered by
  the users (L1 layers) versus the server (L2 layers).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb


class ParameterError(ValueError):
    """Invalid system parameters."""


class UserCountError(ParameterError):
    """K out of range (K < 2 or K > N)."""


class AlphaRangeError(ParameterError):
    """alpha_max outside [1, floor(K/2)] or alpha outside [1, alpha_max]."""


class CacheRangeError(ParameterError):
    """Cache size M outside [0, N]."""


class NonIntegralReplicationError(ParameterError):
    """K*M/N is not an integer but the operation requires an exact scheme."""


@dataclass(frozen=True)
class SystemParams:
    """The tuple (N, K, M, alpha_max, F) describing one problem instance.

    M is a rational number of file units; F (bits per file) is only needed
    for payload-level simulation and may be omitted for rate analysis.
    """

    N: int
    K: int
    M: Fraction
    alpha_max: int
    F: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "M", Fraction(self.M))
        self.validate()

    def validate(self) -> None:
        if self.K < 2:
            raise UserCountError(f"need at least 2 users, got K={self.K}")
        if self.K > self.N:
            raise UserCountError(
                f"more users than files (K={self.K} > N={self.N}); "
                "the scheme assumes K <= N"
            )
        if not 1 <= self.alpha_max <= self.K // 2:
            raise AlphaRangeError(
                f"alpha_max={self.alpha_max} outside [1, floor(K/2)]=[1, {self.K // 2}]"
            )
        if not 0 <= self.M <= self.N:
            raise CacheRangeError(f"M={self.M} outside [0, {self.N}]")

    @property
    def t(self) -> Fraction:
        return compute_t(self)


def validate(params: SystemParams) -> None:
    """Raise a distinct ParameterError subclass per violated constraint."""
    params.validate()


def compute_t(params: SystemParams) -> Fraction:
    """Replication factor t = K*M/N, exact."""
    return Fraction(params.K) * params.M / params.N


def integral_t(params: SystemParams) -> int:
    """t as an int; raises NonIntegralReplicationError otherwise."""
    t = compute_t(params)
    if t.denominator != 1:
        raise NonIntegralReplicationError(
            f"t = KM/N = {t} is not an integer; use the memory-sharing envelope"
        )
    return int(t)


def multicast_size(K: int, alpha: int, t: int) -> int:
    """Subfiles per cooperative XOR symbol: g = min(floor(K/alpha) - 1, t)."""
    return min(K // alpha - 1, t)


def delay_for_alpha(params: SystemParams, alpha: int) -> Fraction:
    """Worst-case delay K(1 - M/N) / (1 + t + alpha*g) for a fixed alpha."""
    t = integral_t(params)
    g = multicast_size(params.K, alpha, t)
    return (
        Fraction(params.K)
        * (1 - params.M / params.N)
        / (1 + t + alpha * g)
    )


@dataclass(frozen=True)
class AlphaChoice:
    """Chosen alpha plus provenance of the choice.

    closed_form is the three-case formula value (None when the middle case
    has no solution); fallback_used is True when the returned alpha comes
    from the exhaustive argmin instead of the closed form.
    """

    alpha: int
    closed_form: int | None
    fallback_used: bool


def _closed_form_alpha(K: int, alpha_max: int, t: int) -> int | None:
    if t >= K - 1:
        return 1
    if t <= K // alpha_max - 1:
        return alpha_max
    candidates = [a for a in range(1, alpha_max + 1) if K // a - 1 == t]
    return max(candidates) if candidates else None


def choose_alpha(params: SystemParams) -> AlphaChoice:
    """Pick alpha minimizing the delay, cross-checking the closed form.

    The closed form can be undefined (its middle case is an empty set for
    some (K, t) due to floor gaps); then, and on the rare disagreement, the
    exhaustive argmin wins with ties broken toward the largest alpha.
    """
    t = integral_t(params)
    K = params.K
    cf = _closed_form_alpha(K, params.alpha_max, t)
    # Minimizing delay == maximizing the denominator 1 + t + alpha*g.
    denom = {a: 1 + t + a * multicast_size(K, a, t) for a in range(1, params.alpha_max + 1)}
    best = max(denom.values())
    argmin = [a for a, d in denom.items() if d == best]
    if cf is not None and cf in argmin:
        return AlphaChoice(alpha=cf, closed_form=cf, fallback_used=False)
    return AlphaChoice(alpha=max(argmin), closed_form=cf, fallback_used=True)


def optimal_alpha(params: SystemParams) -> int:
    """The delay-minimizing concurrent-sender count alpha*."""
    return choose_alpha(params).alpha


def allocate_loads(params: SystemParams, alpha: int) -> tuple[int, int]:
    """Smallest positive (L1, L2) satisfying the two load conditions.

    (a) K*C(K-1,t)*L1 / (alpha*g) is a positive integer, so cooperative
        slots pack exactly; (b) L1/L2 = alpha*g/(1+t), so the server and
        user streams finish simultaneously (R1 = R2).

    Returns (0, 1) when cooperation is disabled (g = 0) or nothing needs
    delivery (t = K).
    """
    t = integral_t(params)
    K = params.K
    if not 1 <= alpha <= params.alpha_max:
        raise AlphaRangeError(f"alpha={alpha} outside [1, {params.alpha_max}]")
    g = multicast_size(K, alpha, t)
    if g <= 0 or t >= K:
        return (0, 1)
    ratio = Fraction(alpha * g, 1 + t)
    a, b = ratio.numerator, ratio.denominator
    # Least c >= 1 making condition (a) integral for L1 = a*c.
    c = Fraction(K * comb(K - 1, t) * a, alpha * g).denominator
    return (a * c, b * c)


@dataclass(frozen=True)
class DerivedParams:
    """Structural constants fixed before placement: (t, alpha, L1, L2, g)."""

    t: int
    alpha: int
    L1: int
    L2: int
    g: int

    @property
    def L(self) -> int:
        return self.L1 + self.L2

    def check(self, params: SystemParams) -> None:
        if not 1 <= self.alpha <= params.alpha_max:
            raise AlphaRangeError(f"alpha={self.alpha} outside [1, {params.alpha_max}]")
        if self.L2 <= 0 or self.L1 < 0:
            raise ParameterError(f"need L2 > 0 and L1 >= 0, got ({self.L1}, {self.L2})")
        if self.L1 > 0:
            if self.g <= 0:
                raise ParameterError("L1 > 0 requires a positive multicast size g")
            num = params.K * comb(params.K - 1, self.t) * self.L1
            if num % (self.alpha * self.g) != 0:
                raise ParameterError(
                    f"loads ({self.L1}, {self.L2}) violate the slot-packing "
                    f"condition: {num}/{self.alpha * self.g} is not an integer"
                )


def derive(
    params: SystemParams,
    alpha: int | None = None,
    loads: tuple[int, int] | None = None,
) -> DerivedParams:
    """Assemble DerivedParams, optimizing alpha and loads unless pinned.

    Explicit `loads` only need the slot-packing condition (a); this admits
    configurations like the worked 6-user example that trade optimality of
    the load split for a smaller subfile count.
    """
    params.validate()
    t = integral_t(params)
    if alpha is None:
        alpha = optimal_alpha(params)
    if loads is None:
        loads = allocate_loads(params, alpha)
    L1, L2 = loads
    d = DerivedParams(t=t, alpha=alpha, L1=L1, L2=L2, g=multicast_size(params.K, alpha, t))
    d.check(params)
    return d
