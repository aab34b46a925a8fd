"""Placement phase: file splitting and deterministic cache filling.

Each file is split into L*C(K,t) equal subfiles, indexed by a layer
l in [L] and a t-subset T of the users; user k caches every subfile whose
subset contains k, which fills the cache to exactly M*F bits.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

from .params import DerivedParams, ParameterError, SystemParams


class SplitError(ParameterError):
    """File size not divisible into equal byte-aligned subfiles."""


@lru_cache(maxsize=None)
def subsets(K: int, t: int) -> tuple[tuple[int, ...], ...]:
    """All t-subsets of {1..K} in lexicographic order."""
    return tuple(combinations(range(1, K + 1), t))


@lru_cache(maxsize=None)
def subset_rank(K: int, t: int) -> dict[tuple[int, ...], int]:
    return {T: i for i, T in enumerate(subsets(K, t))}


@dataclass(frozen=True, order=True)
class SubfileId:
    """Address of one subfile: file n, layer l, cached-by subset T (sorted)."""

    n: int
    l: int
    T: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "T", tuple(sorted(self.T)))

    def __str__(self) -> str:
        return f"({self.n},{self.l},{{{','.join(map(str, self.T))}}})"


def subfile_ids(params: SystemParams, derived: DerivedParams) -> list[SubfileId]:
    """All N * L * C(K,t) subfile addresses in canonical (n, l, T) order."""
    return [
        SubfileId(n, l, T)
        for n in range(1, params.N + 1)
        for l in range(1, derived.L + 1)
        for T in subsets(params.K, derived.t)
    ]


def pieces_per_file(params: SystemParams, derived: DerivedParams) -> int:
    return derived.L * comb(params.K, derived.t)


def default_file_bits(params: SystemParams, derived: DerivedParams, target_bits: int = 4096) -> int:
    """Least multiple of 8 * L * C(K,t) at or above target_bits.

    The multiple of 8 keeps every subfile whole bytes, so XOR is byte-wise.
    """
    unit = 8 * pieces_per_file(params, derived)
    return max(1, -(-target_bits // unit)) * unit


@dataclass(frozen=True)
class FileLibrary:
    """N equal-length files plus byte-exact views of their subfiles."""

    params: SystemParams
    derived: DerivedParams
    payloads: tuple[bytes, ...]
    subfile_bytes: int

    @classmethod
    def generate(
        cls,
        params: SystemParams,
        derived: DerivedParams,
        seed: int = 0,
        target_bits: int = 4096,
    ) -> "FileLibrary":
        bits = params.F if params.F is not None else default_file_bits(params, derived, target_bits)
        pieces = pieces_per_file(params, derived)
        if bits % (8 * pieces) != 0:
            raise SplitError(
                f"file size {bits} bits is not a multiple of 8 * L * C(K,t) = {8 * pieces}"
            )
        rng = random.Random(seed)
        nbytes = bits // 8
        payloads = tuple(rng.randbytes(nbytes) for _ in range(params.N))
        return cls(params, derived, payloads, nbytes // pieces)

    @classmethod
    def from_payloads(
        cls, params: SystemParams, derived: DerivedParams, payloads: list[bytes]
    ) -> "FileLibrary":
        if len(payloads) != params.N:
            raise SplitError(f"expected {params.N} files, got {len(payloads)}")
        sizes = {len(p) for p in payloads}
        if len(sizes) != 1:
            raise SplitError("all files must have equal length")
        nbytes = sizes.pop()
        pieces = pieces_per_file(params, derived)
        if nbytes == 0 or nbytes % pieces != 0:
            raise SplitError(
                f"file size {8 * nbytes} bits is not a positive multiple of "
                f"8 * L * C(K,t) = {8 * pieces}"
            )
        return cls(params, derived, tuple(payloads), nbytes // pieces)

    @property
    def file_bits(self) -> int:
        return 8 * len(self.payloads[0])

    def file_payload(self, n: int) -> bytes:
        return self.payloads[n - 1]

    def _offset(self, sid: SubfileId) -> int:
        C = comb(self.params.K, self.derived.t)
        idx = (sid.l - 1) * C + subset_rank(self.params.K, self.derived.t)[sid.T]
        return idx * self.subfile_bytes

    def subfile_payload(self, sid: SubfileId) -> bytes:
        off = self._offset(sid)
        return self.payloads[sid.n - 1][off : off + self.subfile_bytes]


@dataclass(frozen=True)
class CacheState:
    """Cache contents of one user: every subfile whose subset contains it."""

    user: int
    entries: frozenset[SubfileId]

    def cached_bits(self, library: FileLibrary) -> int:
        return 8 * library.subfile_bytes * len(self.entries)


def fill_caches(params: SystemParams, derived: DerivedParams) -> list[CacheState]:
    """One CacheState per user k: {W^l_{n,T} : k in T} over all n, l."""
    per_user: dict[int, set[SubfileId]] = {k: set() for k in range(1, params.K + 1)}
    for sid in subfile_ids(params, derived):
        for k in sid.T:
            per_user[k].add(sid)
    return [CacheState(k, frozenset(per_user[k])) for k in range(1, params.K + 1)]
