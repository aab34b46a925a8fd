"""Subfile splitting and cache fill."""

from fractions import Fraction
from math import comb

import pytest

from coopcache.params import SystemParams, derive
from coopcache.placement import (
    FileLibrary,
    SplitError,
    SubfileId,
    default_file_bits,
    fill_caches,
    pieces_per_file,
    subfile_ids,
)


@pytest.fixture
def setup():
    p = SystemParams(N=6, K=6, M=Fraction(4), alpha_max=2)
    d = derive(p, alpha=2, loads=(2, 1))
    return p, d


def test_piece_count(setup):
    p, d = setup
    # L * C(K, t) = 3 * C(6, 4) = 45
    assert pieces_per_file(p, d) == 45
    assert len(list(subfile_ids(p, d))) == 45 * p.N


def test_default_file_bits_is_minimal_multiple(setup):
    p, d = setup
    bits = default_file_bits(p, d, target_bits=4096)
    assert bits % (8 * 45) == 0
    assert bits >= 4096
    assert bits - 8 * 45 < 4096


def test_generate_is_deterministic(setup):
    p, d = setup
    a = FileLibrary.generate(p, d, seed=42)
    b = FileLibrary.generate(p, d, seed=42)
    c = FileLibrary.generate(p, d, seed=43)
    assert a.payloads == b.payloads
    assert a.payloads != c.payloads


def test_subfile_payloads_tile_the_file(setup):
    p, d = setup
    lib = FileLibrary.generate(p, d, seed=0, target_bits=720)
    for n in (1, p.N):
        joined = b"".join(
            lib.subfile_payload(sid)
            for sid in subfile_ids(p, d)
            if sid.n == n
        )
        assert joined == lib.file_payload(n)


def test_from_payloads_rejects_bad_sizes(setup):
    p, d = setup
    with pytest.raises(SplitError):
        FileLibrary.from_payloads(p, d, [b"x" * 44] * 6)
    with pytest.raises(SplitError):
        FileLibrary.from_payloads(p, d, [b"x" * 45] * 5)
    with pytest.raises(SplitError):
        FileLibrary.from_payloads(p, d, [b"x" * 45] * 5 + [b"y" * 90])


def test_cache_contents_and_budget(setup):
    p, d = setup
    lib = FileLibrary.generate(p, d, seed=1, target_bits=720)
    caches = fill_caches(p, d)
    assert [c.user for c in caches] == list(range(1, 7))
    per_user = d.L * comb(p.K - 1, d.t - 1) * p.N  # subsets containing k
    for c in caches:
        assert len(c.entries) == per_user
        assert all(c.user in sid.T for sid in c.entries)
        # exactly M * F bits
        assert c.cached_bits(lib) == p.M * lib.file_bits


def test_subfile_id_ordering_is_canonical():
    a = SubfileId(1, 1, (2, 3))
    b = SubfileId(1, 2, (2, 3))
    c = SubfileId(2, 1, (2, 3))
    assert a < b < c
    assert str(a) == "(1,1,{2,3})"
