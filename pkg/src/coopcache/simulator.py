"""Bit-exact execution of a delivery schedule.

Every symbol is materialized as a byte-wise XOR of subfile payloads. The
simulator records what each user hears, then decodes by cancelling cached
components, and finally reassembles each requested file and compares it
against the library byte for byte.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import comb

from .delivery import SERVER, DemandVector, Schedule, TransmissionSymbol
from .placement import CacheState, FileLibrary, SubfileId, subsets


class DecodeError(RuntimeError):
    """A user could not recover a requested subfile from its log and cache."""


def _xor(chunks: list[bytes]) -> bytes:
    return reduce(lambda a, b: bytes(x ^ y for x, y in zip(a, b)), chunks)


@dataclass(frozen=True)
class ReceivedSymbol:
    """One symbol as heard by a particular user."""

    slot_index: int
    sender: int
    payload: bytes
    components: tuple[SubfileId, ...]
    target: SubfileId | None  # the component addressed to this user, if any


@dataclass
class TransmissionLog:
    """Per-user reception logs produced by executing a schedule."""

    entries: dict[int, list[ReceivedSymbol]]

    def for_user(self, user: int) -> list[ReceivedSymbol]:
        return self.entries[user]


def worst_case_demands(params, seed: int = 0) -> DemandVector:
    """Distinct files for all users (requires N >= K), chosen pseudo-randomly."""
    if params.N < params.K:
        raise ValueError(f"need N >= K distinct files for worst case, got N={params.N} K={params.K}")
    rng = random.Random(seed)
    files = rng.sample(range(1, params.N + 1), params.K)
    return {k: n for k, n in zip(range(1, params.K + 1), files)}


def _emit(sym: TransmissionSymbol, library: FileLibrary, slot_index: int):
    payload = _xor([library.subfile_payload(sid) for sid in sym.components])
    return payload, sym.components


def execute_schedule(schedule: Schedule, library: FileLibrary) -> TransmissionLog:
    """Run the schedule over the shared links.

    Server symbols go out on the broadcast link and reach every user; a
    user symbol is heard by its addressed recipients only (transmissions
    in other groups occupy other spatial channels).
    """
    K = schedule.params.K
    log = TransmissionLog(entries={k: [] for k in range(1, K + 1)})
    for i, slot in enumerate(schedule.slots):
        for sym in slot.user_symbols:
            payload, comps = _emit(sym, library, i)
            for r, target in sym.recipients:
                log.entries[r].append(
                    ReceivedSymbol(i, sym.sender, payload, comps, target)
                )
        if slot.server_symbol is not None:
            sym = slot.server_symbol
            payload, comps = _emit(sym, library, i)
            addressed = sym.recipient_map
            for k in range(1, K + 1):
                log.entries[k].append(
                    ReceivedSymbol(i, SERVER, payload, comps, addressed.get(k))
                )
    return log


def decode_user(
    user: int,
    log: TransmissionLog,
    cache: CacheState,
    library: FileLibrary,
    demand: int,
) -> bytes:
    """Reconstruct file `demand` for `user` from its cache plus reception log.

    Each received symbol with a target component is peeled by XOR-ing out
    the other components, all of which must sit in the user's cache.
    """
    recovered: dict[SubfileId, bytes] = {}
    for entry in log.for_user(user):
        if entry.target is None:
            continue
        chunks = [entry.payload]
        for sid in entry.components:
            if sid == entry.target:
                continue
            if sid not in cache.entries:
                raise DecodeError(
                    f"user {user}: cannot cancel {sid} (not cached) in slot {entry.slot_index}"
                )
            chunks.append(library.subfile_payload(sid))
        recovered[entry.target] = _xor(chunks)

    params, derived = library.params, library.derived
    parts = []
    for l in range(1, derived.L + 1):
        for T in subsets(params.K, derived.t):
            sid = SubfileId(demand, l, T)
            if user in T:
                parts.append(library.subfile_payload(sid))
            elif sid in recovered:
                parts.append(recovered[sid])
            else:
                raise DecodeError(f"user {user}: subfile {sid} never delivered")
    return b"".join(parts)


def verify_all_decodes(
    schedule: Schedule,
    library: FileLibrary,
    caches: list[CacheState],
    demands: DemandVector,
) -> None:
    """Raise DecodeError unless every user recovers its file bit-exactly."""
    log = execute_schedule(schedule, library)
    by_user = {c.user: c for c in caches}
    for k, n in demands.items():
        got = decode_user(k, log, by_user[k], library, n)
        if got != library.file_payload(n):
            raise DecodeError(f"user {k}: reconstructed file {n} differs from library")


def normalized_delay(schedule: Schedule) -> Fraction:
    """Measured delay in file units: max of the two streams' symbol counts,
    each symbol carrying 1/(L * C(K,t)) of a file."""
    params, derived = schedule.params, schedule.derived
    unit = derived.L * comb(params.K, derived.t)
    return Fraction(max(schedule.user_slot_count, schedule.server_symbol_count), unit)
