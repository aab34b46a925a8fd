"""Delivery phase: server XOR multicasts plus the user-cooperation schedule.

The server stream is the classic one-symbol-per-(t+1)-subset delivery for
layers L1+1..L. The cooperation stream partitions the users into alpha
groups per slot (one sender per group, recipients inside the group) and
rotates partitions until every layer-[1..L1] demanded subfile is delivered.

The slot structure only depends on (K, alpha, t, L1), not on which files
are requested, so schedules are searched on abstract (recipient, layer,
subset) pairs and cached; demands are substituted afterwards.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Iterable, Iterator

from .params import DerivedParams, SystemParams
from .placement import CacheState, SubfileId, subsets

SERVER = 0  # sender id reserved for the server

DemandVector = dict[int, int]  # user -> requested file index

# abstract pending pair for one recipient: (layer, subset)
_Pair = tuple[int, tuple[int, ...]]
# abstract slot: (partition, ((sender, ((recipient, pair), ...)), ...))
_AbstractSlot = tuple[
    tuple[tuple[int, ...], ...],
    tuple[tuple[int, tuple[tuple[int, _Pair], ...]], ...],
]


class SchedulingError(RuntimeError):
    """Scheduler could not place a pending subfile under the constraints."""


@dataclass(frozen=True)
class TransmissionSymbol:
    """One XOR transmission: sender, and which component each recipient decodes."""

    sender: int  # SERVER or a user index
    recipients: tuple[tuple[int, SubfileId], ...]  # sorted by recipient

    @property
    def components(self) -> tuple[SubfileId, ...]:
        return tuple(sid for _, sid in self.recipients)

    @property
    def recipient_map(self) -> dict[int, SubfileId]:
        return dict(self.recipients)

    @staticmethod
    def make(sender: int, recipients: dict[int, SubfileId]) -> "TransmissionSymbol":
        return TransmissionSymbol(sender, tuple(sorted(recipients.items())))


@dataclass(frozen=True)
class Slot:
    """One logical transmission step: concurrent user symbols plus, optionally,
    one server symbol riding the separate broadcast link."""

    partition: tuple[tuple[int, ...], ...]
    user_symbols: tuple[TransmissionSymbol, ...]
    server_symbol: TransmissionSymbol | None = None


@dataclass(frozen=True)
class Schedule:
    params: SystemParams
    derived: DerivedParams
    demands: tuple[tuple[int, int], ...]  # sorted (user, file) pairs
    slots: tuple[Slot, ...]
    user_slot_count: int
    server_symbol_count: int
    expected_user_slots: int
    packed: bool  # True iff user_slot_count == expected_user_slots

    @property
    def demand_map(self) -> DemandVector:
        return dict(self.demands)


def expected_slot_count(params: SystemParams, derived: DerivedParams) -> int:
    """Slot count of the cooperation stream when every slot packs fully."""
    if derived.L1 == 0 or derived.t >= params.K:
        return 0
    return params.K * comb(params.K - 1, derived.t) * derived.L1 // (derived.alpha * derived.g)


def build_server_schedule(
    params: SystemParams, derived: DerivedParams, demands: DemandVector
) -> list[TransmissionSymbol]:
    """One symbol per (S, l) with |S| = t+1 and l in [L1+1 .. L]."""
    t = derived.t
    if t + 1 > params.K:
        return []
    symbols = []
    for l in range(derived.L1 + 1, derived.L + 1):
        for S in combinations(range(1, params.K + 1), t + 1):
            recips = {
                k: SubfileId(demands[k], l, tuple(x for x in S if x != k)) for k in S
            }
            symbols.append(TransmissionSymbol.make(SERVER, recips))
    return symbols


def _partitions(K: int, alpha: int) -> list[tuple[tuple[int, ...], ...]]:
    """All unordered partitions of [K] into alpha groups of size floor(K/alpha).

    When alpha does not divide K, the K mod alpha leftover users idle for
    that slot; every choice of idle set is enumerated.
    """
    m = K // alpha
    users = tuple(range(1, K + 1))

    def split(rest: tuple[int, ...]) -> Iterator[tuple[tuple[int, ...], ...]]:
        if not rest:
            yield ()
            return
        head = rest[0]
        for others in combinations(rest[1:], m - 1):
            group = (head,) + others
            remain = tuple(x for x in rest if x not in group)
            for tail in split(remain):
                yield (group,) + tail

    out = []
    for idle in combinations(users, K - alpha * m):
        active = tuple(u for u in users if u not in idle)
        out.extend(split(active))
    return out


def _pending_pairs(K: int, t: int, L1: int) -> dict[int, list[_Pair]]:
    """Per recipient: the (l, T) pairs the user stream still owes it."""
    return {
        k: [
            (l, T)
            for l in range(1, L1 + 1)
            for T in subsets(K, t)
            if k not in T
        ]
        for k in range(1, K + 1)
    }


def _best_symbol(
    group: tuple[int, ...],
    pending: dict[int, list[_Pair]],
    g: int,
) -> tuple[int, dict[int, _Pair]] | None:
    """Best single XOR symbol inside one group.

    A sender u may serve recipient set R (|R| <= g) iff each r in R has a
    pending (l, T) with ({u} | R) \\ {r} contained in T. Maximizes |R|;
    ties prefer the sender with the fewest own pending pairs (a user that
    still needs many receptions should not burn a slot sending), then
    recipient sets with the most pending work, then lexicographic order.
    """
    best: tuple[int, dict[int, _Pair]] | None = None
    best_key: tuple[int, int, int] | None = None
    senders = sorted(group, key=lambda u: (len(pending[u]), u))
    for u in senders:
        others = sorted(
            (r for r in group if r != u and pending[r]),
            key=lambda r: (-len(pending[r]), r),
        )
        top = min(g, len(others))
        for size in range(top, 0, -1):
            if best_key is not None and size < best_key[0]:
                break
            found = False
            for R in combinations(others, size):
                need = set(R) | {u}
                choice: dict[int, _Pair] = {}
                for r in R:
                    req = need - {r}
                    pick = next(
                        (p for p in pending[r] if req.issubset(p[1])), None
                    )
                    if pick is None:
                        break
                    choice[r] = pick
                else:
                    key = (
                        size,
                        -len(pending[u]),
                        sum(len(pending[r]) for r in R),
                    )
                    if best_key is None or key > best_key:
                        best, best_key = (u, choice), key
                    found = True
                    break
            if found:
                break
    return best


def _greedy_slots(
    K: int,
    alpha: int,
    g: int,
    pending: dict[int, list[_Pair]],
    parts: list[tuple[tuple[int, ...], ...]],
) -> list[_AbstractSlot]:
    """Greedy partition-rotation scheduler over abstract pending pairs."""
    slots: list[_AbstractSlot] = []
    cur = 0
    while any(pending.values()):
        best_idx = None
        # Score a slot by pairs served, then by how much pending work its
        # recipients carry: a partition that idles a backlogged user must
        # not win over one that serves it.
        best_key = (-1, -1)
        best_choice = None
        full = alpha * g
        top = sorted((len(v) for v in pending.values()), reverse=True)
        ceiling = (min(full, sum(1 for x in top if x)), sum(top[: alpha * g]))
        for off in range(len(parts)):
            idx = (cur + off) % len(parts)
            part = parts[idx]
            served = 0
            weight = 0
            choice = []
            for grp in part:
                sym = _best_symbol(grp, pending, g)
                if sym is not None:
                    served += len(sym[1])
                    weight += sum(len(pending[r]) for r in sym[1])
                    choice.append(sym)
            if (served, weight) > best_key:
                best_key, best_choice, best_idx = (served, weight), choice, idx
                if best_key >= ceiling:
                    break
        if best_key[0] <= 0:
            stuck = {k: len(v) for k, v in pending.items() if v}
            raise SchedulingError(f"no serviceable pending pairs left for users {stuck}")
        cur = best_idx
        syms = []
        for u, choice in best_choice:
            syms.append((u, tuple(sorted(choice.items()))))
            for r, p in choice.items():
                pending[r].remove(p)
        slots.append((parts[cur], tuple(syms)))
    return slots


def _forced_slots(K: int, alpha: int, t: int, L1: int, g: int) -> list[_AbstractSlot] | None:
    """Exact construction for the forced-component case g == t.

    With g == t every full symbol lives inside one (t+1)-subset S: the
    components are pinned to T_r = S \\ {r}. Per S the (t+1)*L1 pending
    pairs pack into (t+1)*L1/t symbols by rotating the sender role (each
    member of S sends L1/t times); slots then take alpha pairwise disjoint
    subsets at a time. Requires t | L1; returns None when not applicable.
    """
    if g != t or L1 % t != 0:
        return None
    m = K // alpha
    c = L1 // t
    all_users = list(range(1, K + 1))
    sets = list(combinations(all_users, t + 1))
    queues: dict[tuple[int, ...], list[tuple[int, dict[int, _Pair]]]] = {}
    for S in sets:
        nxt = {r: 1 for r in S}
        syms = []
        for _ in range(c):
            for u in S:
                choice = {}
                for r in S:
                    if r == u:
                        continue
                    choice[r] = (nxt[r], tuple(x for x in S if x != r))
                    nxt[r] += 1
                syms.append((u, choice))
        queues[S] = syms
    remaining = {S: len(queues[S]) for S in sets}

    def pick_disjoint(count: int) -> list[tuple[int, ...]] | None:
        # DFS for `count` pairwise disjoint subsets with work remaining,
        # preferring the largest backlogs.
        order = sorted((S for S in sets if remaining[S]), key=lambda S: (-remaining[S], S))

        def go(start: int, used: set[int], acc: list) -> list | None:
            if len(acc) == count:
                return acc
            for i in range(start, len(order)):
                S = order[i]
                if used & set(S):
                    continue
                got = go(i + 1, used | set(S), acc + [S])
                if got is not None:
                    return got
            return None

        return go(0, set(), [])

    slots: list[_AbstractSlot] = []
    while any(remaining.values()):
        chosen = None
        for count in range(min(alpha, sum(1 for v in remaining.values() if v)), 0, -1):
            chosen = pick_disjoint(count)
            if chosen:
                break
        if not chosen:
            return None
        # Pad each subset to a group of size m with currently unused users.
        used = {u for S in chosen for u in S}
        spare = [u for u in all_users if u not in used]
        groups = []
        syms = []
        for S in chosen:
            extra, spare = spare[: m - len(S)], spare[m - len(S) :]
            groups.append(tuple(sorted(S + tuple(extra))))
            u, choice = queues[S][len(queues[S]) - remaining[S]]
            remaining[S] -= 1
            syms.append((u, tuple(sorted(choice.items()))))
        slots.append((tuple(groups), tuple(syms)))
    return slots


@lru_cache(maxsize=256)
def _abstract_schedule(
    K: int, alpha: int, t: int, L1: int, g: int, max_restarts: int
) -> tuple[_AbstractSlot, ...]:
    """Demand-independent cooperation schedule for one structural config."""
    expected = K * comb(K - 1, t) * L1 // (alpha * g)
    forced = _forced_slots(K, alpha, t, L1, g)
    if forced is not None and len(forced) == expected:
        return tuple(forced)
    parts = _partitions(K, alpha)
    best = forced
    for attempt in range(max_restarts + 1):
        pending = _pending_pairs(K, t, L1)
        shuffled = list(parts)
        if attempt > 0:
            rng = random.Random(attempt)
            for r in pending:
                rng.shuffle(pending[r])
            rng.shuffle(shuffled)
        try:
            slots = _greedy_slots(K, alpha, g, pending, shuffled)
        except SchedulingError:
            if attempt == max_restarts and best is None:
                raise
            continue
        if best is None or len(slots) < len(best):
            best = slots
        if len(best) == expected:
            break
    assert best is not None
    return tuple(best)


def build_cooperation_schedule(
    params: SystemParams,
    derived: DerivedParams,
    demands: DemandVector,
    max_restarts: int = 200,
) -> list[Slot]:
    """Construct the user-cooperation slots for layers 1..L1.

    Uses the exact sender-rotation construction when the component choice
    is forced (g == t); otherwise a greedy partition-rotation search with
    deterministic seeded restarts. When no attempt packs every slot fully,
    the shortest schedule found is returned (the overcount is surfaced via
    Schedule.packed).
    """
    if derived.L1 == 0 or derived.t >= params.K or derived.t == 0:
        return []
    abstract = _abstract_schedule(
        params.K, derived.alpha, derived.t, derived.L1, derived.g, max_restarts
    )
    slots = []
    for part, syms in abstract:
        user_syms = tuple(
            TransmissionSymbol.make(
                u, {r: SubfileId(demands[r], l, T) for r, (l, T) in choice}
            )
            for u, choice in syms
        )
        slots.append(Slot(partition=part, user_symbols=user_syms))
    return slots


def build_schedule(
    params: SystemParams, derived: DerivedParams, demands: DemandVector
) -> Schedule:
    """Full two-stream schedule: cooperation slots with server symbols merged in."""
    coop = build_cooperation_schedule(params, derived, demands)
    return schedule_from_slots(params, derived, demands, coop)


@dataclass
class ValidationReport:
    """Machine-checked model constraints; ok iff no failures."""

    failures: list[str] = field(default_factory=list)
    user_slot_count: int = 0
    server_symbol_count: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, constraint: str, detail: str) -> None:
        self.failures.append(f"{constraint}: {detail}")


def validate_schedule(
    schedule: Schedule,
    caches: list[CacheState],
    demands: DemandVector,
    derived: DerivedParams,
) -> ValidationReport:
    """Check every slot/symbol invariant plus exact-once delivery coverage."""
    params = schedule.params
    rep = ValidationReport()
    cache_of = {c.user: c.entries for c in caches}
    delivered_user: list[tuple[int, SubfileId]] = []
    delivered_server: list[tuple[int, SubfileId]] = []

    for i, slot in enumerate(schedule.slots):
        groups = slot.partition
        seen: set[int] = set()
        for grp in groups:
            if seen & set(grp):
                rep.fail("groups-disjoint", f"slot {i}: overlapping groups")
            seen |= set(grp)
        if not set(seen) <= set(range(1, params.K + 1)):
            rep.fail("groups-subset", f"slot {i}: group member outside [K]")
        if len(slot.user_symbols) > derived.alpha:
            rep.fail("alpha-cap", f"slot {i}: {len(slot.user_symbols)} senders > alpha")
        senders = [s.sender for s in slot.user_symbols]
        if len(set(senders)) != len(senders):
            rep.fail("one-sender-per-group", f"slot {i}: duplicate sender")
        group_of = {u: gi for gi, grp in enumerate(groups) for u in grp}
        used_groups: set[int] = set()
        recip_seen: set[int] = set()
        for sym in slot.user_symbols:
            u = sym.sender
            if u not in group_of:
                rep.fail("sender-in-partition", f"slot {i}: sender {u} not in any group")
                continue
            gi = group_of[u]
            if gi in used_groups:
                rep.fail("one-sender-per-group", f"slot {i}: group {gi} has two senders")
            used_groups.add(gi)
            if len(sym.recipients) == 0:
                rep.fail("nonempty-symbol", f"slot {i}: empty symbol from {u}")
            if len(sym.recipients) > derived.g:
                rep.fail(
                    "component-cap",
                    f"slot {i}: {len(sym.recipients)} components > g={derived.g}",
                )
            comp_by_r = sym.recipient_map
            for r, sid in comp_by_r.items():
                if r == u or group_of.get(r) != gi:
                    rep.fail(
                        "recipient-in-group",
                        f"slot {i}: recipient {r} outside sender {u}'s group",
                    )
                if r in recip_seen:
                    rep.fail("one-source-per-user", f"slot {i}: user {r} receives twice")
                recip_seen.add(r)
                if r in senders:
                    rep.fail("no-send-and-receive", f"slot {i}: user {r} sends and receives")
                if sid not in cache_of[u]:
                    rep.fail("sender-caches-components", f"slot {i}: {u} lacks {sid}")
                if sid.n != demands.get(r):
                    rep.fail("component-matches-demand", f"slot {i}: {sid} not wanted by {r}")
                if r in sid.T:
                    rep.fail("recipient-lacks-own", f"slot {i}: {r} already caches {sid}")
                for other_r, other in comp_by_r.items():
                    if other_r != r and other not in cache_of[r]:
                        rep.fail(
                            "decodability",
                            f"slot {i}: recipient {r} cannot cancel {other}",
                        )
                delivered_user.append((r, sid))
        if slot.server_symbol is not None:
            sym = slot.server_symbol
            if sym.sender != SERVER:
                rep.fail("server-sender", f"slot {i}: server symbol sent by {sym.sender}")
            comp_by_r = sym.recipient_map
            for r, sid in comp_by_r.items():
                if sid.n != demands.get(r):
                    rep.fail("component-matches-demand", f"slot {i}: {sid} not wanted by {r}")
                if r in sid.T:
                    rep.fail("recipient-lacks-own", f"slot {i}: {r} already caches {sid}")
                for other_r, other in comp_by_r.items():
                    if other_r != r and other not in cache_of[r]:
                        rep.fail(
                            "decodability",
                            f"slot {i}: recipient {r} cannot cancel {other}",
                        )
                delivered_server.append((r, sid))

    # Coverage: demanded-and-uncached subfiles, split by layer, exactly once.
    want_user: set[tuple[int, SubfileId]] = set()
    want_server: set[tuple[int, SubfileId]] = set()
    for k in range(1, params.K + 1):
        for l in range(1, derived.L + 1):
            for T in subsets(params.K, derived.t):
                if k in T:
                    continue
                pair = (k, SubfileId(demands[k], l, T))
                (want_user if l <= derived.L1 else want_server).add(pair)
    for name, got, want in (
        ("user-stream", delivered_user, want_user),
        ("server-stream", delivered_server, want_server),
    ):
        if len(got) != len(set(got)):
            rep.fail("exactly-once", f"{name}: duplicate delivery")
        missing = want - set(got)
        extra = set(got) - want
        if missing:
            rep.fail("coverage", f"{name}: {len(missing)} missing, e.g. {sorted(missing)[:3]}")
        if extra:
            rep.fail("coverage", f"{name}: {len(extra)} extra, e.g. {sorted(extra)[:3]}")

    rep.user_slot_count = schedule.user_slot_count
    rep.server_symbol_count = schedule.server_symbol_count
    return rep


# -- schedule file format ----------------------------------------------------

def _sym_to_json(sym: TransmissionSymbol) -> dict:
    return {
        "sender": "server" if sym.sender == SERVER else sym.sender,
        "recipients": [
            {"user": r, "component": [sid.n, sid.l, list(sid.T)]}
            for r, sid in sym.recipients
        ],
    }


def _sym_from_json(obj: dict) -> TransmissionSymbol:
    sender = SERVER if obj["sender"] == "server" else int(obj["sender"])
    recips = {
        int(e["user"]): SubfileId(e["component"][0], e["component"][1], tuple(e["component"][2]))
        for e in obj["recipients"]
    }
    return TransmissionSymbol.make(sender, recips)


def export_schedule(schedule: Schedule, fp) -> None:
    """Write the schedule as JSON; round-trips bit-exactly via import_schedule."""
    p, d = schedule.params, schedule.derived
    doc = {
        "params": {
            "N": p.N,
            "K": p.K,
            "M": str(p.M),
            "alpha_max": p.alpha_max,
        },
        "derived": {"t": d.t, "alpha": d.alpha, "L1": d.L1, "L2": d.L2, "g": d.g},
        "demands": {str(k): n for k, n in schedule.demands},
        "expected_user_slots": schedule.expected_user_slots,
        "slots": [
            {
                "partition": [list(grp) for grp in slot.partition],
                "server": _sym_to_json(slot.server_symbol) if slot.server_symbol else None,
                "users": [_sym_to_json(s) for s in slot.user_symbols],
            }
            for slot in schedule.slots
        ],
    }
    json.dump(doc, fp, indent=1, sort_keys=True)


def import_schedule(fp) -> Schedule:
    from fractions import Fraction

    doc = json.load(fp)
    pj = doc["params"]
    params = SystemParams(
        N=pj["N"], K=pj["K"], M=Fraction(pj["M"]), alpha_max=pj["alpha_max"]
    )
    dj = doc["derived"]
    derived = DerivedParams(t=dj["t"], alpha=dj["alpha"], L1=dj["L1"], L2=dj["L2"], g=dj["g"])
    demands = tuple(sorted((int(k), int(n)) for k, n in doc["demands"].items()))
    slots = []
    user_slots = 0
    server_syms = 0
    for sj in doc["slots"]:
        part = tuple(tuple(grp) for grp in sj["partition"])
        users = tuple(_sym_from_json(s) for s in sj["users"])
        srv = _sym_from_json(sj["server"]) if sj["server"] else None
        if users:
            user_slots += 1
        if srv:
            server_syms += 1
        slots.append(Slot(part, users, srv))
    expected = doc["expected_user_slots"]
    return Schedule(
        params=params,
        derived=derived,
        demands=demands,
        slots=tuple(slots),
        user_slot_count=user_slots,
        server_symbol_count=server_syms,
        expected_user_slots=expected,
        packed=(user_slots == expected),
    )


def schedule_from_slots(
    params: SystemParams,
    derived: DerivedParams,
    demands: DemandVector,
    coop_slots: Iterable[Slot],
) -> Schedule:
    """Combine cooperation slots (built or transcribed) with the generated
    server stream into a Schedule."""
    coop = list(coop_slots)
    server = build_server_schedule(params, derived, demands)
    n = max(len(coop), len(server))
    slots = []
    for i in range(n):
        base = coop[i] if i < len(coop) else Slot(partition=(), user_symbols=())
        srv = server[i] if i < len(server) else None
        slots.append(Slot(base.partition, base.user_symbols, srv))
    expected = expected_slot_count(params, derived)
    return Schedule(
        params=params,
        derived=derived,
        demands=tuple(sorted(demands.items())),
        slots=tuple(slots),
        user_slot_count=len(coop),
        server_symbol_count=len(server),
        expected_user_slots=expected,
        packed=(len(coop) == expected),
    )
