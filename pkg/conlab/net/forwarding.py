"""CCNx-style router pipeline: Content Store, PIT collapse, FIB longest-prefix match.

Routers are plain state objects; ``on_interest`` and ``on_data`` are the only
functions that mutate them. Both return a list of actions that the network layer
executes (transmission, trace records). Caching and reply timing are delegated to
injected policies so defenses plug in without touching the pipeline.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Protocol, Set, Tuple, Union

import numpy as np

from .names import ContentObject, Interest, Name, is_prefix_of, matches_interest

DEFAULT_PIT_LIFETIME_US = 4_000_000


class ActionKind(str, Enum):
    SEND_DATA = "send_data"
    COLLAPSE = "collapse"
    FORWARD = "forward"
    DROP = "drop"
    CACHE = "cache"


@dataclass(frozen=True)
class SendData:
    obj: ContentObject
    face: int
    delay: int = 0
    from_cache: bool = False
    kind = ActionKind.SEND_DATA

    def trace_fields(self) -> Tuple[str, int, str]:
        detail = f"delay={self.delay}" + (";hit" if self.from_cache else "")
        return str(self.obj.name), self.face, detail


@dataclass(frozen=True)
class CollapsePit:
    name: Name
    face: int
    kind = ActionKind.COLLAPSE

    def trace_fields(self) -> Tuple[str, int, str]:
        return str(self.name), self.face, ""


@dataclass(frozen=True)
class ForwardInterest:
    interest: Interest
    face: int
    note: str = ""
    kind = ActionKind.FORWARD

    def trace_fields(self) -> Tuple[str, int, str]:
        scope = "" if self.interest.scope is None else f"scope={self.interest.scope}"
        detail = ";".join(p for p in (scope, self.note) if p)
        return str(self.interest.name), self.face, detail


@dataclass(frozen=True)
class Drop:
    name: Name
    reason: str
    face: int = -1
    kind = ActionKind.DROP

    def trace_fields(self) -> Tuple[str, int, str]:
        return str(self.name), self.face, f"reason={self.reason}"


@dataclass(frozen=True)
class Cached:
    name: Name
    evicted: Optional[Name] = None
    kind = ActionKind.CACHE

    def trace_fields(self) -> Tuple[str, int, str]:
        return str(self.name), -1, "" if self.evicted is None else f"evicted={self.evicted}"


Action = Union[SendData, CollapsePit, ForwardInterest, Drop, Cached]


# ----------------- Content Store -----------------

@dataclass
class CsEntry:
    obj: ContentObject
    last_access: int
    inserted: int


REPLACEMENT_POLICIES = ("lru", "fifo", "random")


class ContentStore:
    """Bounded object cache keyed by full name.

    Entry order is recency for ``lru`` and insertion for ``fifo``/``random``.
    """

    def __init__(self, capacity: int, replacement: str = "lru", rng: Optional[np.random.Generator] = None):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        if replacement not in REPLACEMENT_POLICIES:
            raise ValueError(f"unknown replacement policy {replacement!r}; expected one of {REPLACEMENT_POLICIES}")
        self.capacity = capacity
        self.replacement = replacement
        self.entries: "OrderedDict[Name, CsEntry]" = OrderedDict()
        self._rng = rng if rng is not None else np.random.default_rng(0)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: Name) -> bool:
        return name in self.entries

    def names(self) -> List[Name]:
        return sorted(self.entries)

    @property
    def fill(self) -> float:
        if self.capacity == 0:
            return 1.0
        return len(self.entries) / self.capacity

    def lookup(self, i: Interest, now: int = 0) -> Optional[ContentObject]:
        # an exact-name entry always sorts first among the names it prefixes
        hit = self.entries.get(i.name)
        if hit is not None and i.name not in i.exclusions:
            best = i.name
        else:
            best = None
            for n in self.entries:
                if is_prefix_of(i.name, n) and n not in i.exclusions and (best is None or n < best):
                    best = n
            if best is None:
                return None
        entry = self.entries[best]
        entry.last_access = now
        if self.replacement == "lru":
            self.entries.move_to_end(best)
        return entry.obj

    def insert(self, obj: ContentObject, now: int = 0) -> Optional[Name]:
        """Store obj; returns the evicted name, if any."""
        if self.capacity == 0:
            return None
        existing = self.entries.get(obj.name)
        if existing is not None:
            existing.obj = obj
            existing.last_access = now
            if self.replacement == "lru":
                self.entries.move_to_end(obj.name)
            return None
        evicted = None
        if len(self.entries) >= self.capacity:
            if self.replacement == "random":
                victim = list(self.entries)[int(self._rng.integers(len(self.entries)))]
            else:
                victim = next(iter(self.entries))
            del self.entries[victim]
            evicted = victim
        self.entries[obj.name] = CsEntry(obj=obj, last_access=now, inserted=now)
        return evicted


def cs_lookup(cs: ContentStore, i: Interest, now: int = 0) -> Optional[ContentObject]:
    return cs.lookup(i, now)


# ----------------- PIT -----------------

PitKey = Tuple[Name, FrozenSet[Name]]


@dataclass
class PitEntry:
    interest: Interest
    faces: Set[int]
    created: int
    expiry: int
    upstream: int
    # remaining scope carried by the outstanding forward; None = unlimited
    scope_sent: Optional[int] = None


def pit_key(i: Interest) -> PitKey:
    return (i.name, i.exclusions)


class PitTable:
    def __init__(self):
        self.entries: Dict[PitKey, PitEntry] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def expire(self, now: int) -> List[PitEntry]:
        gone = [k for k, e in self.entries.items() if e.expiry <= now]
        return [self.entries.pop(k) for k in gone]

    def get(self, i: Interest) -> Optional[PitEntry]:
        return self.entries.get(pit_key(i))

    def add(self, entry: PitEntry) -> None:
        self.entries[pit_key(entry.interest)] = entry

    def match(self, o: ContentObject) -> List[PitKey]:
        return [k for k, e in self.entries.items() if matches_interest(e.interest, o)]

    def pop(self, key: PitKey) -> PitEntry:
        return self.entries.pop(key)


# ----------------- FIB -----------------

class FibTable:
    def __init__(self):
        self.routes: Dict[Name, Set[int]] = {}

    def add(self, prefix: Name, face: int) -> None:
        self.routes.setdefault(prefix, set()).add(face)

    def entries(self) -> List[Tuple[Name, int]]:
        return sorted((p, f) for p, faces in self.routes.items() for f in faces)

    def lpm(self, n: Name) -> Optional[int]:
        for i in range(len(n), -1, -1):
            faces = self.routes.get(n.prefix(i))
            if faces:
                return min(faces)
        return None


def fib_lpm(fib: FibTable, n: Name) -> Optional[int]:
    return fib.lpm(n)


# ----------------- Policies -----------------

@dataclass
class CacheContext:
    path_position: int
    path_length: int
    cache_fill: float
    rng: np.random.Generator


class CachePolicy(Protocol):
    def decide(self, o: ContentObject, ctx: CacheContext) -> bool: ...


class ReplyPolicy(Protocol):
    def delay(self, state: "RouterState", name: Name, is_cache_hit: bool) -> int: ...

    def on_fetch(self, state: "RouterState", name: Name, rtt: int) -> None: ...


class Collaboration(Protocol):
    def route(self, state: "RouterState", i: Interest, in_face: int) -> Tuple[Optional[int], str]: ...

    def may_cache(self, state: "RouterState", o: ContentObject) -> bool: ...


class AlwaysCache:
    def decide(self, o: ContentObject, ctx: CacheContext) -> bool:
        return True


class ImmediateReply:
    def delay(self, state: "RouterState", name: Name, is_cache_hit: bool) -> int:
        return 0

    def on_fetch(self, state: "RouterState", name: Name, rtt: int) -> None:
        return None


@dataclass
class RouterStats:
    interests: int = 0
    hits: int = 0
    misses: int = 0
    collapses: int = 0
    forwards: int = 0
    relays: int = 0
    fallbacks: int = 0
    inserts: int = 0
    unsolicited: int = 0
    drops: Dict[str, int] = field(default_factory=dict)

    def drop(self, reason: str) -> None:
        self.drops[reason] = self.drops.get(reason, 0) + 1


@dataclass
class RouterState:
    node: str
    cs: ContentStore
    pit: PitTable = field(default_factory=PitTable)
    fib: FibTable = field(default_factory=FibTable)
    cache_policy: CachePolicy = field(default_factory=AlwaysCache)
    reply_policy: ReplyPolicy = field(default_factory=ImmediateReply)
    collaboration: Optional[Collaboration] = None
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    pit_lifetime: int = DEFAULT_PIT_LIFETIME_US
    path_position: int = 0
    path_length: int = 1
    meta: Dict[Name, Any] = field(default_factory=dict)
    stats: RouterStats = field(default_factory=RouterStats)
    seen_nonces: Dict[Tuple[Name, int], int] = field(default_factory=dict)


def _scope_covered(scope_sent: Optional[int], remaining: Optional[int]) -> bool:
    if scope_sent is None:
        return True
    return remaining is not None and remaining <= scope_sent


def _expire_nonces(r: RouterState, now: int) -> None:
    stale = [k for k, until in r.seen_nonces.items() if until <= now]
    for k in stale:
        del r.seen_nonces[k]


def _drop(r: RouterState, name: Name, reason: str, face: int) -> List[Action]:
    r.stats.drop(reason)
    return [Drop(name, reason, face)]


def on_interest(r: RouterState, i: Interest, in_face: int, now: int) -> List[Action]:
    r.stats.interests += 1
    lifetime = i.lifetime if i.lifetime is not None else r.pit_lifetime

    _expire_nonces(r, now)
    nonce_key = (i.name, i.nonce)
    seen_until = r.seen_nonces.get(nonce_key)
    if seen_until is not None and seen_until > now:
        return _drop(r, i.name, "duplicate-nonce", in_face)
    r.seen_nonces[nonce_key] = now + lifetime

    remaining: Optional[int] = None
    if i.scope is not None:
        if i.scope == 0:
            return _drop(r, i.name, "scope-exhausted", in_face)
        remaining = i.scope - 1

    r.pit.expire(now)

    obj = r.cs.lookup(i, now)
    if obj is not None:
        r.stats.hits += 1
        delay = r.reply_policy.delay(r, obj.name, True)
        return [SendData(obj, in_face, delay, from_cache=True)]

    entry = r.pit.get(i)
    if entry is not None and _scope_covered(entry.scope_sent, remaining):
        entry.faces.add(in_face)
        r.stats.collapses += 1
        return [CollapsePit(i.name, in_face)]

    r.stats.misses += 1
    if remaining == 0:
        return _drop(r, i.name, "scope-exhausted", in_face)

    face: Optional[int] = None
    note = ""
    if r.collaboration is not None:
        face, note = r.collaboration.route(r, i, in_face)
    if face is None:
        face = r.fib.lpm(i.name)
    if face is None or face == in_face:
        return _drop(r, i.name, "no-route", in_face)

    r.reply_policy.delay(r, i.name, False)
    if note == "relay":
        r.stats.relays += 1
    elif note == "fallback":
        r.stats.fallbacks += 1
    r.stats.forwards += 1

    if entry is not None:
        entry.faces.add(in_face)
        # only reached when the new interest travels further than the pending one
        entry.scope_sent = remaining
        entry.expiry = max(entry.expiry, now + lifetime)
        entry.upstream = face
    else:
        r.pit.add(PitEntry(interest=i, faces={in_face}, created=now, expiry=now + lifetime,
                           upstream=face, scope_sent=remaining))
    fwd = i if remaining is None else i.with_scope(remaining)
    return [ForwardInterest(fwd, face, note)]


def on_data(r: RouterState, o: ContentObject, in_face: int, now: int) -> List[Action]:
    r.pit.expire(now)
    keys = r.pit.match(o)
    if not keys:
        r.stats.unsolicited += 1
        return []

    faces: Set[int] = set()
    created = now
    for k in keys:
        e = r.pit.pop(k)
        faces |= e.faces
        created = min(created, e.created)
    faces.discard(in_face)

    r.reply_policy.on_fetch(r, o.name, now - created)

    actions: List[Action] = [SendData(o, f, 0) for f in sorted(faces)]
    may_cache = r.collaboration.may_cache(r, o) if r.collaboration is not None else True
    if may_cache:
        ctx = CacheContext(r.path_position, r.path_length, r.cs.fill, r.rng)
        if r.cs.capacity > 0 and r.cache_policy.decide(o, ctx):
            evicted = r.cs.insert(o, now)
            r.stats.inserts += 1
            actions.append(Cached(o.name, evicted))
    return actions
