"""Name-private forwarding plane keyed by hierarchical Bloom filters.

A name /a/b/c travels as (B_1, B_2, B_3): B_i holds the canonical text of the
i-component prefix. Routers never see plaintext names. They keep:

- a routing table with one filter per FIB entry, matched from B_n down to B_1;
- a content store keyed by the bytes of B_n, summarised by a counting filter;
- one counting filter per face as the PIT.

Serialization of every filter is a 24-byte header (m, h, seed as 8-byte
big-endian unsigned integers) followed by the payload: the bit array packed
big-endian for BloomFilter, one byte per counter for CountingBloom.
"""
from __future__ import annotations

import logging
import math
import struct
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import mmh3
import numpy as np
from bitarray import bitarray

from .forwarding import ActionKind, FibTable, RouterState, on_data, on_interest
from .names import ContentObject, Interest, Name

logger = logging.getLogger("conlab")

HEADER = struct.Struct(">QQQ")
COUNTER_MAX = 255


def _indexes(element: bytes, m: int, h: int, seed: int) -> List[int]:
    h1, h2 = mmh3.hash64(element, seed, signed=False)
    return [(h1 + i * h2) % m for i in range(h)]


def expected_fp_rate(m: int, h: int, n: int) -> float:
    return (1.0 - math.exp(-h * n / m)) ** h


def _element(x: bytes | str | Name) -> bytes:
    if isinstance(x, Name):
        return str(x).encode("utf-8")
    if isinstance(x, str):
        return x.encode("utf-8")
    return x


class BloomFilter:
    def __init__(self, m: int = 2048, h: int = 5, seed: int = 0, bits: Optional[bitarray] = None):
        if m <= 0 or h <= 0:
            raise ValueError("m and h must be positive")
        self.m = m
        self.h = h
        self.seed = seed
        if bits is None:
            bits = bitarray(m, endian="big")
            bits.setall(0)
        elif len(bits) != m:
            raise ValueError(f"bit array has {len(bits)} bits, expected {m}")
        self.bits = bits

    def add(self, element: bytes | str | Name) -> None:
        for ix in _indexes(_element(element), self.m, self.h, self.seed):
            self.bits[ix] = 1

    def query(self, element: bytes | str | Name) -> bool:
        bits = self.bits
        return all(bits[ix] for ix in _indexes(_element(element), self.m, self.h, self.seed))

    __contains__ = query

    def issubset(self, other: "BloomFilter") -> bool:
        """All set bits of self are set in other."""
        return not (self.bits & ~other.bits).any()

    def count(self) -> int:
        return self.bits.count(1)

    def estimated_fp_rate(self) -> float:
        return (self.count() / self.m) ** self.h

    def key(self) -> bytes:
        return self.bits.tobytes()

    def to_bytes(self) -> bytes:
        return HEADER.pack(self.m, self.h, self.seed) + self.bits.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "BloomFilter":
        if len(data) < HEADER.size:
            raise ValueError("truncated bloom filter header")
        m, h, seed = HEADER.unpack_from(data)
        body = data[HEADER.size:]
        if len(body) != (m + 7) // 8:
            raise ValueError(f"bloom payload is {len(body)} bytes, expected {(m + 7) // 8}")
        bits = bitarray(endian="big")
        bits.frombytes(body)
        return cls(m, h, seed, bits[:m])

    def __eq__(self, other) -> bool:
        return (isinstance(other, BloomFilter) and (self.m, self.h, self.seed) == (other.m, other.h, other.seed)
                and self.bits == other.bits)

    def __repr__(self) -> str:
        return f"BloomFilter(m={self.m}, h={self.h}, seed={self.seed}, set={self.count()})"


class CountingBloom:
    """8-bit saturating counters. Saturated counters are never decremented.

    ``shadow`` is the exact multiset of live elements; it only serves rebuilds
    and tests.
    """

    def __init__(self, m: int = 2048, h: int = 5, seed: int = 0, counters: Optional[np.ndarray] = None):
        if m <= 0 or h <= 0:
            raise ValueError("m and h must be positive")
        self.m = m
        self.h = h
        self.seed = seed
        self.counters = np.zeros(m, dtype=np.uint8) if counters is None else counters.astype(np.uint8)
        self.shadow: Counter = Counter()
        self.saturated = False

    def add(self, element: bytes | str | Name) -> bool:
        """Insert; returns True when a counter saturated."""
        e = _element(element)
        self.shadow[e] += 1
        hit_max = False
        for ix in set(_indexes(e, self.m, self.h, self.seed)):
            if self.counters[ix] < COUNTER_MAX:
                self.counters[ix] += 1
            if self.counters[ix] == COUNTER_MAX:
                hit_max = True
        if hit_max:
            self.saturated = True
        return hit_max

    def remove(self, element: bytes | str | Name) -> bool:
        e = _element(element)
        ixs = set(_indexes(e, self.m, self.h, self.seed))
        if any(self.counters[ix] == 0 for ix in ixs):
            return False
        for ix in ixs:
            if self.counters[ix] < COUNTER_MAX:
                self.counters[ix] -= 1
        if self.shadow.get(e, 0) > 0:
            self.shadow[e] -= 1
            if self.shadow[e] == 0:
                del self.shadow[e]
        return True

    def query(self, element: bytes | str | Name) -> bool:
        c = self.counters
        return all(c[ix] > 0 for ix in _indexes(_element(element), self.m, self.h, self.seed))

    __contains__ = query

    def count_of(self, element: bytes | str | Name) -> int:
        return int(min(self.counters[ix] for ix in _indexes(_element(element), self.m, self.h, self.seed)))

    def rebuild(self) -> None:
        """Recount every counter from the shadow multiset."""
        self.counters[:] = 0
        self.saturated = False
        for e, n in self.shadow.items():
            for ix in set(_indexes(e, self.m, self.h, self.seed)):
                self.counters[ix] = min(COUNTER_MAX, int(self.counters[ix]) + n)
                if self.counters[ix] == COUNTER_MAX:
                    self.saturated = True

    def to_bytes(self) -> bytes:
        return HEADER.pack(self.m, self.h, self.seed) + self.counters.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CountingBloom":
        if len(data) < HEADER.size:
            raise ValueError("truncated counting filter header")
        m, h, seed = HEADER.unpack_from(data)
        body = data[HEADER.size:]
        if len(body) != m:
            raise ValueError(f"counter payload is {len(body)} bytes, expected {m}")
        return cls(m, h, seed, np.frombuffer(body, dtype=np.uint8).copy())


@dataclass(frozen=True)
class BloomParams:
    m: int = 2048
    h: int = 5
    seed: int = 0

    def new_filter(self) -> BloomFilter:
        return BloomFilter(self.m, self.h, self.seed)

    def new_counting(self) -> CountingBloom:
        return CountingBloom(self.m, self.h, self.seed)


@dataclass(frozen=True)
class HierarchicalBloom:
    levels: Tuple[BloomFilter, ...]

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def last(self) -> BloomFilter:
        return self.levels[-1]

    def key(self) -> bytes:
        return self.last.key()


def encode_name(n: Name, params: BloomParams = BloomParams()) -> HierarchicalBloom:
    if not n.components:
        raise ValueError("cannot encode the root name")
    levels = []
    for i in range(1, len(n) + 1):
        f = params.new_filter()
        f.add(n.prefix(i))
        levels.append(f)
    return HierarchicalBloom(tuple(levels))


def bf_query(f: BloomFilter | CountingBloom, element: bytes | str | Name) -> bool:
    return f.query(element)


# ----------------- Bloom-keyed router -----------------

@dataclass(frozen=True)
class BloomAction:
    kind: ActionKind
    face: int = -1
    detail: str = ""


@dataclass
class BloomRoute:
    level: int
    filter: BloomFilter
    face: int
    # plaintext prefix, for divergence classification only
    shadow: Name = field(default_factory=Name)


@dataclass
class BloomStats:
    hits: int = 0
    misses: int = 0
    collapses: int = 0
    forwards: int = 0
    drops: int = 0
    cs_false_positives: int = 0
    pit_false_positives: int = 0
    route_false_positives: int = 0
    resets: int = 0


class BloomRouter:
    def __init__(self, node: str, capacity: int, params: BloomParams = BloomParams()):
        self.node = node
        self.params = params
        self.capacity = capacity
        self.routes: List[BloomRoute] = []
        self.cs: "OrderedDict[bytes, ContentObject]" = OrderedDict()
        self.cs_summary = params.new_counting()
        self.pit: Dict[int, CountingBloom] = {}
        self.stats = BloomStats()
        self.last_route: Optional[BloomRoute] = None
        self.last_false_positive = ""

    def add_route(self, prefix: Name, face: int) -> None:
        self.routes.append(BloomRoute(len(prefix), encode_name(prefix, self.params).last, face, prefix))
        self.routes.sort(key=lambda r: (r.level, r.face))

    @classmethod
    def from_fib(cls, node: str, capacity: int, fib: FibTable, params: BloomParams = BloomParams()) -> "BloomRouter":
        r = cls(node, capacity, params)
        for prefix, face in fib.entries():
            r.add_route(prefix, face)
        return r

    def _face_pit(self, face: int) -> CountingBloom:
        f = self.pit.get(face)
        if f is None:
            f = self.pit[face] = self.params.new_counting()
        return f

    def _pit_add(self, face: int, key: bytes) -> None:
        f = self._face_pit(face)
        if f.add(key):
            f.rebuild()
            self.stats.resets += 1
            if f.saturated:
                logger.warning("Counting PIT on %s face %d still saturated after rebuild", self.node, face)

    def _route(self, hb: HierarchicalBloom) -> Optional[BloomRoute]:
        for i in range(len(hb), 0, -1):
            probe = hb.levels[i - 1]
            for route in self.routes:
                if route.level == i and probe.issubset(route.filter):
                    return route
        return None

    def on_interest(self, hb: HierarchicalBloom, in_face: int) -> List[BloomAction]:
        self.last_route = None
        self.last_false_positive = ""
        key = hb.key()

        if self.cs_summary.query(key):
            obj = self.cs.get(key)
            if obj is not None:
                self.cs.move_to_end(key)
                self.stats.hits += 1
                return [BloomAction(ActionKind.SEND_DATA, in_face, "hit")]
            self.stats.cs_false_positives += 1
            self.last_false_positive = "cs"

        pending = [f for f, pit in sorted(self.pit.items()) if pit.query(key)]
        if pending:
            if not any(self.pit[f].shadow.get(key) for f in pending):
                self.stats.pit_false_positives += 1
                self.last_false_positive = "pit"
            self._pit_add(in_face, key)
            self.stats.collapses += 1
            return [BloomAction(ActionKind.COLLAPSE, in_face)]

        self.stats.misses += 1
        route = self._route(hb)
        self.last_route = route
        if route is None or route.face == in_face:
            self.stats.drops += 1
            return [BloomAction(ActionKind.DROP, in_face, "reason=no-route")]
        self._pit_add(in_face, key)
        self.stats.forwards += 1
        return [BloomAction(ActionKind.FORWARD, route.face, f"level={route.level}")]

    def on_data(self, key: bytes, obj: ContentObject, in_face: int) -> List[BloomAction]:
        self.last_false_positive = ""
        faces = [f for f, pit in sorted(self.pit.items()) if f != in_face and pit.query(key)]
        if not faces:
            return []
        actions = []
        for f in faces:
            pit = self.pit[f]
            live = pit.shadow.get(key, 0)
            if live == 0:
                self.stats.pit_false_positives += 1
                self.last_false_positive = "pit"
            for _ in range(live):
                pit.remove(key)
            actions.append(BloomAction(ActionKind.SEND_DATA, f))
        if self.capacity > 0:
            evicted = ""
            if key in self.cs:
                self.cs.move_to_end(key)
            else:
                if len(self.cs) >= self.capacity:
                    old, _ = self.cs.popitem(last=False)
                    self.cs_summary.remove(old)
                    evicted = "evicted"
                self.cs[key] = obj
                self.cs_summary.add(key)
            actions.append(BloomAction(ActionKind.CACHE, -1, evicted))
        return actions


# ----------------- Plain vs Bloom equivalence -----------------

@dataclass(frozen=True)
class ReplayEvent:
    kind: str  # "interest" | "data"
    name: Name
    face: int


@dataclass(frozen=True)
class Divergence:
    index: int
    event: ReplayEvent
    plain: Tuple[Tuple[str, int], ...]
    bloom: Tuple[Tuple[str, int], ...]
    cause: str  # "false-positive" | "bug"


@dataclass
class DivergenceReport:
    events: int = 0
    divergences: List[Divergence] = field(default_factory=list)
    false_positives: int = 0

    @property
    def bugs(self) -> List[Divergence]:
        return [d for d in self.divergences if d.cause == "bug"]


def _plain_sig(actions) -> Tuple[Tuple[str, int], ...]:
    out = []
    for a in actions:
        face = a.face if hasattr(a, "face") else -1
        out.append((a.kind.value, face))
    return tuple(out)


def _bloom_sig(actions: Sequence[BloomAction]) -> Tuple[Tuple[str, int], ...]:
    return tuple((a.kind.value, a.face) for a in actions)


def replay_workload(names: Sequence[Name], requests: int, downstream: Sequence[int],
                    rng: np.random.Generator, data_ratio: float = 0.4) -> List[ReplayEvent]:
    """Interleave interests from random downstream faces with returning data for outstanding names."""
    events: List[ReplayEvent] = []
    outstanding: List[Name] = []
    issued = 0
    while issued < requests or outstanding:
        send_data = outstanding and (issued >= requests or rng.random() < data_ratio)
        if send_data:
            n = outstanding.pop(int(rng.integers(len(outstanding))))
            events.append(ReplayEvent("data", n, 0))
        else:
            n = names[int(rng.integers(len(names)))]
            face = int(downstream[int(rng.integers(len(downstream)))])
            events.append(ReplayEvent("interest", n, face))
            if n not in outstanding:
                outstanding.append(n)
            issued += 1
    return events


def equivalence_check(plain: RouterState, bloom: BloomRouter, workload: Iterable[ReplayEvent],
                      objects: Dict[Name, ContentObject], upstream_face: int = 1) -> DivergenceReport:
    """Replay one workload through a plaintext router and a Bloom router side by side.

    Every divergence is attributed to a false positive when one of the Bloom
    structures answered positively without authoritative backing, otherwise it
    is reported as a bug.
    """
    report = DivergenceReport()
    params = bloom.params
    nonce = 0
    for idx, ev in enumerate(workload):
        report.events += 1
        now = idx
        if ev.kind == "interest":
            nonce += 1
            p = on_interest(plain, Interest(ev.name, nonce=nonce), ev.face, now)
            hb = encode_name(ev.name, params)
            b = bloom.on_interest(hb, ev.face)
            route = bloom.last_route
            route_fp = route is not None and route.shadow != ev.name.prefix(route.level)
            if route_fp:
                bloom.stats.route_false_positives += 1
        else:
            obj = objects[ev.name]
            face = upstream_face if ev.face == 0 else ev.face
            p = on_data(plain, obj, face, now)
            b = bloom.on_data(encode_name(ev.name, params).key(), obj, face)
            route_fp = False
        fp = bool(bloom.last_false_positive) or route_fp
        if fp:
            report.false_positives += 1
        ps, bs = _plain_sig(p), _bloom_sig(b)
        if ps != bs:
            report.divergences.append(Divergence(idx, ev, ps, bs, "false-positive" if fp else "bug"))
    if report.divergences:
        logger.warning("Bloom replay diverged at %d of %d events", len(report.divergences), report.events)
    return report
