"""Deterministic discrete-event network on top of simpy.

Time is integer microseconds. Every node charges ``processing_us`` on each packet
it emits; links add their fixed one-way latency (plus optional seeded jitter).
A cache hit at the first router therefore costs ``2*L1 + 2*proc`` and every
further router hop adds ``2*(L + proc)``.
"""
from __future__ import annotations

import csv
import hashlib
import heapq
import io
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import simpy

from ..errors import ScenarioError
from ..models import AttackConfig, DefenseConfig, SimParams
from .defenses import build_policies
from .forwarding import (
    Action, ContentStore, ForwardInterest, RouterState, RouterStats, SendData, on_data, on_interest,
)
from .names import ContentObject, Interest, Name, matches_interest, smallest_match
from .provenance import DEFAULT_SCHEME, KeyPair, Keyring, sign_object

logger = logging.getLogger("conlab")

TRACE_HEADER = ("time", "node", "action", "name", "face", "detail")

Packet = Union[Interest, ContentObject]


class NodeKind(str, Enum):
    CONSUMER = "consumer"
    ROUTER = "router"
    PRODUCER = "producer"


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    latency: int


class Topology:
    """Nodes plus undirected links. Faces are numbered from 1 per node in link order."""

    def __init__(self):
        self.nodes: Dict[str, NodeKind] = {}
        self.links: List[Link] = []
        self._faces: Dict[str, Dict[int, Tuple[str, int]]] = {}

    def add_node(self, node: str, kind: NodeKind | str) -> "Topology":
        if node in self.nodes:
            raise ScenarioError(f"duplicate node {node!r}")
        self.nodes[node] = NodeKind(kind)
        self._faces[node] = {}
        return self

    def add_link(self, a: str, b: str, latency: int) -> "Topology":
        for n in (a, b):
            if n not in self.nodes:
                raise ScenarioError(f"link references unknown node {n!r}")
        if a == b:
            raise ScenarioError(f"self-link on {a!r}")
        if latency < 0:
            raise ScenarioError("link latency must be non-negative")
        self.links.append(Link(a, b, int(latency)))
        self._faces[a][len(self._faces[a]) + 1] = (b, int(latency))
        self._faces[b][len(self._faces[b]) + 1] = (a, int(latency))
        return self

    def of_kind(self, kind: NodeKind) -> List[str]:
        return [n for n, k in self.nodes.items() if k == kind]

    def consumers(self) -> List[str]:
        return self.of_kind(NodeKind.CONSUMER)

    def routers(self) -> List[str]:
        return self.of_kind(NodeKind.ROUTER)

    def producers(self) -> List[str]:
        return self.of_kind(NodeKind.PRODUCER)

    def faces(self, node: str) -> Dict[int, Tuple[str, int]]:
        return self._faces[node]

    def face_to(self, node: str, neighbor: str) -> Optional[int]:
        for face, (n, _lat) in self._faces[node].items():
            if n == neighbor:
                return face
        return None

    def neighbor(self, node: str, face: int) -> Tuple[str, int]:
        return self._faces[node][face]

    def attached_router(self, node: str) -> str:
        return self._faces[node][1][0]

    def validate(self) -> None:
        if not self.nodes:
            raise ScenarioError("topology has no nodes")
        for n, kind in self.nodes.items():
            if kind in (NodeKind.CONSUMER, NodeKind.PRODUCER):
                faces = self._faces[n]
                if len(faces) != 1 or self.nodes[faces[1][0]] != NodeKind.ROUTER:
                    raise ScenarioError(f"{kind.value} {n!r} must attach to exactly one router")


def path(t: Topology, src: str, dst: str) -> Optional[List[str]]:
    """Latency-shortest path; ties broken by hop count, then node ids. Only routers relay."""
    if src == dst:
        return [src]
    heap: List[Tuple[int, int, Tuple[str, ...]]] = [(0, 0, (src,))]
    done = set()
    while heap:
        cost, hops, p = heapq.heappop(heap)
        cur = p[-1]
        if cur == dst:
            return list(p)
        if cur in done:
            continue
        done.add(cur)
        if cur != src and t.nodes[cur] != NodeKind.ROUTER:
            continue
        for nb, lat in t.faces(cur).values():
            if nb not in done:
                heapq.heappush(heap, (cost + lat, hops + 1, p + (nb,)))
    return None


def anonymity_set(t: Topology, r: str) -> int:
    """Consumers whose path to some producer traverses router r."""
    count = 0
    for c in t.consumers():
        for p in t.producers():
            route = path(t, c, p)
            if route and r in route[1:-1]:
                count += 1
                break
    return count


def shared_anonymity_set(t: Topology, adversary: str, victim: str) -> Tuple[Optional[str], int]:
    """First router shared by the adversary's and victim's paths toward a producer.

    Returns (router, anonymity set of that router); the adversary is an immediate
    neighbor of the victim when the router is both parties' first hop.
    """
    for p in sorted(t.producers()):
        pa, pv = path(t, adversary, p), path(t, victim, p)
        if not pa or not pv:
            continue
        victim_routers = set(pv[1:-1])
        for r in pa[1:-1]:
            if r in victim_routers:
                return r, anonymity_set(t, r)
    return None, 0


# ----------------- Scenario -----------------

@dataclass(frozen=True)
class CatalogEntry:
    name: Name
    size: int
    producer: str


@dataclass(frozen=True)
class Request:
    time: int
    consumer: str
    name: Name
    scope: Optional[int] = None
    lifetime: Optional[int] = None


@dataclass
class Scenario:
    topology: Topology
    catalog: Dict[Name, CatalogEntry] = field(default_factory=dict)
    schedule: List[Request] = field(default_factory=list)
    attack: Optional[AttackConfig] = None
    defense: DefenseConfig = field(default_factory=DefenseConfig)
    params: SimParams = field(default_factory=SimParams)
    scenario_id: str = "scenario"

    def add_content(self, name: Name | str, size: int, producer: str) -> "Scenario":
        n = Name.parse(name) if isinstance(name, str) else name
        if not n.components:
            raise ScenarioError("catalog names need at least one component")
        self.catalog[n] = CatalogEntry(n, size, producer)
        return self

    def validate(self) -> None:
        self.topology.validate()
        for entry in self.catalog.values():
            if self.topology.nodes.get(entry.producer) != NodeKind.PRODUCER:
                raise ScenarioError(f"catalog entry {entry.name} names unknown producer {entry.producer!r}")
        announced: Dict[Name, str] = {}
        for entry in sorted(self.catalog.values(), key=lambda e: e.name):
            first = entry.name.prefix(1)
            owner = announced.setdefault(first, entry.producer)
            if owner != entry.producer:
                raise ScenarioError(f"{first} is announced by both {owner!r} and {entry.producer!r}")
        last = None
        for req in self.schedule:
            if last is not None and req.time < last:
                raise ScenarioError("schedule times must be sorted")
            last = req.time
            if self.topology.nodes.get(req.consumer) != NodeKind.CONSUMER:
                raise ScenarioError(f"schedule references unknown consumer {req.consumer!r}")
            entry = self.catalog.get(req.name)
            if entry is None:
                raise ScenarioError(f"schedule references {req.name} which is not in the catalog")
            if path(self.topology, req.consumer, entry.producer) is None:
                raise ScenarioError(f"producer {entry.producer!r} unreachable from {req.consumer!r} for {req.name}")

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, params=self.params.model_copy(update={"seed": seed}))

    def with_params(self, **updates) -> "Scenario":
        return replace(self, params=self.params.model_copy(update=updates))


def payload_for(name: Name, size: int) -> bytes:
    block = hashlib.sha256(str(name).encode("utf-8")).digest()
    return (block * (size // len(block) + 1))[:size]


def producer_key(producer: str) -> KeyPair:
    return _producer_key(producer)


@lru_cache(maxsize=None)
def _producer_key(producer: str) -> KeyPair:
    return DEFAULT_SCHEME.keygen(b"producer/" + producer.encode("utf-8"))


@lru_cache(maxsize=65536)
def signed_content(producer: str, name: Name, size: int) -> ContentObject:
    return sign_object(name, payload_for(name, size), _producer_key(producer))


# ----------------- Trace -----------------

@dataclass(frozen=True)
class TraceEvent:
    time: int
    node: str
    action: str
    name: str
    face: int = -1
    detail: str = ""

    def row(self) -> Tuple[str, ...]:
        return (str(self.time), self.node, self.action, self.name,
                "" if self.face < 0 else str(self.face), self.detail)


@dataclass
class Trace:
    events: List[TraceEvent] = field(default_factory=list)
    router_stats: Dict[str, RouterStats] = field(default_factory=dict)

    def add(self, time: int, node: str, action: str, name: str, face: int = -1, detail: str = "") -> None:
        self.events.append(TraceEvent(time, node, action, name, face, detail))

    def __len__(self) -> int:
        return len(self.events)

    def latencies(self) -> List[int]:
        out = []
        for e in self.events:
            if e.action == "deliver":
                out.append(int(e.detail.split("rtt=")[1].split(";")[0]))
        return out

    def to_csv(self, out: Optional[io.TextIOBase] = None) -> str:
        buf = out if out is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for e in self.events:
            w.writerow(e.row())
        return buf.getvalue() if out is None else ""

    def digest(self) -> str:
        return hashlib.sha256(self.to_csv().encode("utf-8")).hexdigest()


# ----------------- Live network -----------------

@dataclass
class Delivery:
    obj: ContentObject
    rtt: int
    issued: int


@dataclass
class _Pending:
    interest: Interest
    issued: int
    event: simpy.Event


class RouterNode:
    def __init__(self, net: "Network", state: RouterState):
        self.net = net
        self.id = state.node
        self.state = state

    def receive(self, packet: Packet, face: int) -> None:
        now = self.net.now
        if isinstance(packet, Interest):
            actions = on_interest(self.state, packet, face, now)
        else:
            actions = on_data(self.state, packet, face, now)
        self.net.execute(self.id, actions)


class ProducerNode:
    def __init__(self, net: "Network", node: str, catalog: Sequence[CatalogEntry]):
        self.net = net
        self.id = node
        self.entries = {e.name: e for e in catalog}

    def receive(self, packet: Packet, face: int) -> None:
        if not isinstance(packet, Interest):
            return
        best = packet.name if packet.name in self.entries and packet.name not in packet.exclusions else None
        if best is None:
            best = smallest_match(packet, self.entries)
        if best is None:
            self.net.trace.add(self.net.now, self.id, "drop", str(packet.name), face, "reason=no-content")
            return
        entry = self.entries[best]
        obj = signed_content(self.id, entry.name, entry.size)
        self.net.trace.add(self.net.now, self.id, "send_data", str(obj.name), face, "origin")
        self.net.transmit(self.id, face, obj, self.net.params.processing_us)


class ConsumerNode:
    def __init__(self, net: "Network", node: str, rng: np.random.Generator):
        self.net = net
        self.id = node
        self.rng = rng
        self.outstanding: Dict[int, _Pending] = {}

    def fetch(self, interest: Interest) -> simpy.Event:
        net = self.net
        if interest.nonce == 0 or interest.nonce in self.outstanding:
            interest = interest.with_nonce(int(self.rng.integers(1, 2**63)))
        ev = net.env.event()
        pending = _Pending(interest, net.now, ev)
        self.outstanding[interest.nonce] = pending
        detail = "" if interest.scope is None else f"scope={interest.scope}"
        if interest.exclusions:
            detail = ";".join(p for p in (detail, f"excl={len(interest.exclusions)}") if p)
        net.trace.add(net.now, self.id, "request", str(interest.name), 1, detail)
        net.transmit(self.id, 1, interest, net.params.processing_us)
        lifetime = interest.lifetime if interest.lifetime is not None else net.params.pit_lifetime_us
        net.env.process(self._expire(interest.nonce, lifetime))
        return ev

    def _expire(self, nonce: int, lifetime: int):
        yield self.net.env.timeout(lifetime)
        pending = self.outstanding.pop(nonce, None)
        if pending is not None:
            self.net.trace.add(self.net.now, self.id, "timeout", str(pending.interest.name), 1, "")
            pending.event.succeed(None)

    def receive(self, packet: Packet, face: int) -> None:
        if isinstance(packet, Interest):
            return
        net = self.net
        matched = [n for n, p in self.outstanding.items() if matches_interest(p.interest, packet)]
        if not matched:
            net.trace.add(net.now, self.id, "unsolicited", str(packet.name), face, "")
            return
        if net.keyring is not None and not net.keyring.verify(packet):
            net.trace.add(net.now, self.id, "reject", str(packet.name), face, "bad-signature")
            return
        for nonce in sorted(matched, key=lambda n: self.outstanding[n].issued):
            p = self.outstanding.pop(nonce)
            rtt = net.now - p.issued
            net.trace.add(net.now, self.id, "deliver", str(packet.name), face, f"rtt={rtt}")
            p.event.succeed(Delivery(packet, rtt, p.issued))


class Network:
    """A live, simpy-driven instance of a Scenario."""

    def __init__(self, scenario: Scenario, defense: Optional[DefenseConfig] = None, seed: Optional[int] = None):
        scenario.validate()
        self.scenario = scenario
        self.topology = scenario.topology
        self.params = scenario.params
        self.defense = defense if defense is not None else scenario.defense
        self.seed = self.params.seed if seed is None else seed
        self.env = simpy.Environment()
        self.trace = Trace()

        node_ids = list(self.topology.nodes)
        streams = np.random.SeedSequence(self.seed).spawn(len(node_ids) + 1)
        rngs = {n: np.random.default_rng(s) for n, s in zip(node_ids, streams)}
        self._jitter_rng = np.random.default_rng(streams[-1])

        self.keyring: Optional[Keyring] = None
        if self.params.verify_signatures:
            self.keyring = Keyring()
            for p in self.topology.producers():
                self.keyring.add(producer_key(p))

        self.routers: Dict[str, RouterNode] = {}
        self.consumers: Dict[str, ConsumerNode] = {}
        self.producers: Dict[str, ProducerNode] = {}
        for n, kind in self.topology.nodes.items():
            if kind == NodeKind.ROUTER:
                cap = self.params.capacity_overrides.get(n, self.params.cache_capacity)
                cs = ContentStore(cap, self.params.replacement.value, rngs[n])
                state = RouterState(node=n, cs=cs, rng=rngs[n], pit_lifetime=self.params.pit_lifetime_us)
                self.routers[n] = RouterNode(self, state)
            elif kind == NodeKind.CONSUMER:
                self.consumers[n] = ConsumerNode(self, n, rngs[n])
            else:
                entries = [e for e in scenario.catalog.values() if e.producer == n]
                self.producers[n] = ProducerNode(self, n, entries)
        self._build_fibs()
        self._install_defense()

    # -------- setup --------
    def _build_fibs(self) -> None:
        t = self.topology
        prefixes: Dict[str, set] = {}
        for e in self.scenario.catalog.values():
            prefixes.setdefault(e.producer, set()).add(e.name.prefix(1))
        for r, node in self.routers.items():
            for p, pfx in prefixes.items():
                route = path(t, r, p)
                if route is None or len(route) < 2:
                    continue
                face = t.face_to(r, route[1])
                for prefix in sorted(pfx):
                    node.state.fib.add(prefix, face)
        # position counted from the consumer edge; closest placement wins
        placement: Dict[str, Tuple[int, int]] = {}
        for c in t.consumers():
            for p in t.producers():
                route = path(t, c, p)
                if not route:
                    continue
                inner = route[1:-1]
                for pos, r in enumerate(inner):
                    placement[r] = min(placement.get(r, (pos, len(inner))), (pos, len(inner)))
        for r, (pos, length) in placement.items():
            st = self.routers[r].state
            st.path_position, st.path_length = pos, length

    def _install_defense(self) -> None:
        for r, node in self.routers.items():
            peers = {}
            for face, (nb, _lat) in self.topology.faces(r).items():
                if self.topology.nodes[nb] == NodeKind.ROUTER:
                    peers[nb] = face
            build_policies(self.defense, node.state, peers)

    # -------- clock & transport --------
    @property
    def now(self) -> int:
        return int(self.env.now)

    def node(self, node_id: str):
        for table in (self.routers, self.consumers, self.producers):
            if node_id in table:
                return table[node_id]
        raise KeyError(node_id)

    def router(self, node_id: str) -> RouterState:
        return self.routers[node_id].state

    def consumer(self, node_id: str) -> ConsumerNode:
        return self.consumers[node_id]

    def transmit(self, src: str, face: int, packet: Packet, delay: int) -> None:
        dst, latency = self.topology.neighbor(src, face)
        if self.params.jitter_us:
            j = self.params.jitter_us
            latency = max(0, latency + int(self._jitter_rng.integers(-j, j + 1)))
        dst_face = self.topology.face_to(dst, src)
        self.env.process(self._deliver(dst, dst_face, packet, delay + latency))

    def _deliver(self, dst: str, face: int, packet: Packet, total: int):
        yield self.env.timeout(total)
        self.node(dst).receive(packet, face)

    def execute(self, node: str, actions: Iterable[Action]) -> None:
        proc = self.params.processing_us
        for a in actions:
            name, face, detail = a.trace_fields()
            self.trace.add(self.now, node, a.kind.value, name, face, detail)
            if isinstance(a, SendData):
                self.transmit(node, a.face, a.obj, proc + a.delay)
            elif isinstance(a, ForwardInterest):
                self.transmit(node, a.face, a.interest, proc)

    def run_until(self, t: int) -> None:
        if t > self.env.now:
            self.env.run(until=t)

    def run(self) -> None:
        self.env.run()

    # -------- consumers --------
    def fetch(self, consumer: str, interest: Interest, at: Optional[int] = None) -> simpy.Event:
        if at is not None:
            self.run_until(at)
        return self.consumers[consumer].fetch(interest)

    def wait(self, ev: simpy.Event):
        if not ev.triggered:
            self.env.run(until=ev)
        return ev.value

    def measure_rtt(self, node: str, i: Interest, now: Optional[int] = None) -> Optional[int]:
        """Simulated RTT of one interest; None when it times out."""
        got = self.wait(self.fetch(node, i, at=now))
        return None if got is None else got.rtt

    def schedule(self, requests: Iterable[Request]) -> None:
        reqs = list(requests)
        if reqs:
            self.env.process(self._driver(reqs))

    def _driver(self, reqs: List[Request]):
        for req in reqs:
            if req.time > self.env.now:
                yield self.env.timeout(req.time - self.env.now)
            self.consumers[req.consumer].fetch(Interest(req.name, scope=req.scope, lifetime=req.lifetime))

    def scoped_rtt(self, node: str, name: Name, scope: int) -> int:
        """Round trip of a hit at the farthest router an interest with this scope can reach."""
        entry = self.scenario.catalog.get(name)
        producers = [entry.producer] if entry else sorted(self.topology.producers())
        route = None
        for p in producers:
            route = path(self.topology, node, p)
            if route:
                break
        if not route:
            return 0
        routers = route[1:-1]
        hops = min(scope, len(routers))
        one_way = 0
        for a, b in zip(route[:hops], route[1:hops + 1]):
            one_way += self.topology.faces(a)[self.topology.face_to(a, b)][1]
        return 2 * one_way + 2 * hops * self.params.processing_us + 2 * hops * self.params.jitter_us

    def finish(self) -> Trace:
        self.trace.router_stats = {r: n.state.stats for r, n in sorted(self.routers.items())}
        return self.trace


def run(s: Scenario) -> Trace:
    net = Network(s)
    net.schedule(s.schedule)
    net.run()
    logger.info("Simulation finished: %d events", len(net.trace),
                extra={"scenario": s.scenario_id, "seed": net.seed})
    return net.finish()
