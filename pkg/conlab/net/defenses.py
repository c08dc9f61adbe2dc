"""Cache-privacy countermeasures as pluggable router policies.

- WaitBeforeReply: every cache hit waits the recorded upstream fetch time t_m.
- DelayFirstK: the first k requests per name (k drawn per name) pay t_m.
- Collaborative: routers split the routable-prefix hash space and only the
  owner of a name caches it; other members relay interests to the owner.
- ProbabilisticCaching: cache with probability depending on path position
  and cache occupancy.
"""
from __future__ import annotations

import bisect
import hashlib
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from ..models import DefenseConfig, DefenseKind
from .forwarding import CacheContext, ImmediateReply, AlwaysCache, RouterState
from .names import ContentObject, Interest, Name

logger = logging.getLogger("conlab")

DIGEST_SPACE = 1 << 64


@dataclass
class ContentMeta:
    t_m: Optional[int] = None
    served_count: int = 0
    k: Optional[int] = None


def meta_for(state: RouterState, name: Name) -> ContentMeta:
    m = state.meta.get(name)
    if m is None:
        m = state.meta[name] = ContentMeta()
    return m


def record_fetch(meta: ContentMeta, rtt: int, weight: float = 0.5) -> None:
    if meta.t_m is None:
        meta.t_m = rtt
        return
    refreshed = int(round(weight * rtt + (1.0 - weight) * meta.t_m))
    # t_m never decreases
    meta.t_m = max(meta.t_m, refreshed)


class WaitBeforeReply:
    def __init__(self, ewma_weight: float = 0.5):
        self.ewma_weight = ewma_weight

    def delay(self, state: RouterState, name: Name, is_cache_hit: bool) -> int:
        meta = meta_for(state, name)
        meta.served_count += 1
        if not is_cache_hit or meta.t_m is None:
            return 0
        return meta.t_m

    def on_fetch(self, state: RouterState, name: Name, rtt: int) -> None:
        record_fetch(meta_for(state, name), rtt, self.ewma_weight)


class DelayFirstK:
    def __init__(self, k_min: int = 1, k_max: int = 8, ewma_weight: float = 0.5):
        if k_min > k_max:
            raise ValueError("k_min must not exceed k_max")
        self.k_min = k_min
        self.k_max = k_max
        self.ewma_weight = ewma_weight

    def delay(self, state: RouterState, name: Name, is_cache_hit: bool) -> int:
        meta = meta_for(state, name)
        if meta.k is None:
            meta.k = int(state.rng.integers(self.k_min, self.k_max + 1))
        slow = meta.served_count < meta.k
        meta.served_count += 1
        if not is_cache_hit or not slow or meta.t_m is None:
            return 0
        return meta.t_m

    def on_fetch(self, state: RouterState, name: Name, rtt: int) -> None:
        record_fetch(meta_for(state, name), rtt, self.ewma_weight)


class ProbabilisticCaching:
    def __init__(self, p0: float = 0.7):
        self.p0 = p0

    def probability(self, path_position: int, path_length: int, cache_fill: float) -> float:
        length = max(path_length, 1)
        p = self.p0 * (1.0 - path_position / length) * (1.0 - cache_fill)
        return min(max(p, 0.0), 1.0)

    def decide(self, o: ContentObject, ctx: CacheContext) -> bool:
        p = self.probability(ctx.path_position, ctx.path_length, ctx.cache_fill)
        if p <= 0.0:
            return False
        # draw even at p == 1 so the stream does not depend on the outcome
        return bool(ctx.rng.random() < p)


# ----------------- Partitioned (collaborative) caching -----------------

def routable_digest(name: Name) -> int:
    """Leading 64 bits of SHA-256 over the first name component."""
    first = name.components[0] if name.components else b""
    return int.from_bytes(hashlib.sha256(first).digest()[:8], "big")


@dataclass(frozen=True)
class Partition:
    members: Tuple[str, ...]
    # lower bound of each member's interval; bounds[0] == 0
    bounds: Tuple[int, ...]

    def __post_init__(self):
        if not self.members or len(self.members) != len(self.bounds):
            raise ValueError("partition needs one interval per member")
        if self.bounds[0] != 0 or list(self.bounds) != sorted(set(self.bounds)):
            raise ValueError("interval bounds must start at 0 and increase strictly")
        if self.bounds[-1] >= DIGEST_SPACE:
            raise ValueError("interval bound outside digest space")

    @classmethod
    def uniform(cls, members: Sequence[str]) -> "Partition":
        j = len(members)
        return cls(tuple(members), tuple(i * DIGEST_SPACE // j for i in range(j)))

    def intervals(self) -> List[Tuple[int, int]]:
        ends = list(self.bounds[1:]) + [DIGEST_SPACE]
        return list(zip(self.bounds, ends))

    def owner_of_digest(self, digest: int) -> str:
        return self.members[bisect.bisect_right(self.bounds, digest) - 1]


def partition_owner(p: Partition, name: Name) -> str:
    return p.owner_of_digest(routable_digest(name))


class Collaborative:
    """Relay interests to the partition owner; only the owner caches."""

    def __init__(self, partition: Partition, peer_faces: Dict[str, int]):
        self.partition = partition
        self.peer_faces = peer_faces
        self._warned = False

    def route(self, state: RouterState, i: Interest, in_face: int) -> Tuple[Optional[int], str]:
        if i.name.is_root:
            return None, ""
        owner = partition_owner(self.partition, i.name)
        if owner == state.node:
            return None, ""
        face = self.peer_faces.get(owner)
        if face is None:
            if not self._warned:
                logger.warning("Partition member %s unreachable from %s; caching solo", owner, state.node)
                self._warned = True
            return None, "fallback"
        if face == in_face:
            return None, ""
        return face, "relay"

    def may_cache(self, state: RouterState, o: ContentObject) -> bool:
        owner = partition_owner(self.partition, o.name)
        return owner == state.node or owner not in self.peer_faces


def build_policies(config: DefenseConfig, state: RouterState, peer_faces: Optional[Dict[str, int]] = None) -> None:
    """Install the configured defense on one router."""
    kind = config.kind
    state.cache_policy = AlwaysCache()
    state.reply_policy = ImmediateReply()
    state.collaboration = None
    if kind == DefenseKind.NONE:
        return
    if kind == DefenseKind.WAIT_BEFORE_REPLY:
        state.reply_policy = WaitBeforeReply(config.ewma_weight)
    elif kind == DefenseKind.DELAY_FIRST_K:
        state.reply_policy = DelayFirstK(config.k_min, config.k_max, config.ewma_weight)
    elif kind == DefenseKind.PROBABILISTIC:
        state.cache_policy = ProbabilisticCaching(config.p0)
    elif kind == DefenseKind.COLLABORATIVE:
        if state.node in config.members:
            partition = Partition.uniform(config.members)
            lo, hi = partition.intervals()[partition.members.index(state.node)]
            logger.debug("%s owns digests [%#x, %#x)", state.node, lo, hi)
            faces = {m: f for m, f in (peer_faces or {}).items() if m in config.members and m != state.node}
            state.collaboration = Collaborative(partition, faces)
    else:
        raise ValueError(f"unknown defense {kind!r}")
