from collections import OrderedDict

import numpy as np
import pytest

from conlab.net.defenses import ProbabilisticCaching
from conlab.net.forwarding import (
    Cached, CollapsePit, ContentStore, Drop, FibTable, ForwardInterest, RouterState, SendData,
    cs_lookup, fib_lpm, on_data, on_interest,
)
from conlab.net.names import ContentObject, Interest, Name


def n(text: str) -> Name:
    return Name.parse(text)


def obj(text: str) -> ContentObject:
    return ContentObject(n(text), text.encode())


def router(capacity: int = 8, routes=(("/a", 1),)) -> RouterState:
    r = RouterState(node="R", cs=ContentStore(capacity))
    for prefix, face in routes:
        r.fib.add(n(prefix), face)
    return r


def test_cs_hit_sends_data_back():
    r = router()
    r.cs.insert(obj("/a/1"))
    actions = on_interest(r, Interest(n("/a/1"), nonce=1), 3, 0)
    assert actions == [SendData(obj("/a/1"), 3, 0, from_cache=True)]
    assert r.stats.hits == 1


def test_second_interest_collapses():
    r = router()
    first = on_interest(r, Interest(n("/a/1"), nonce=1), 2, 0)
    second = on_interest(r, Interest(n("/a/1"), nonce=2), 5, 1)
    assert isinstance(first[0], ForwardInterest) and first[0].face == 1
    assert second == [CollapsePit(n("/a/1"), 5)]
    out = on_data(r, obj("/a/1"), 1, 10)
    assert [a.face for a in out if isinstance(a, SendData)] == [2, 5]
    assert isinstance(out[-1], Cached)
    assert len(r.pit) == 0


def test_burst_yields_single_upstream_forward():
    r = router()
    forwards = 0
    for k in range(10):
        acts = on_interest(r, Interest(n("/a/x"), nonce=k + 1), 10 + k, k)
        forwards += sum(isinstance(a, ForwardInterest) for a in acts)
    assert forwards == 1
    sends = [a for a in on_data(r, obj("/a/x"), 1, 50) if isinstance(a, SendData)]
    assert sorted(a.face for a in sends) == list(range(10, 20))


def test_scope_one_is_never_forwarded():
    r = router()
    acts = on_interest(r, Interest(n("/a/1"), scope=1, nonce=1), 2, 0)
    assert acts == [Drop(n("/a/1"), "scope-exhausted", 2)]
    r.cs.insert(obj("/a/1"))
    acts = on_interest(r, Interest(n("/a/1"), scope=1, nonce=2), 2, 1)
    assert isinstance(acts[0], SendData)


def test_scope_decremented_on_forward():
    r = router()
    acts = on_interest(r, Interest(n("/a/1"), scope=3, nonce=1), 2, 0)
    assert acts[0].interest.scope == 2


def test_wider_scope_reforwards_pending_name():
    r = router()
    on_interest(r, Interest(n("/a/1"), scope=2, nonce=1), 2, 0)
    acts = on_interest(r, Interest(n("/a/1"), nonce=2), 3, 1)
    assert isinstance(acts[0], ForwardInterest)
    acts = on_interest(r, Interest(n("/a/1"), scope=2, nonce=3), 4, 2)
    assert acts == [CollapsePit(n("/a/1"), 4)]


def test_no_route_and_duplicate_nonce_drop():
    r = router()
    assert on_interest(r, Interest(n("/z"), nonce=1), 2, 0) == [Drop(n("/z"), "no-route", 2)]
    on_interest(r, Interest(n("/a/1"), nonce=7), 2, 0)
    assert on_interest(r, Interest(n("/a/1"), nonce=7), 3, 1) == [Drop(n("/a/1"), "duplicate-nonce", 3)]


def test_unsolicited_data_is_ignored():
    r = router()
    assert on_data(r, obj("/a/1"), 1, 0) == []
    assert len(r.cs) == 0


def test_expired_pit_entry_allows_reforward():
    r = router()
    r.pit_lifetime = 100
    on_interest(r, Interest(n("/a/1"), nonce=1), 2, 0)
    acts = on_interest(r, Interest(n("/a/1"), nonce=2), 3, 100)
    assert isinstance(acts[0], ForwardInterest)


def test_expired_nonces_are_forgotten():
    r = router()
    r.pit_lifetime = 100
    for k in range(5):
        on_interest(r, Interest(n(f"/a/{k}"), nonce=k + 1), 2, k)
    assert len(r.seen_nonces) == 5
    on_interest(r, Interest(n("/a/9"), nonce=50), 2, 103)
    assert set(r.seen_nonces) == {(n("/a/4"), 5), (n("/a/9"), 50)}
    # the same nonce is accepted again once its lifetime has passed
    acts = on_interest(r, Interest(n("/a/4"), nonce=5), 3, 104)
    assert isinstance(acts[0], ForwardInterest)


def test_probabilistic_zero_never_inserts():
    r = router()
    r.cache_policy = ProbabilisticCaching(0.0)
    on_interest(r, Interest(n("/a/1"), nonce=1), 2, 0)
    acts = on_data(r, obj("/a/1"), 1, 5)
    assert [type(a) for a in acts] == [SendData]
    assert len(r.cs) == 0


def test_cs_lookup_lexicographic_and_exclusions():
    cs = ContentStore(4)
    cs.insert(obj("/a/2"))
    cs.insert(obj("/a/1"))
    assert cs_lookup(cs, Interest(n("/a"))).name == n("/a/1")
    assert cs_lookup(cs, Interest(n("/a")).excluding(n("/a/1"))).name == n("/a/2")
    assert cs_lookup(ContentStore(4), Interest(n("/a"))) is None


def test_exclusion_enumeration_matches_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(20):
        size = int(rng.integers(1, 33))
        names = {n(f"/{rng.choice(['a', 'b'])}/{int(rng.integers(100))}") for _ in range(size)}
        cs = ContentStore(64)
        for name in names:
            cs.insert(ContentObject(name, b""))
        prefix = n("/a")
        seen = []
        i = Interest(prefix)
        while (o := cs_lookup(cs, i)) is not None:
            seen.append(o.name)
            i = i.excluding(o.name)
        assert len(seen) == len(set(seen))
        assert set(seen) == {x for x in names if x.components[0] == b"a"}


def test_fib_longest_prefix_match():
    fib = FibTable()
    fib.add(n("/a"), 1)
    fib.add(n("/a/b"), 2)
    assert fib_lpm(fib, n("/a/b/c")) == 2
    assert fib_lpm(fib, n("/a/x")) == 1
    assert fib_lpm(fib, n("/z")) is None
    fib.add(n("/a/b"), 0)
    assert fib_lpm(fib, n("/a/b")) == 0


def test_lru_matches_reference_model():
    rng = np.random.default_rng(12)
    capacity = 5
    cs = ContentStore(capacity, "lru")
    model: "OrderedDict[Name, None]" = OrderedDict()
    for step in range(2000):
        key = n(f"/k/{int(rng.integers(12))}")
        if rng.random() < 0.5:
            got = cs.lookup(Interest(key), step)
            assert (got is not None) == (key in model)
            if key in model:
                model.move_to_end(key)
        else:
            evicted = cs.insert(ContentObject(key, b""), step)
            expected = None
            if key in model:
                model.move_to_end(key)
            else:
                if len(model) >= capacity:
                    expected, _ = model.popitem(last=False)
                model[key] = None
            assert evicted == expected
        assert len(cs) <= capacity
        assert list(cs.entries) == list(model)


def test_fifo_and_random_policies_respect_capacity():
    fifo = ContentStore(2, "fifo")
    for k in ("1", "2"):
        fifo.insert(ContentObject(n(f"/f/{k}"), b""))
    fifo.lookup(Interest(n("/f/1")))
    assert fifo.insert(ContentObject(n("/f/3"), b"")) == n("/f/1")
    rnd = ContentStore(3, "random", np.random.default_rng(0))
    for k in range(20):
        rnd.insert(ContentObject(n(f"/r/{k}"), b""))
        assert len(rnd) <= 3
    with pytest.raises(ValueError):
        ContentStore(1, "mru")
