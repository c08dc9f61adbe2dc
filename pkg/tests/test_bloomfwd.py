import numpy as np
import pytest

from conlab.net.bloomfwd import (
    BloomFilter, BloomParams, BloomRouter, CountingBloom, bf_query, encode_name, equivalence_check,
    expected_fp_rate, replay_workload,
)
from conlab.net.forwarding import ActionKind, ContentStore, RouterState
from conlab.net.names import ContentObject, Name

PARAMS = BloomParams(2048, 5, 0)


def _observed_fp(m: int, h: int, n: int, seeds: int, queries: int) -> float:
    hits = 0
    for seed in range(seeds):
        f = BloomFilter(m, h, seed)
        for i in range(n):
            f.add(f"member/{seed}/{i}")
        hits += sum(f.query(f"outsider/{seed}/{j}") for j in range(queries))
    return hits / (seeds * queries)


def test_no_false_negatives():
    f = BloomFilter(512, 3, 9)
    items = [f"/x/{i}" for i in range(200)]
    for it in items:
        f.add(it)
    assert all(bf_query(f, it) for it in items)
    assert not BloomFilter().query("/anything")


def test_insert_is_idempotent():
    f = BloomFilter()
    f.add("/a")
    before = f.bits.copy()
    f.add("/a")
    assert f.bits == before


@pytest.mark.parametrize("n,seeds", [(150, 16), (100, 32)])
def test_fp_rate_matches_formula(n, seeds):
    observed = _observed_fp(2048, 5, n, seeds, 50_000)
    expected = expected_fp_rate(2048, 5, n)
    assert abs(observed - expected) <= 0.2 * expected


@pytest.mark.parametrize("m,h,n", [(1000, 3, 100), (1000, 7, 100), (500, 5, 100)])
def test_fp_rate_across_loads(m, h, n):
    observed = _observed_fp(m, h, n, 16, 25_000)
    expected = expected_fp_rate(m, h, n)
    assert abs(observed - expected) <= 0.2 * expected


def test_fp_rate_at_light_load_stays_tiny():
    # about two expected hits per 10^5 queries: only an upper bound is meaningful
    observed = _observed_fp(2048, 5, 50, 1, 100_000)
    assert observed <= 10 * expected_fp_rate(2048, 5, 50) + 5e-5


def test_estimated_fp_rate_tracks_fill():
    f = BloomFilter(2048, 5, 1)
    for i in range(150):
        f.add(f"/e/{i}")
    est = f.estimated_fp_rate()
    assert est == (f.count() / 2048) ** 5
    assert 0.5 < est / expected_fp_rate(2048, 5, 150) < 2.0


def test_counting_filter_restores_counters():
    c = CountingBloom(256, 4, 2)
    before = c.counters.copy()
    items = [f"/c/{i}" for i in range(30)]
    for it in items:
        c.add(it)
    for it in items:
        assert c.remove(it)
    assert np.array_equal(c.counters, before)
    assert not c.remove("/never-added")


def test_counting_filter_saturates_and_rebuilds():
    c = CountingBloom(64, 2, 0)
    saturated = False
    for _ in range(300):
        saturated = c.add("/hot") or saturated
    assert saturated and c.saturated
    assert c.count_of("/hot") == 255
    for _ in range(300):
        c.remove("/hot")
    assert c.query("/hot")
    c.rebuild()
    assert not c.query("/hot") and not c.saturated


def test_filter_serialization_layout():
    f = BloomFilter(16, 2, 5)
    f.add("/a")
    raw = f.to_bytes()
    assert raw[:24] == (16).to_bytes(8, "big") + (2).to_bytes(8, "big") + (5).to_bytes(8, "big")
    assert len(raw) == 24 + 2
    assert BloomFilter.from_bytes(raw) == f
    c = CountingBloom(8, 2, 1)
    c.add("/a")
    back = CountingBloom.from_bytes(c.to_bytes())
    assert np.array_equal(back.counters, c.counters) and (back.m, back.h, back.seed) == (8, 2, 1)
    with pytest.raises(ValueError):
        BloomFilter.from_bytes(raw[:-1])


def test_encode_name_levels():
    hb = encode_name(Name.parse("/NYtimes/article/green-econmy"), PARAMS)
    assert len(hb) == 3
    assert hb.levels[0].query("/NYtimes")
    assert hb.levels[1].query("/NYtimes/article")
    assert hb.levels[2].query("/NYtimes/article/green-econmy")
    assert len(encode_name(Name.parse("/solo"), PARAMS)) == 1
    assert encode_name(Name.parse("/a/b"), PARAMS).key() == encode_name(Name.parse("/a/b"), PARAMS).key()
    with pytest.raises(ValueError):
        encode_name(Name.parse("/"), PARAMS)


def test_router_forwards_on_longest_level():
    r = BloomRouter("R", 4, PARAMS)
    r.add_route(Name.parse("/NYtimes"), 1)
    r.add_route(Name.parse("/NYtimes/article"), 2)
    hb = encode_name(Name.parse("/NYtimes/article/green-econmy"), PARAMS)
    acts = r.on_interest(hb, 5)
    assert [(a.kind, a.face) for a in acts] == [(ActionKind.FORWARD, 2)]
    again = r.on_interest(hb, 6)
    assert [a.kind for a in again] == [ActionKind.COLLAPSE]
    assert r.pit[6].count_of(hb.key()) == 1
    unknown = r.on_interest(encode_name(Name.parse("/elsewhere/x"), PARAMS), 5)
    assert [a.kind for a in unknown] == [ActionKind.DROP]


def test_router_data_path_and_cache():
    r = BloomRouter("R", 1, PARAMS)
    r.add_route(Name.parse("/a"), 1)
    hb = encode_name(Name.parse("/a/1"), PARAMS)
    r.on_interest(hb, 3)
    r.on_interest(hb, 4)
    obj = ContentObject(Name.parse("/a/1"), b"x")
    acts = r.on_data(hb.key(), obj, 1)
    assert [(a.kind, a.face) for a in acts] == [(ActionKind.SEND_DATA, 3), (ActionKind.SEND_DATA, 4),
                                               (ActionKind.CACHE, -1)]
    hit = r.on_interest(hb, 5)
    assert [(a.kind, a.face) for a in hit] == [(ActionKind.SEND_DATA, 5)]
    assert r.on_data(hb.key(), obj, 1) == []


def _routers(capacity: int):
    plain = RouterState(node="R", cs=ContentStore(capacity))
    for p in range(6):
        plain.fib.add(Name.of(f"pub{p}"), 1 + p % 2)
    return plain, BloomRouter.from_fib("R", capacity, plain.fib, PARAMS)


def test_forwarding_equivalence_over_replay():
    names = [Name.of(f"pub{p}", f"item{i}") for p in range(6) for i in range(15)]
    names += [Name.of("unrouted", f"x{i}") for i in range(5)]
    objects = {n: ContentObject(n, str(n).encode()) for n in names}
    plain, bloom = _routers(16)
    workload = replay_workload(names, 1000, downstream=[3, 4, 5, 6], rng=np.random.default_rng(17))
    report = equivalence_check(plain, bloom, workload, objects)
    assert report.events == len(workload)
    assert report.bugs == []
    assert len(report.divergences) <= report.false_positives
    if report.false_positives == 0:
        assert bloom.stats.hits == plain.stats.hits
        assert bloom.stats.collapses == plain.stats.collapses


def test_missing_route_is_reported_as_bug():
    names = [Name.of(f"pub{p}", "obj") for p in range(6)]
    objects = {n: ContentObject(n, b"") for n in names}
    plain, bloom = _routers(0)
    bloom.routes = [r for r in bloom.routes if r.shadow != Name.of("pub0")]
    workload = replay_workload(names, 50, downstream=[3, 4], rng=np.random.default_rng(2))
    report = equivalence_check(plain, bloom, workload, objects)
    assert report.bugs
    assert all(d.event.name.components[0] == b"pub0" for d in report.bugs)
