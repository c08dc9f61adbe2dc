import pytest

from conlab.errors import ScenarioError
from conlab.net.names import Interest, Name
from conlab.net.simnet import Network, Request, Topology, anonymity_set, path, run, shared_anonymity_set

from conftest import PER_HOP_RTT, RTT_CLOSEST, RTT_SOURCE, RTT_UPSTREAM, make_line

A1 = Name.parse("/a/1")


def test_cold_then_warm_rtt_on_line(line_scenario):
    net = Network(line_scenario)
    assert net.measure_rtt("c1", Interest(A1)) == 2 * (5_000 + 20_000) + 4 * 100
    assert net.measure_rtt("c1", Interest(A1)) == 2 * 5_000 + 2 * 100


def test_unroutable_name_times_out(line_scenario):
    net = Network(line_scenario)
    assert net.measure_rtt("c1", Interest(Name.parse("/nowhere/1"))) is None


def test_reference_tree_rtts(tree_scenario):
    names = sorted(tree_scenario.catalog)
    net = Network(tree_scenario)
    assert net.measure_rtt("c1", Interest(names[0])) == RTT_SOURCE
    assert net.measure_rtt("c2", Interest(names[0])) == RTT_CLOSEST
    assert net.measure_rtt("c3", Interest(names[0])) == RTT_UPSTREAM
    assert net.scoped_rtt("c1", names[0], 2) - net.scoped_rtt("c1", names[0], 1) == PER_HOP_RTT


def test_latency_additivity_without_caches(tree_scenario):
    s = tree_scenario.with_params(cache_capacity=0)
    net = Network(s)
    n = sorted(s.catalog)[0]
    assert net.measure_rtt("c4", Interest(n)) == RTT_SOURCE
    assert net.measure_rtt("c4", Interest(n)) == RTT_SOURCE


def test_empty_schedule_gives_empty_trace(line_scenario):
    trace = run(line_scenario)
    assert len(trace) == 0
    assert trace.to_csv() == "time,node,action,name,face,detail\n"


def test_run_is_deterministic(tree_scenario):
    names = sorted(tree_scenario.catalog)
    tree_scenario.schedule = [Request(i * 7_000, f"c{1 + i % 4}", names[i % 5]) for i in range(40)]
    first, second = run(tree_scenario), run(tree_scenario)
    assert first.to_csv() == second.to_csv()
    assert first.digest() == second.digest()
    times = [e.time for e in first.events]
    assert times == sorted(times)


def test_every_delivery_answers_one_request(tree_scenario):
    names = sorted(tree_scenario.catalog)
    tree_scenario.schedule = [Request(i * 3_000, f"c{1 + i % 4}", names[i % 3]) for i in range(30)]
    trace = run(tree_scenario)
    requests = [e for e in trace.events if e.action == "request"]
    delivered = [e for e in trace.events if e.action == "deliver"]
    assert len(requests) == len(delivered) == 30
    assert len(trace.latencies()) == 30


def test_pit_burst_collapses_to_one_upstream_interest():
    consumers = tuple(f"c{i}" for i in range(10))
    s = make_line(consumers=consumers)
    s.schedule = [Request(0, c, A1) for c in consumers]
    trace = run(s)
    forwards = [e for e in trace.events if e.node == "R1" and e.action == "forward"]
    collapses = [e for e in trace.events if e.node == "R1" and e.action == "collapse"]
    downstream = [e for e in trace.events if e.node == "R1" and e.action == "send_data"]
    origin = [e for e in trace.events if e.node == "P" and e.action == "send_data"]
    assert len(forwards) == 1 and len(origin) == 1
    assert len(collapses) == 9
    assert len(downstream) == 10
    assert sum(e.action == "deliver" for e in trace.events) == 10


def test_anonymity_sets(tree_scenario):
    t = tree_scenario.topology
    assert anonymity_set(t, "R1") == 2
    assert anonymity_set(t, "R0") == 4
    assert shared_anonymity_set(t, "c1", "c2") == ("R1", 2)
    assert shared_anonymity_set(t, "c1", "c3") == ("R0", 4)


def test_path_prefers_lower_latency():
    t = Topology()
    for r in ("R1", "R2", "R3"):
        t.add_node(r, "router")
    t.add_node("c", "consumer").add_node("P", "producer")
    t.add_link("c", "R1", 1).add_link("R1", "R2", 10).add_link("R2", "P", 1)
    t.add_link("R1", "R3", 3).add_link("R3", "R2", 3)
    assert path(t, "c", "P") == ["c", "R1", "R3", "R2", "P"]


def test_consumer_must_attach_to_one_router():
    t = Topology()
    t.add_node("R1", "router").add_node("c1", "consumer").add_node("P", "producer")
    t.add_link("R1", "P", 10)
    with pytest.raises(ScenarioError):
        t.validate()


def test_unreachable_producer_is_a_scenario_error():
    t = Topology()
    t.add_node("R1", "router").add_node("R2", "router")
    t.add_node("c1", "consumer").add_node("P", "producer")
    t.add_link("c1", "R1", 1).add_link("P", "R2", 1)
    s = make_line()
    s.topology = t
    s.schedule = [Request(0, "c1", A1)]
    with pytest.raises(ScenarioError):
        run(s)


def test_unsorted_schedule_rejected(line_scenario):
    line_scenario.schedule = [Request(5, "c1", A1), Request(1, "c1", A1)]
    with pytest.raises(ScenarioError):
        line_scenario.validate()


def test_two_producers_cannot_share_a_first_component():
    s = make_line(names=("/a/1",))
    s.topology.add_node("P2", "producer").add_link("P2", "R1", 1_000)
    s.add_content("/a/2", 32, "P2")
    with pytest.raises(ScenarioError, match="announced by both"):
        s.validate()
    del s.catalog[Name.parse("/a/2")]
    s.add_content("/b/2", 32, "P2")
    s.validate()


def test_jitter_is_seeded():
    s = make_line(jitter_us=300)
    a = Network(s, seed=4).measure_rtt("c1", Interest(A1))
    b = Network(s, seed=4).measure_rtt("c1", Interest(A1))
    assert a == b
    assert abs(a - 50_400) <= 4 * 300


def test_consumer_rejects_forged_data(line_scenario):
    from conlab.net.names import ContentObject
    net = Network(line_scenario)
    ev = net.fetch("c1", Interest(A1))
    net.consumer("c1").receive(ContentObject(A1, b"forged", b"\x00" * 64, b"\x00" * 32), 1)
    assert not ev.triggered
    assert net.trace.events[-1].action == "reject"
