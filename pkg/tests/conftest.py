import pytest

from conlab.models import SimParams
from conlab.net.names import Name
from conlab.net.simnet import Scenario, Topology
from conlab.utils.parse import parse_scenario

# P -- R0 -- R1 -- {c1, c2}
#         \- R2 -- {c3, c4}
REFERENCE_TREE = """\
[topology]
producer P
router R0
router R1
router R2
consumer c1
consumer c2
consumer c3
consumer c4
link P R0 10ms
link R0 R1 10ms
link R0 R2 10ms
link R1 c1 5ms
link R1 c2 5ms
link R2 c3 5ms
link R2 c4 5ms

[catalog]
generate 40 /content 64 P

[params]
id reference-tree
seed 7
"""

# reference-tree RTTs seen from c1 (processing 100us per emitted packet)
RTT_CLOSEST = 10_200
RTT_UPSTREAM = 30_400
RTT_SOURCE = 50_600
PER_HOP_RTT = 20_200


@pytest.fixture
def tree_text() -> str:
    return REFERENCE_TREE


@pytest.fixture
def tree_scenario() -> Scenario:
    return parse_scenario(REFERENCE_TREE)


def make_line(names=("/a/1",), first_hop_us=5_000, upstream_us=20_000, consumers=("c1",),
              **params) -> Scenario:
    """consumers -- R1 -- P with the given one-way latencies."""
    t = Topology()
    t.add_node("R1", "router").add_node("P", "producer")
    for c in consumers:
        t.add_node(c, "consumer")
    t.add_link("R1", "P", upstream_us)
    for c in consumers:
        t.add_link(c, "R1", first_hop_us)
    s = Scenario(topology=t, params=SimParams(**params), scenario_id="line")
    for n in names:
        s.add_content(n, 32, "P")
    return s


@pytest.fixture
def line_scenario() -> Scenario:
    return make_line()


def name(text: str) -> Name:
    return Name.parse(text)
