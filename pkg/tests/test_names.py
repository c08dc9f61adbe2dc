import random

import pytest

from conlab.errors import NameParseError
from conlab.net.names import ContentObject, Interest, Name, is_prefix_of, matches_interest, parse_name


def test_parse_components():
    n = parse_name("/NYtimes/article/green-econmy")
    assert n.components == (b"NYtimes", b"article", b"green-econmy")
    assert str(n) == "/NYtimes/article/green-econmy"


def test_root_prefix():
    root = parse_name("/")
    assert root.components == ()
    assert root.is_root
    assert str(root) == "/"


@pytest.mark.parametrize("text", ["/a//b", "a/b", "", "/a/"])
def test_malformed_names_rejected(text):
    with pytest.raises(NameParseError):
        parse_name(text)


def test_prefix_rules():
    assert is_prefix_of(parse_name("/a/b"), parse_name("/a/b/c"))
    assert is_prefix_of(parse_name("/a/b"), parse_name("/a/b"))
    assert is_prefix_of(parse_name("/"), parse_name("/x/y/z"))
    assert not is_prefix_of(parse_name("/a/c"), parse_name("/a/b/c"))
    assert not is_prefix_of(parse_name("/a/b/c"), parse_name("/a/b"))


def test_matches_interest_with_exclusions():
    obj = ContentObject(parse_name("/a/1"), b"x")
    assert matches_interest(Interest(parse_name("/a")), obj)
    assert not matches_interest(Interest(parse_name("/a")).excluding(parse_name("/a/1")), obj)


def test_root_interest_matches_every_catalog_name():
    catalog = [parse_name(t) for t in ("/x/y", "/a", "/b/c/d")]
    for n in catalog:
        assert matches_interest(Interest(parse_name("/")), ContentObject(n, b""))


def _random_name(rng: random.Random) -> Name:
    alphabet = "abcxyz019-_."
    parts = ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 6))) for _ in range(rng.randint(0, 5))]
    return Name.of(*parts)


def test_render_parse_round_trip():
    rng = random.Random(11)
    for _ in range(500):
        n = _random_name(rng)
        assert parse_name(n.render()) == n


def test_round_trip_over_arbitrary_bytes():
    rng = random.Random(23)
    for _ in range(500):
        parts = []
        for _ in range(rng.randint(0, 5)):
            raw = bytes(rng.randrange(256) for _ in range(rng.randint(1, 8)))
            parts.append(raw.replace(b"/", b"_") or b"_")
        n = Name(tuple(parts))
        text = n.render()
        assert text.isascii()
        assert parse_name(text) == n


@pytest.mark.parametrize("component,text", [
    (b"\xff", "/%FF"),
    (b"100%", "/100%25"),
    (b"two words", "/two%20words"),
    ("café".encode("utf-8"), "/caf%C3%A9"),
])
def test_escaped_components(component, text):
    n = Name((component,))
    assert n.render() == text
    assert parse_name(text) == n


def test_slash_is_not_a_component_byte():
    with pytest.raises(NameParseError):
        Name((b"a/b",))
    with pytest.raises(NameParseError):
        Name.of("a", "b/c")
    with pytest.raises(NameParseError):
        parse_name("/a%2Fb")


def test_prefix_transitive_and_exclusions_monotone():
    rng = random.Random(5)
    for _ in range(300):
        c = _random_name(rng)
        b = c.prefix(rng.randint(0, len(c)))
        a = b.prefix(rng.randint(0, len(b)))
        assert is_prefix_of(a, b) and is_prefix_of(b, c) and is_prefix_of(a, c)
        obj = ContentObject(c, b"")
        i = Interest(a)
        before = matches_interest(i, obj)
        after = matches_interest(i.excluding(_random_name(rng)), obj)
        assert not (after and not before)


def test_interest_validation():
    with pytest.raises(ValueError):
        Interest(parse_name("/a"), scope=-1)
    i = Interest(parse_name("/a"), scope=2)
    assert i.with_scope(1).scope == 1
    assert i.excluding(parse_name("/a/1")).exclusions == frozenset({parse_name("/a/1")})


def test_lexicographic_order():
    names = sorted([parse_name("/a/2"), parse_name("/a/1"), parse_name("/a")])
    assert [str(n) for n in names] == ["/a", "/a/1", "/a/2"]
