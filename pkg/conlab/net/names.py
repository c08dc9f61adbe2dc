"""Hierarchical content names and interest matching.

Canonical text form is "/" followed by the components joined with "/"; the
root prefix renders as "/". Component bytes outside the URI path alphabet,
"%" included, are percent-encoded, so every name survives render and parse.
This text form is what scenario files, traces and CSV reports use everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import FrozenSet, Iterable, Optional, Tuple
from urllib.parse import quote_from_bytes, unquote_to_bytes

from ..errors import NameParseError

__all__ = [
    "Name",
    "Interest",
    "ContentObject",
    "parse_name",
    "is_prefix_of",
    "matches_interest",
]

# rendered as-is besides letters, digits and "_.-~"
COMPONENT_SAFE = "!$&'()*+,;=:@"


def _component(part: str | bytes) -> bytes:
    return part if isinstance(part, bytes) else part.encode("utf-8")


@dataclass(frozen=True, order=True)
class Name:
    components: Tuple[bytes, ...] = ()

    def __post_init__(self):
        for c in self.components:
            if not isinstance(c, bytes) or len(c) == 0 or b"/" in c:
                raise NameParseError(f"invalid name component: {c!r}")

    @classmethod
    def parse(cls, text: str) -> "Name":
        if not isinstance(text, str) or not text.startswith("/"):
            raise NameParseError(f"name must start with '/': {text!r}")
        if text == "/":
            return cls(())
        parts = text[1:].split("/")
        if any(p == "" for p in parts):
            raise NameParseError(f"empty component in name: {text!r}")
        return cls(tuple(unquote_to_bytes(p) for p in parts))

    @classmethod
    def of(cls, *parts: str | bytes) -> "Name":
        return cls(tuple(_component(p) for p in parts))

    def render(self) -> str:
        return "/" + "/".join(quote_from_bytes(c, safe=COMPONENT_SAFE) for c in self.components)

    def __str__(self) -> str:
        return self.render()

    def __len__(self) -> int:
        return len(self.components)

    def prefix(self, i: int) -> "Name":
        return Name(self.components[:i])

    def append(self, component: str | bytes) -> "Name":
        return Name(self.components + (_component(component),))

    @property
    def is_root(self) -> bool:
        return not self.components


def parse_name(text: str) -> Name:
    return Name.parse(text)


def is_prefix_of(y: Name, x: Name) -> bool:
    """True when y's components lead x's (equal names included)."""
    n = len(y.components)
    return n <= len(x.components) and x.components[:n] == y.components


@dataclass(frozen=True)
class Interest:
    name: Name
    scope: Optional[int] = None
    exclusions: FrozenSet[Name] = field(default_factory=frozenset)
    nonce: int = 0
    # None means the router's PIT lifetime
    lifetime: Optional[int] = None

    def __post_init__(self):
        if self.scope is not None and self.scope < 0:
            raise ValueError("scope must be non-negative")
        if not 0 <= self.nonce < 2**64:
            raise ValueError("nonce must fit in 64 bits")
        if not isinstance(self.exclusions, frozenset):
            object.__setattr__(self, "exclusions", frozenset(self.exclusions))

    def excluding(self, *names: Name) -> "Interest":
        return replace(self, exclusions=self.exclusions | frozenset(names))

    def with_scope(self, scope: Optional[int]) -> "Interest":
        return replace(self, scope=scope)

    def with_nonce(self, nonce: int) -> "Interest":
        return replace(self, nonce=nonce)


@dataclass(frozen=True)
class ContentObject:
    name: Name
    payload: bytes
    signature: bytes = b""
    signer: bytes = b""


def matches_interest(i: Interest, o: ContentObject) -> bool:
    return is_prefix_of(i.name, o.name) and o.name not in i.exclusions


def smallest_match(i: Interest, names: Iterable[Name]) -> Optional[Name]:
    """Lexicographically smallest name satisfying i, or None."""
    best: Optional[Name] = None
    for n in names:
        if is_prefix_of(i.name, n) and n not in i.exclusions and (best is None or n < best):
            best = n
    return best
