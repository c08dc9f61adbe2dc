"""Name/data binding signatures, ephemeral identities and signed links.

Canonical serialization (signed and hashed, all integers big-endian):

    u32 component count
    per component: u32 length, bytes
    u64 payload length, payload
    32-byte signer id (SHA-256 of the signer's raw public key)

A link signs ``link_name || target_name || target_digest`` where both names use the
component encoding above and the digest is the raw 32-byte SHA-256 of the target's
canonical serialization.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Dict, Optional, Protocol, Tuple

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, NoEncryption, PrivateFormat, PublicFormat

from ..errors import MalformedKeyError
from .names import ContentObject, Name

SIGNER_ID_LEN = 32


def publisher_id(public_key: bytes) -> bytes:
    return hashlib.sha256(public_key).digest()


@dataclass(frozen=True)
class KeyPair:
    public: bytes
    private: bytes
    id: bytes

    @classmethod
    def from_keys(cls, public: bytes, private: bytes) -> "KeyPair":
        return cls(public=public, private=private, id=publisher_id(public))


class SignatureScheme(Protocol):
    def keygen(self, seed: bytes) -> KeyPair: ...

    def sign(self, private: bytes, message: bytes) -> bytes: ...

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool: ...


class Ed25519Scheme:
    """Deterministic Ed25519 (RFC 8032) through the cryptography package."""

    def keygen(self, seed: bytes) -> KeyPair:
        private_bytes = hashlib.sha256(b"conlab/ed25519/" + seed).digest()
        sk = Ed25519PrivateKey.from_private_bytes(private_bytes)
        pk = sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        raw = sk.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())
        return KeyPair.from_keys(pk, raw)

    def sign(self, private: bytes, message: bytes) -> bytes:
        try:
            sk = Ed25519PrivateKey.from_private_bytes(private)
        except ValueError as e:
            raise MalformedKeyError(f"bad private key: {e}") from e
        return sk.sign(message)

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        try:
            pk = Ed25519PublicKey.from_public_bytes(public)
        except (ValueError, TypeError) as e:
            raise MalformedKeyError(f"bad public key: {e}") from e
        try:
            pk.verify(signature, message)
        except InvalidSignature:
            return False
        return True


DEFAULT_SCHEME: SignatureScheme = Ed25519Scheme()


def _name_bytes(name: Name) -> bytes:
    out = [struct.pack(">I", len(name.components))]
    for c in name.components:
        out.append(struct.pack(">I", len(c)))
        out.append(c)
    return b"".join(out)


def canonical_bytes(name: Name, payload: bytes, signer: bytes) -> bytes:
    if len(signer) != SIGNER_ID_LEN:
        raise MalformedKeyError(f"signer id must be {SIGNER_ID_LEN} bytes")
    return b"".join([_name_bytes(name), struct.pack(">Q", len(payload)), payload, signer])


def content_digest(o: ContentObject) -> bytes:
    return hashlib.sha256(canonical_bytes(o.name, o.payload, o.signer)).digest()


def sign_object(name: Name, payload: bytes, key: KeyPair, scheme: SignatureScheme = DEFAULT_SCHEME) -> ContentObject:
    sig = scheme.sign(key.private, canonical_bytes(name, payload, key.id))
    return ContentObject(name=name, payload=payload, signature=sig, signer=key.id)


def verify_object(o: ContentObject, pubkey: bytes, scheme: SignatureScheme = DEFAULT_SCHEME) -> bool:
    if len(pubkey) != 32:
        raise MalformedKeyError(f"public key must be 32 bytes, got {len(pubkey)}")
    if publisher_id(pubkey) != o.signer:
        return False
    return scheme.verify(pubkey, canonical_bytes(o.name, o.payload, o.signer), o.signature)


def make_ephemeral_identity(rng_seed: int | bytes, scheme: SignatureScheme = DEFAULT_SCHEME) -> KeyPair:
    seed = rng_seed if isinstance(rng_seed, bytes) else int(rng_seed).to_bytes(16, "big", signed=True)
    return scheme.keygen(b"ephemeral/" + seed)


@dataclass(frozen=True)
class SignedLink:
    link_name: Name
    target_name: Name
    target_digest: bytes
    signature: bytes
    signer: bytes
    signer_key: bytes


def _link_bytes(link_name: Name, target_name: Name, digest: bytes) -> bytes:
    return _name_bytes(link_name) + _name_bytes(target_name) + digest


def make_signed_link(link_name: Name, target: ContentObject, signer: KeyPair,
                     scheme: SignatureScheme = DEFAULT_SCHEME) -> SignedLink:
    digest = content_digest(target)
    sig = scheme.sign(signer.private, _link_bytes(link_name, target.name, digest))
    return SignedLink(link_name, target.name, digest, sig, signer.id, signer.public)


def verify_link_target(link: SignedLink, target: ContentObject,
                       scheme: SignatureScheme = DEFAULT_SCHEME) -> bool:
    # the target's own signer is deliberately not consulted
    if publisher_id(link.signer_key) != link.signer:
        return False
    if not scheme.verify(link.signer_key, _link_bytes(link.link_name, link.target_name, link.target_digest),
                         link.signature):
        return False
    return target.name == link.target_name and content_digest(target) == link.target_digest


def publish_ephemeral(name: Name, payload: bytes, trusted: KeyPair, link_name: Name,
                      seed: int | bytes) -> Tuple[ContentObject, SignedLink, KeyPair]:
    """Sign content under a one-time identity and vouch for it with a trusted link."""
    ephemeral = make_ephemeral_identity(seed)
    obj = sign_object(name, payload, ephemeral)
    return obj, make_signed_link(link_name, obj, trusted), ephemeral


class Keyring:
    def __init__(self, scheme: SignatureScheme = DEFAULT_SCHEME):
        self._keys: Dict[bytes, bytes] = {}
        self._scheme = scheme

    def add(self, key: KeyPair | bytes) -> bytes:
        public = key.public if isinstance(key, KeyPair) else key
        pid = publisher_id(public)
        self._keys[pid] = public
        return pid

    def get(self, pid: bytes) -> Optional[bytes]:
        return self._keys.get(pid)

    def verify(self, o: ContentObject) -> bool:
        public = self._keys.get(o.signer)
        if public is None:
            return False
        return verify_object(o, public, self._scheme)
