"""Ed25519 identities and signature helpers.

A node's identifier is the SHA-256 fingerprint (hex) of its raw public key.
Signature verification is memoized: every peer verifies the same broadcast
objects, and the predicate is pure.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

__all__ = ["KeyPair", "node_id_for", "sign", "verify", "KeyRegistry"]


def node_id_for(public_bytes: bytes) -> str:
    return hashlib.sha256(public_bytes).hexdigest()


class KeyPair:
    """Signing identity; deterministic when built from a 32-byte seed."""

    def __init__(self, private: Ed25519PrivateKey):
        self._private = private
        self.public_bytes = private.public_key().public_bytes_raw()
        self.node_id = node_id_for(self.public_bytes)

    @staticmethod
    def from_seed(seed: bytes) -> "KeyPair":
        if len(seed) != 32:
            raise ValueError("seed must be 32 bytes")
        return KeyPair(Ed25519PrivateKey.from_private_bytes(seed))

    @staticmethod
    def generate() -> "KeyPair":
        return KeyPair(Ed25519PrivateKey.generate())

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)


def sign(key: KeyPair, message: bytes) -> bytes:
    return key.sign(message)


@lru_cache(maxsize=1 << 16)
def _verify_cached(public_bytes: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_bytes).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


def verify(public_bytes: bytes, signature: bytes, message: bytes) -> bool:
    return _verify_cached(public_bytes, bytes(signature), bytes(message))


class KeyRegistry:
    """node_id -> raw public key; shared ground truth for verification."""

    def __init__(self) -> None:
        self._keys: dict[str, bytes] = {}

    def register(self, public_bytes: bytes) -> str:
        nid = node_id_for(public_bytes)
        self._keys[nid] = public_bytes
        return nid

    def get(self, node_id: str) -> bytes | None:
        return self._keys.get(node_id)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def ids(self) -> list[str]:
        return sorted(self._keys)

    def as_dict(self) -> dict[str, bytes]:
        return dict(self._keys)
