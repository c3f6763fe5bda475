"""Ed25519 signatures for the authenticated-channel PKI.

The protocol abstracts voter authentication into per-actor signature keys;
every message published on the board is signed under this PKI.
"""

from __future__ import annotations

import secrets
from random import Random

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .errors import Malformed


class SigKey:
    """A signing key with its 32-byte seed kept for serialization."""

    def __init__(self, seed: bytes):
        if len(seed) != 32:
            raise Malformed("signing seed must be 32 bytes")
        self.seed = seed
        self._sk = Ed25519PrivateKey.from_private_bytes(seed)
        self.verify_key = (
            self._sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw).hex()
        )

    @staticmethod
    def generate(rng: Random | None = None) -> "SigKey":
        if rng is None:
            return SigKey(secrets.token_bytes(32))
        return SigKey(rng.getrandbits(256).to_bytes(32, "big"))

    def sign(self, data: bytes) -> str:
        return self._sk.sign(data).hex()


def verify_sig(verify_key_hex: str, data: bytes, sig_hex: str) -> bool:
    try:
        pk = Ed25519PublicKey.from_public_bytes(bytes.fromhex(verify_key_hex))
        pk.verify(bytes.fromhex(sig_hex), data)
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False
