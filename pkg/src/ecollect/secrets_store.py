"""Encrypted-at-rest container for voter secrets.

PBKDF2-HMAC-SHA256 over the passphrase, AES-256-GCM over the canonical JSON
payload. The KDF parameters travel with the file so they can be raised
without breaking old containers.
"""

from __future__ import annotations

import json
import os

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.pbkdf2 import PBKDF2HMAC

from .actors import VoterSecrets
from .encoding import canonical_bytes
from .errors import Malformed

DEFAULT_ITERATIONS = 200_000


def _derive(passphrase: str, salt: bytes, iterations: int) -> bytes:
    kdf = PBKDF2HMAC(algorithm=hashes.SHA256(), length=32, salt=salt, iterations=iterations)
    return kdf.derive(passphrase.encode("utf-8"))


def save_secrets(
    path: str, secrets: VoterSecrets, passphrase: str, iterations: int = DEFAULT_ITERATIONS
) -> None:
    salt = os.urandom(16)
    nonce = os.urandom(12)
    key = _derive(passphrase, salt, iterations)
    plaintext = canonical_bytes(secrets.to_payload())
    ct = AESGCM(key).encrypt(nonce, plaintext, None)
    doc = {
        "kdf": "pbkdf2-sha256",
        "iterations": iterations,
        "salt": salt.hex(),
        "nonce": nonce.hex(),
        "ciphertext": ct.hex(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_secrets(path: str, passphrase: str) -> VoterSecrets:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kdf") != "pbkdf2-sha256":
        raise Malformed(f"unsupported kdf {doc.get('kdf')!r}")
    key = _derive(passphrase, bytes.fromhex(doc["salt"]), int(doc["iterations"]))
    try:
        plaintext = AESGCM(key).decrypt(
            bytes.fromhex(doc["nonce"]), bytes.fromhex(doc["ciphertext"]), None
        )
    except InvalidTag:
        raise Malformed("wrong passphrase or corrupted container") from None
    return VoterSecrets.from_payload(json.loads(plaintext))
