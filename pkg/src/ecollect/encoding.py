"""Canonical encodings.

Everything that is hashed, signed, or compared bit-exactly goes through this
module: canonical JSON for documents and wire payloads, length-prefixed field
lists for proof transcripts, and fixed-width big-endian integers. Hex is used
wherever binary ends up inside a text format.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any, Iterable

ZERO_DIGEST = "0" * 64

_JSON_SCALARS = (str, int, bool, type(None))


def _check_canonical_value(value: Any) -> None:
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return
    if isinstance(value, int):
        return
    if isinstance(value, float):
        raise ValueError("floats are not allowed in canonical documents")
    if isinstance(value, dict):
        for k, v in value.items():
            if not isinstance(k, str):
                raise ValueError("canonical object keys must be strings")
            _check_canonical_value(v)
        return
    if isinstance(value, (list, tuple)):
        for v in value:
            _check_canonical_value(v)
        return
    raise ValueError(f"type {type(value).__name__} not allowed in canonical documents")


def canonical_json(value: Any) -> str:
    """Render a document canonically: sorted keys, no whitespace, ASCII only."""
    _check_canonical_value(value)
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def canonical_bytes(value: Any) -> bytes:
    return canonical_json(value).encode("utf-8")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def pack_fields(fields: Iterable[bytes]) -> bytes:
    """Length-prefixed field list: unambiguous transcript/proof serialization."""
    out = bytearray()
    for f in fields:
        if not isinstance(f, (bytes, bytearray)):
            raise TypeError("fields must be bytes")
        out += len(f).to_bytes(4, "big")
        out += f
    return bytes(out)


def unpack_fields(data: bytes) -> list[bytes]:
    fields = []
    i = 0
    n = len(data)
    while i < n:
        if i + 4 > n:
            raise ValueError("truncated field length")
        ln = int.from_bytes(data[i : i + 4], "big")
        i += 4
        if i + ln > n:
            raise ValueError("truncated field body")
        fields.append(data[i : i + ln])
        i += ln
    return fields


def int_to_bytes(value: int, length: int) -> bytes:
    if value < 0:
        raise ValueError("negative integer")
    return value.to_bytes(length, "big")


def bytes_to_int(data: bytes) -> int:
    return int.from_bytes(data, "big")


def u64(value: int) -> bytes:
    return int_to_bytes(value, 8)


def hex_to_bytes(text: str, length: int | None = None) -> bytes:
    if not isinstance(text, str):
        raise ValueError("expected hex string")
    try:
        raw = bytes.fromhex(text)
    except ValueError as exc:
        raise ValueError(f"bad hex: {exc}") from None
    if text.lower() != text:
        raise ValueError("hex must be lowercase")
    if length is not None and len(raw) != length:
        raise ValueError(f"expected {length} bytes, got {len(raw)}")
    return raw


def is_digest(text: Any) -> bool:
    return isinstance(text, str) and len(text) == 64 and all(c in "0123456789abcdef" for c in text)
