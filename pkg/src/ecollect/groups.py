"""Prime-order group abstraction and exponential ElGamal.

Each group is a Schnorr subgroup of order ``q`` (prime) inside the
multiplicative group mod ``p``, behind one interface:

* ``p23``     — order-11 subgroup mod 23, generator 2. Small enough for
                exhaustive tests and hand-checked arithmetic.
* ``sim64``   — 64-bit modulus, 48-bit order. For high-volume protocol
                simulation where cryptographic strength is irrelevant but
                tallies must not wrap.
* ``prod2048``— 2048-bit modulus, 256-bit order (Belenios-style sizing).
                Parameters were generated once from a fixed seed and are
                re-verified by the test suite.

Plaintexts are small non-negative integers encoded in the exponent, so
ciphertexts add homomorphically and decryption ends with a bounded discrete
log (table lookup below 2^16, baby-step giant-step above).
"""

from __future__ import annotations

import math
import secrets
from dataclasses import dataclass
from random import Random

from .encoding import bytes_to_int, int_to_bytes
from .errors import DecodeOutOfRange, Malformed

try:
    from gmpy2 import invert as _gmp_invert
    from gmpy2 import mpz as _mpz
    from gmpy2 import powmod as _powmod

    def _pow(base: int, exp: int, mod: int) -> int:
        return int(_powmod(base, exp, mod))

    def _inv(value: int, mod: int) -> int:
        return int(_gmp_invert(_mpz(value), _mpz(mod)))

except ImportError:  # pragma: no cover - gmpy2 is a declared dependency

    def _pow(base: int, exp: int, mod: int) -> int:
        return pow(base, exp, mod)

    def _inv(value: int, mod: int) -> int:
        return pow(value, -1, mod)


@dataclass(frozen=True)
class GroupParams:
    """A Schnorr group: generator ``g`` of prime order ``q`` mod ``p``."""

    name: str
    p: int
    q: int
    g: int
    elem_len: int
    scalar_len: int

    def pow(self, base: int, exp: int) -> int:
        return _pow(base, exp, self.p)

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.p

    def inv(self, a: int) -> int:
        return _inv(a, self.p)

    def g_pow(self, exp: int) -> int:
        return _pow(self.g, exp, self.p)

    def is_element(self, e: int) -> bool:
        """Membership in the order-q subgroup; rejects 0 and out-of-range values."""
        if not isinstance(e, int) or e <= 0 or e >= self.p:
            return False
        return _pow(e, self.q, self.p) == 1

    def rand_scalar(self, rng: Random | None = None) -> int:
        if rng is None:
            return secrets.randbelow(self.q)
        return rng.randrange(self.q)

    def encode_elem(self, e: int) -> bytes:
        return int_to_bytes(e, self.elem_len)

    def decode_elem(self, data: bytes) -> int:
        if len(data) != self.elem_len:
            raise Malformed(f"element must be {self.elem_len} bytes")
        e = bytes_to_int(data)
        if not self.is_element(e):
            raise Malformed("not a canonical group element")
        return e

    def elem_hex(self, e: int) -> str:
        return self.encode_elem(e).hex()

    def elem_from_hex(self, text: str) -> int:
        if not isinstance(text, str) or len(text) != 2 * self.elem_len or text.lower() != text:
            raise Malformed("bad element encoding")
        try:
            raw = bytes.fromhex(text)
        except ValueError:
            raise Malformed("bad element hex") from None
        return self.decode_elem(raw)

    def encode_scalar(self, s: int) -> bytes:
        if not 0 <= s < self.q:
            raise Malformed("scalar out of range")
        return int_to_bytes(s, self.scalar_len)

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.scalar_len:
            raise Malformed(f"scalar must be {self.scalar_len} bytes")
        s = bytes_to_int(data)
        if s >= self.q:
            raise Malformed("scalar out of range")
        return s


@dataclass(frozen=True)
class Ciphertext:
    """Exponential-ElGamal ciphertext (g^r, g^m * pk^r)."""

    a: int
    b: int

    def as_dict(self, group: GroupParams) -> dict:
        return {"a": group.elem_hex(self.a), "b": group.elem_hex(self.b)}

    @staticmethod
    def from_dict(group: GroupParams, doc: dict) -> "Ciphertext":
        if not isinstance(doc, dict) or set(doc) != {"a", "b"}:
            raise Malformed("ciphertext must have exactly fields a, b")
        return Ciphertext(group.elem_from_hex(doc["a"]), group.elem_from_hex(doc["b"]))


TEST_GROUP = GroupParams(name="p23", p=23, q=11, g=2, elem_len=1, scalar_len=1)

SIM_GROUP = GroupParams(
    name="sim64",
    p=17330168547826957517,
    q=264034501612331,
    g=16003717263223994400,
    elem_len=8,
    scalar_len=6,
)

_PROD_P = int(
    "b2cdf0dc72dd2d6791d153fc6363b9227a8d543e5a26f871c851302b1e13549279514af7"
    "fd0f4a44903a0d22c0a79d3940ae3c48e1e1656b6f20df3085d178b2d16ed59b9164469b"
    "e4e8d6624ea643e1ddfc552268605813b654daff1dcd8370292fb02816bf8d5870c8c83a"
    "d885d88b84bf93fa37814a23e2f7077c88cfa356ed485ccc4dd13a89a7c02e88ea016ad6"
    "b904e4aa0b36df9e8a6f6ccc37b6589d9ec8e9523d01943e3726a2f472c1bfc8f3772129"
    "70ccd89956ea57aeb9be4a0bfde2fe6b43d635093379f8df1be55bb2e75e42caac0b4bb4"
    "1faf16da5ecfe7d9e83d81f7d09d037fbfd3e49357906f98c9c90c06012abd9696331de8"
    "47ccf3a5",
    16,
)
_PROD_Q = int("a3b8c1e9392456de3eb13b9046685257bdd640fb06671ad11c80317fa3b179af", 16)
_PROD_G = int(
    "68fe085fb9298c8a914633a6b1e3ac9ed1f6c1f5be984e2c7cc2c3af8fa98dff0a6e4c80"
    "f1bfbf0e25a3820b77f9d68059e1a3e1a3b4354675a47c5abac4097fe66e86c2ebcb901c"
    "664ef215072f8de04137f7f92bf189d858bf775bbff81301c5298aa1c98a789c6b0a0a20"
    "4737511fbc2dc8e0d9eb933c651b69600e7ca6923e4daf10fb24c86b3195090cb459bd86"
    "25f9f8e211a0a8797653e27d3e848810e507b5f6785208915be746d4a9bae3b6807579b1"
    "aee110bf04f627d719853f90f566e90370eb3f0b6c255fbcff6eb1a2dd35c001de335eb8"
    "a2e6ef66de453d9ae2ef48f30c701302088d72cf81a9755ff3f10a7cd80fcd151658eab5"
    "6fc15b25",
    16,
)

PROD_GROUP = GroupParams(
    name="prod2048", p=_PROD_P, q=_PROD_Q, g=_PROD_G, elem_len=256, scalar_len=32
)

GROUPS: dict[str, GroupParams] = {g.name: g for g in (TEST_GROUP, SIM_GROUP, PROD_GROUP)}


def get_group(name: str) -> GroupParams:
    try:
        return GROUPS[name]
    except KeyError:
        raise Malformed(f"unknown group {name!r}") from None


def keygen(group: GroupParams, rng: Random | None = None) -> tuple[int, int]:
    """Returns (sk, pk) with pk = g^sk and sk uniform in [1, q)."""
    while True:
        sk = group.rand_scalar(rng)
        if sk != 0:
            break
    return sk, group.g_pow(sk)


def encrypt(group: GroupParams, pk: int, m: int, r: int) -> Ciphertext:
    """Enc(pk, m, r) = (g^r, g^m * pk^r); m must be a small non-negative integer."""
    if not 0 <= m < group.q:
        raise Malformed("plaintext out of range")
    return Ciphertext(group.g_pow(r), group.mul(group.g_pow(m), group.pow(pk, r)))


def decrypt(group: GroupParams, sk: int, c: Ciphertext, bound: int) -> int:
    """Recovers m <= bound, or raises DecodeOutOfRange."""
    residue = group.mul(c.b, group.inv(group.pow(c.a, sk)))
    return dlog_decode(group, residue, bound)


def rerand(group: GroupParams, pk: int, c: Ciphertext, r: int) -> Ciphertext:
    """Re-encryption under fresh randomness; plaintext and key unchanged."""
    return Ciphertext(group.mul(c.a, group.g_pow(r)), group.mul(c.b, group.pow(pk, r)))


def ct_add(group: GroupParams, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """Homomorphic addition (componentwise product). Same key assumed."""
    return Ciphertext(group.mul(c1.a, c2.a), group.mul(c1.b, c2.b))


def ct_neg(group: GroupParams, c: Ciphertext) -> Ciphertext:
    return Ciphertext(group.inv(c.a), group.inv(c.b))


def ct_sub(group: GroupParams, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    return ct_add(group, c1, ct_neg(group, c2))


_TABLE_LIMIT = 1 << 16
_dlog_tables: dict[str, tuple[dict[int, int], int, int]] = {}


def _table(group: GroupParams, upto: int) -> dict[int, int]:
    tab, grown_to, last = _dlog_tables.get(group.name, ({1: 0}, 0, 1))
    if upto > grown_to:
        e = last
        for m in range(grown_to + 1, upto + 1):
            e = group.mul(e, group.g)
            tab[e] = m
        _dlog_tables[group.name] = (tab, upto, e)
    return tab


def dlog_decode(group: GroupParams, e: int, bound: int) -> int:
    """Smallest m <= bound with g^m = e; table below 2^16, BSGS above."""
    if bound < 0:
        raise Malformed("bound must be >= 0")
    bound = min(bound, group.q - 1)
    if bound < _TABLE_LIMIT:
        tab = _table(group, bound)
        m = tab.get(e)
        if m is None or m > bound:
            raise DecodeOutOfRange(f"no discrete log within bound {bound}")
        return m
    # baby-step giant-step over [0, bound]
    steps = math.isqrt(bound) + 1
    baby = {}
    cur = 1
    for j in range(steps):
        baby.setdefault(cur, j)
        cur = group.mul(cur, group.g)
    giant = group.inv(group.g_pow(steps))
    gamma = e
    for i in range(steps + 1):
        j = baby.get(gamma)
        if j is not None and i * steps + j <= bound:
            return i * steps + j
        gamma = group.mul(gamma, giant)
    raise DecodeOutOfRange(f"no discrete log within bound {bound}")
