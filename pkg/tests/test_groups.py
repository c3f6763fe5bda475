"""Group and exponential-ElGamal tests.

Expected values for the small group were computed independently with plain
modular arithmetic over p=23, q=11, g=2 before being frozen here.
"""

import random

import pytest

from ecollect.encoding import canonical_json
from ecollect.errors import DecodeOutOfRange, Malformed
from ecollect.groups import (
    GROUPS,
    PROD_GROUP,
    SIM_GROUP,
    TEST_GROUP,
    Ciphertext,
    ct_add,
    ct_sub,
    decrypt,
    dlog_decode,
    encrypt,
    get_group,
    keygen,
    rerand,
)


def test_group_registry():
    assert set(GROUPS) == {"p23", "sim64", "prod2048"}
    assert get_group("p23") is TEST_GROUP
    with pytest.raises(Malformed):
        get_group("nope")


@pytest.mark.parametrize("group", [TEST_GROUP, SIM_GROUP, PROD_GROUP])
def test_group_parameters_are_sound(group):
    # q prime (deterministic Miller-Rabin witnesses suffice at these sizes)
    import sympy

    assert sympy.isprime(group.q)
    assert sympy.isprime(group.p)
    assert (group.p - 1) % group.q == 0
    assert group.g != 1
    assert pow(group.g, group.q, group.p) == 1  # g has order dividing q; q prime => exactly q


def test_keygen_oracle_values():
    # sk=3 -> pk = 2^3 mod 23 = 8
    g = TEST_GROUP
    assert g.g_pow(3) == 8
    assert g.g_pow(1) == 2  # identity exponent gives back the generator


def test_keygen_distinct_seeds():
    sks = {keygen(TEST_GROUP, random.Random(seed))[0] for seed in range(40)}
    assert len(sks) > 1
    sk, pk = keygen(SIM_GROUP, random.Random(7))
    assert pk == SIM_GROUP.g_pow(sk)
    assert 1 <= sk < SIM_GROUP.q


def test_encrypt_oracle_values():
    g = TEST_GROUP
    assert encrypt(g, 8, 0, 0) == Ciphertext(1, 1)
    assert encrypt(g, 8, 1, 2) == Ciphertext(4, 13)
    assert encrypt(g, 8, 1, 1) == Ciphertext(2, 16)
    with pytest.raises(Malformed):
        encrypt(g, 8, -1, 2)


def test_decrypt_oracle_values():
    g = TEST_GROUP
    assert decrypt(g, 3, Ciphertext(4, 13), 1) == 1
    assert decrypt(g, 3, Ciphertext(1, 1), 1) == 0
    # (4,16) is an encryption under pk=13 (sk=7); wrong key leaves the residue
    # outside {g^0, g^1}
    with pytest.raises(DecodeOutOfRange):
        decrypt(g, 3, Ciphertext(4, 16), 1)


def test_rerand_oracle_values():
    g = TEST_GROUP
    c = rerand(g, 8, Ciphertext(4, 13), 1)
    assert c == Ciphertext(8, 12)
    assert decrypt(g, 3, c, 1) == 1
    assert rerand(g, 8, Ciphertext(4, 13), 0) == Ciphertext(4, 13)


def test_rerand_composes_additively():
    g = TEST_GROUP
    rng = random.Random(11)
    for _ in range(50):
        c = encrypt(g, 8, rng.randrange(2), rng.randrange(g.q))
        r1, r2 = rng.randrange(g.q), rng.randrange(g.q)
        twice = rerand(g, 8, rerand(g, 8, c, r1), r2)
        once = rerand(g, 8, c, (r1 + r2) % g.q)
        assert twice == once


def test_add_oracle_values():
    g = TEST_GROUP
    assert ct_add(g, Ciphertext(4, 13), Ciphertext(1, 1)) == Ciphertext(4, 13)
    s = ct_add(g, Ciphertext(4, 13), Ciphertext(2, 16))
    assert s == Ciphertext(8, 1)
    assert decrypt(g, 3, s, 2) == 2


def test_add_commutes():
    g = TEST_GROUP
    rng = random.Random(5)
    for _ in range(30):
        x = encrypt(g, 8, rng.randrange(2), rng.randrange(g.q))
        y = encrypt(g, 8, rng.randrange(2), rng.randrange(g.q))
        assert ct_add(g, x, y) == ct_add(g, y, x)


def test_sub_inverts_add():
    g = SIM_GROUP
    rng = random.Random(6)
    sk, pk = keygen(g, rng)
    a = encrypt(g, pk, 5, g.rand_scalar(rng))
    b = encrypt(g, pk, 3, g.rand_scalar(rng))
    assert decrypt(g, sk, ct_sub(g, a, b), 10) == 2


def test_dlog_decode_oracle_values():
    g = TEST_GROUP
    assert dlog_decode(g, 4, 10) == 2
    assert dlog_decode(g, 1, 0) == 0
    with pytest.raises(DecodeOutOfRange):
        dlog_decode(g, 7, 3)  # {1,2,4,8} does not contain 7


def test_dlog_decode_bsgs_matches_table():
    g = SIM_GROUP
    rng = random.Random(3)
    for _ in range(25):
        m = rng.randrange(200_000)
        e = g.g_pow(m)
        assert dlog_decode(g, e, 1 << 18) == m  # exercises the BSGS path
    with pytest.raises(DecodeOutOfRange):
        dlog_decode(g, g.g_pow((1 << 18) + 5), 1 << 18)


@pytest.mark.parametrize("group", [TEST_GROUP, PROD_GROUP])
def test_round_trip_both_groups(group):
    rng = random.Random(group.p % 1000)
    sk, pk = keygen(group, rng)
    n = 250 if group is PROD_GROUP else 5000
    for _ in range(n):
        m = rng.randrange(2)
        c = encrypt(group, pk, m, group.rand_scalar(rng))
        assert decrypt(group, sk, c, 1) == m
        c2 = rerand(group, pk, c, group.rand_scalar(rng))
        assert decrypt(group, sk, c2, 1) == m


def test_homomorphism_property():
    g = TEST_GROUP
    rng = random.Random(9)
    sk, pk = keygen(g, rng)
    for _ in range(200):
        m1, m2 = rng.randrange(2), rng.randrange(2)
        c = ct_add(
            g,
            encrypt(g, pk, m1, g.rand_scalar(rng)),
            encrypt(g, pk, m2, g.rand_scalar(rng)),
        )
        assert decrypt(g, sk, c, 2) == m1 + m2


@pytest.mark.parametrize("group", [TEST_GROUP, SIM_GROUP, PROD_GROUP])
def test_element_encoding_round_trip(group):
    rng = random.Random(13)
    for _ in range(20):
        e = group.g_pow(group.rand_scalar(rng))
        raw = group.encode_elem(e)
        assert len(raw) == group.elem_len
        assert group.decode_elem(raw) == e
        assert group.elem_from_hex(group.elem_hex(e)) == e


def test_non_canonical_encodings_rejected():
    g = TEST_GROUP
    with pytest.raises(Malformed):
        g.decode_elem(b"\x00\x01")  # wrong length
    with pytest.raises(Malformed):
        g.decode_elem(bytes([24]))  # >= p
    with pytest.raises(Malformed):
        g.decode_elem(bytes([5]))  # 5 is not in the order-11 subgroup mod 23
    with pytest.raises(Malformed):
        g.decode_elem(bytes([0]))
    with pytest.raises(Malformed):
        g.elem_from_hex("0G")
    with pytest.raises(Malformed):
        TEST_GROUP.decode_scalar(bytes([11]))  # == q


def test_ciphertext_dict_round_trip():
    g = SIM_GROUP
    c = encrypt(g, g.g_pow(5), 1, 77)
    doc = c.as_dict(g)
    assert Ciphertext.from_dict(g, doc) == c
    # canonical rendering is stable
    assert canonical_json(doc) == canonical_json(c.as_dict(g))
    with pytest.raises(Malformed):
        Ciphertext.from_dict(g, {"a": doc["a"]})
