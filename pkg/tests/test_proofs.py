"""Sigma-protocol tests: completeness, context binding, soundness, hiding."""

import dataclasses
import random

import pytest

from ecollect.encoding import ZERO_DIGEST, sha256_hex
from ecollect.errors import ProtocolError
from ecollect.groups import (
    PROD_GROUP,
    SIM_GROUP,
    TEST_GROUP,
    Ciphertext,
    encrypt,
    keygen,
    rerand,
)
from ecollect.proofs import (
    CARRY,
    SIGN,
    DleqProof,
    EncPairProof,
    ProofContext,
    SchnorrProof,
    TransitionProof,
    TransitionStatement,
    prove_dleq,
    prove_enc_pair,
    prove_schnorr,
    prove_transition,
    simulate_transition,
    verify_dleq,
    verify_enc_pair,
    verify_schnorr,
    verify_transition,
)

CTX = ProofContext(
    collection="C1",
    voter="v1",
    index=1,
    prev_digest=sha256_hex(b"prev"),
    bound_digest=sha256_hex(b"head"),
)


def make_statement(group, rng, prev_m=0, branch=SIGN, history_len=1, carry_epoch=None):
    """Builds an honest (statement, branch, witness, carry_epoch) tuple."""
    _, pk_t = keygen(group, rng)
    history = []
    sks = []
    for _ in range(history_len):
        sk, pk = keygen(group, rng)
        sks.append(sk)
        history.append(pk)
    if carry_epoch is None:
        carry_epoch = history_len - 1
    prev_ct = encrypt(group, pk_t, prev_m, group.rand_scalar(rng))
    prev_cv = encrypt(group, history[carry_epoch], prev_m, group.rand_scalar(rng))
    r_t, r_v = group.rand_scalar(rng), group.rand_scalar(rng)
    if branch == SIGN:
        next_ct = encrypt(group, pk_t, 1, r_t)
        next_cv = encrypt(group, history[-1], 1, r_v)
    else:
        next_ct = rerand(group, pk_t, prev_ct, r_t)
        next_cv = rerand(group, history[carry_epoch], prev_cv, r_v)
    stmt = TransitionStatement(
        pk_t=pk_t,
        pk_v_history=tuple(history),
        prev_ct=prev_ct,
        prev_cv=prev_cv,
        next_ct=next_ct,
        next_cv=next_cv,
    )
    return stmt, (r_t, r_v), carry_epoch


# ---------------------------------------------------------------------------
# encryption-pair proof


def test_enc_pair_initial_ballot():
    g = TEST_GROUP
    rng = random.Random(1)
    _, pk_t = keygen(g, rng)
    _, pk_v = keygen(g, rng)
    ctx = dataclasses.replace(CTX, index=0, prev_digest=ZERO_DIGEST)
    proof = prove_enc_pair(g, pk_t, pk_v, 0, 0, 0, ctx, rng)
    ct = encrypt(g, pk_t, 0, 0)
    cv = encrypt(g, pk_v, 0, 0)
    assert verify_enc_pair(g, pk_t, pk_v, 0, ct, cv, proof, ctx)
    # mutated c_v rejects
    bad_cv = encrypt(g, pk_v, 0, 1)
    assert not verify_enc_pair(g, pk_t, pk_v, 0, ct, bad_cv, proof, ctx)
    # different collection in the context rejects
    other = dataclasses.replace(ctx, collection="C2")
    assert not verify_enc_pair(g, pk_t, pk_v, 0, ct, cv, proof, other)


def test_enc_pair_round_trip_serialization():
    g = TEST_GROUP
    rng = random.Random(2)
    _, pk_t = keygen(g, rng)
    _, pk_v = keygen(g, rng)
    proof = prove_enc_pair(g, pk_t, pk_v, 1, 3, 5, CTX, rng)
    text = proof.to_hex(g)
    assert EncPairProof.from_hex(g, text) == proof
    assert EncPairProof.from_hex(g, text).to_hex(g) == text


# ---------------------------------------------------------------------------
# transition proof


@pytest.mark.parametrize("branch", [SIGN, CARRY])
@pytest.mark.parametrize("group", [TEST_GROUP, PROD_GROUP])
def test_transition_completeness(group, branch):
    rng = random.Random(42)
    n = 40 if group is PROD_GROUP else 300
    for i in range(n):
        stmt, witness, epoch = make_statement(group, rng, prev_m=i % 2, branch=branch)
        proof = prove_transition(group, stmt, branch, witness, CTX, rng, carry_epoch=epoch)
        assert verify_transition(group, stmt, proof, CTX)


def test_transition_multi_epoch_history():
    g = TEST_GROUP
    rng = random.Random(77)
    for epoch in range(3):
        stmt, witness, _ = make_statement(
            g, rng, prev_m=1, branch=CARRY, history_len=3, carry_epoch=epoch
        )
        proof = prove_transition(g, stmt, CARRY, witness, CTX, rng, carry_epoch=epoch)
        assert len(proof.branches) == 4  # sign + one carry per epoch
        assert verify_transition(g, stmt, proof, CTX)
    stmt, witness, _ = make_statement(g, rng, branch=SIGN, history_len=3)
    proof = prove_transition(g, stmt, SIGN, witness, CTX, rng)
    assert verify_transition(g, stmt, proof, CTX)


def test_witness_inconsistent_with_branch_refused():
    g = TEST_GROUP
    rng = random.Random(3)
    stmt, witness, _ = make_statement(g, rng, branch=SIGN)
    with pytest.raises(ProtocolError) as err:
        prove_transition(g, stmt, CARRY, witness, CTX, rng)
    assert err.value.code == "INVALID_WITNESS"
    with pytest.raises(ProtocolError):
        prove_transition(g, stmt, SIGN, (witness[0], (witness[1] + 1) % g.q), CTX, rng)


def test_context_binding_field_sweep():
    # sim group: the soundness error 1/q of the small test group would let a
    # mutated context slip through one time in eleven
    g = SIM_GROUP
    rng = random.Random(4)
    stmt, witness, _ = make_statement(g, rng, branch=SIGN)
    proof = prove_transition(g, stmt, SIGN, witness, CTX, rng)
    assert verify_transition(g, stmt, proof, CTX)
    mutations = [
        dataclasses.replace(CTX, collection="C9"),
        dataclasses.replace(CTX, voter="v9"),
        dataclasses.replace(CTX, index=CTX.index + 1),
        dataclasses.replace(CTX, prev_digest=sha256_hex(b"other")),
        dataclasses.replace(CTX, bound_digest=sha256_hex(b"fork")),
    ]
    for ctx in mutations:
        assert not verify_transition(g, stmt, proof, ctx)


def test_statement_mutations_reject():
    g = SIM_GROUP
    rng = random.Random(5)
    stmt, witness, _ = make_statement(g, rng, branch=CARRY, prev_m=1)
    proof = prove_transition(g, stmt, CARRY, witness, CTX, rng)
    tweaked = [
        dataclasses.replace(stmt, next_ct=rerand(g, stmt.pk_t, stmt.next_ct, 1)),
        dataclasses.replace(stmt, next_cv=rerand(g, stmt.pk_v_history[-1], stmt.next_cv, 1)),
        dataclasses.replace(stmt, prev_ct=rerand(g, stmt.pk_t, stmt.prev_ct, 1)),
        dataclasses.replace(stmt, pk_t=g.g_pow(9)),
        dataclasses.replace(stmt, pk_v_history=(g.g_pow(10),)),
    ]
    for bad in tweaked:
        assert not verify_transition(g, bad, proof, CTX)


def test_proof_structure_mutations_reject():
    g = SIM_GROUP
    rng = random.Random(6)
    stmt, witness, _ = make_statement(g, rng, branch=SIGN)
    proof = prove_transition(g, stmt, SIGN, witness, CTX, rng)
    br0, br1 = proof.branches
    # branch challenges not summing to the global challenge
    bad = TransitionProof(
        branches=(dataclasses.replace(br0, challenge=(br0.challenge + 1) % g.q), br1)
    )
    assert not verify_transition(g, stmt, bad, CTX)
    # single-field mutations of every proof component
    for which in range(2):
        br = proof.branches[which]
        variants = [
            dataclasses.replace(br, z_t=(br.z_t + 1) % g.q),
            dataclasses.replace(br, z_v=(br.z_v + 1) % g.q),
        ]
        for i in range(4):
            t = list(br.t)
            t[i] = g.mul(t[i], g.g)
            variants.append(dataclasses.replace(br, t=tuple(t)))
        for v in variants:
            branches = list(proof.branches)
            branches[which] = v
            assert not verify_transition(g, stmt, TransitionProof(tuple(branches)), CTX)
    # wrong branch count
    assert not verify_transition(g, stmt, TransitionProof((br0,)), CTX)


def test_transition_serialization_round_trip():
    g = PROD_GROUP
    rng = random.Random(7)
    stmt, witness, _ = make_statement(g, rng, branch=SIGN)
    proof = prove_transition(g, stmt, SIGN, witness, CTX, rng)
    text = proof.to_hex(g)
    assert TransitionProof.from_hex(g, text) == proof
    with pytest.raises(Exception):
        TransitionProof.from_hex(g, text[:-8])


def test_no_witness_for_one_to_zero_transition():
    """Exhaustive search over the order-11 group: an entry encrypting 1 admits
    no accepted successor encrypting 0 under either disjunct."""
    g = TEST_GROUP
    rng = random.Random(8)
    sk_t, pk_t = keygen(g, rng)
    sk_v, pk_v = keygen(g, rng)
    prev_ct = encrypt(g, pk_t, 1, 4)
    prev_cv = encrypt(g, pk_v, 1, 9)
    # candidate next pairs encrypting 0 (every randomness)
    for r1 in range(g.q):
        for r2 in range(g.q):
            next_ct = encrypt(g, pk_t, 0, r1)
            next_cv = encrypt(g, pk_v, 0, r2)
            # sign witness would need next = Enc(1, w): exhaust all w
            assert all(encrypt(g, pk_t, 1, w) != next_ct for w in range(g.q))
            # carry witness would need next_ct = prev_ct * Enc(0, w)
            assert all(rerand(g, pk_t, prev_ct, w) != next_ct for w in range(g.q))
            del next_cv


def test_forged_proofs_reject():
    """Simulator transcripts only pass under their programmed challenge; against
    the real Fiat-Shamir hash they fail (collision probability 2^-48 here), as
    does reusing an honest proof for a different false statement."""
    g = SIM_GROUP
    rng = random.Random(9)
    _, pk_t = keygen(g, rng)
    _, pk_v = keygen(g, rng)
    prev_ct = encrypt(g, pk_t, 1, 4)
    prev_cv = encrypt(g, pk_v, 1, 9)
    for i in range(300):
        next_ct = encrypt(g, pk_t, 0, g.rand_scalar(rng))
        next_cv = encrypt(g, pk_v, 0, g.rand_scalar(rng))
        stmt = TransitionStatement(pk_t, (pk_v,), prev_ct, prev_cv, next_ct, next_cv)
        proof, _c = simulate_transition(g, stmt, CTX, rng)
        assert not verify_transition(g, stmt, proof, CTX)


def test_simulator_accepts_under_programmed_challenge():
    g = TEST_GROUP
    rng = random.Random(10)
    stmt, _w, _e = make_statement(g, rng, branch=SIGN)
    proof, challenge = simulate_transition(g, stmt, CTX, rng)
    assert verify_transition(g, stmt, proof, CTX, challenge=challenge)
    # same shape as an honest proof
    honest = prove_transition(g, stmt, SIGN, _w, CTX, rng)
    assert len(proof.branches) == len(honest.branches)
    assert len(proof.to_hex(g)) == len(honest.to_hex(g))


def test_branch_hiding_format_equality():
    g = TEST_GROUP
    rng = random.Random(11)
    s1, w1, _ = make_statement(g, rng, branch=SIGN)
    p1 = prove_transition(g, s1, SIGN, w1, CTX, rng)
    s2, w2, e2 = make_statement(g, rng, prev_m=1, branch=CARRY)
    p2 = prove_transition(g, s2, CARRY, w2, CTX, rng, carry_epoch=e2)
    assert len(p1.to_hex(g)) == len(p2.to_hex(g))
    assert len(p1.branches) == len(p2.branches)


def test_hvzk_distribution_screen():
    """Chi-squared screen: per-field distributions of honest and simulated
    transcripts are indistinguishable over the small group."""
    from scipy.stats import chi2_contingency

    g = TEST_GROUP
    rng = random.Random(12)
    stmt, witness, _ = make_statement(g, rng, branch=SIGN)

    def field_vector(proof):
        out = []
        for br in proof.branches:
            out.extend([br.challenge, br.z_t, br.z_v])
        return out

    n = 1000
    honest = [field_vector(prove_transition(g, stmt, SIGN, witness, CTX, rng)) for _ in range(n)]
    simulated = []
    while len(simulated) < n:
        proof, c = simulate_transition(g, stmt, CTX, rng)
        if verify_transition(g, stmt, proof, CTX, challenge=c):
            simulated.append(field_vector(proof))
    for field in range(len(honest[0])):
        h_counts = [0] * g.q
        s_counts = [0] * g.q
        for row in honest:
            h_counts[row[field] % g.q] += 1
        for row in simulated:
            s_counts[row[field] % g.q] += 1
        _stat, p_value, _dof, _exp = chi2_contingency([h_counts, s_counts])
        assert p_value > 1e-3, f"field {field} distinguishable (p={p_value})"


# ---------------------------------------------------------------------------
# Schnorr / DLEQ


def test_schnorr_possession():
    g = SIM_GROUP
    rng = random.Random(13)
    x, y = keygen(g, rng)
    proof = prove_schnorr(g, x, b"dkg:C1:t1", rng)
    assert verify_schnorr(g, y, proof, b"dkg:C1:t1")
    assert not verify_schnorr(g, y, proof, b"dkg:C1:t2")
    assert not verify_schnorr(g, g.mul(y, g.g), proof, b"dkg:C1:t1")
    assert SchnorrProof.from_hex(g, proof.to_hex(g)) == proof


def test_dleq_equal_discrete_log():
    g = SIM_GROUP
    rng = random.Random(14)
    x, y = keygen(g, rng)
    base2 = g.g_pow(5)
    f = g.pow(base2, x)
    proof = prove_dleq(g, x, base2, b"part:C1", rng)
    assert verify_dleq(g, y, base2, f, proof, b"part:C1")
    assert not verify_dleq(g, y, base2, g.mul(f, g.g), proof, b"part:C1")
    assert not verify_dleq(g, y, base2, f, proof, b"part:C2")
    assert DleqProof.from_hex(g, proof.to_hex(g)) == proof
