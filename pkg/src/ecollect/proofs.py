"""Non-interactive sigma protocols for ballot entries.

Two statement families secure the ballot chains:

* an encryption-pair proof for the initial entry: both ciphertexts encrypt a
  public ``m`` under the collection key and the voter's audit key;
* a disjunctive transition proof for every later entry: EITHER both
  ciphertexts freshly encrypt 1, OR both re-encrypt the predecessor pair.
  Which disjunct holds is hidden by standard challenge-splitting (the false
  branches are simulated).

Because re-encryption never changes the key a ciphertext lives under, a chain
whose audit-side ciphertext predates a key rotation stays under the old audit
key. The carry disjunct therefore exists once per registered audit-key epoch;
with a single epoch this is exactly the classic two-branch proof.

All challenges are Fiat-Shamir over a length-prefixed transcript that binds
the group, the keys, both ciphertext pairs, and a ProofContext carrying the
chain position and the board head digest, so proofs cannot be replayed onto
another chain, another position, or a forked board.

Schnorr possession proofs and Chaum-Pedersen equal-discrete-log proofs (used
by the tallier subprotocols) live here as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random

from .encoding import hex_to_bytes, pack_fields, sha256, u64, unpack_fields
from .errors import Malformed, ProtocolError
from .groups import Ciphertext, GroupParams, encrypt, rerand

DOMAIN_ENC_PAIR = b"ecollect/encpair/v1"
DOMAIN_TRANSITION = b"ecollect/transition/v1"
DOMAIN_SCHNORR = b"ecollect/schnorr/v1"
DOMAIN_DLEQ = b"ecollect/dleq/v1"

SIGN = "sign"
CARRY = "carry"


@dataclass(frozen=True)
class ProofContext:
    """Public context a proof is bound to; any change invalidates the proof."""

    collection: str
    voter: str
    index: int
    prev_digest: str
    bound_digest: str

    def fields(self) -> list[bytes]:
        return [
            self.collection.encode(),
            self.voter.encode(),
            u64(self.index),
            hex_to_bytes(self.prev_digest, 32),
            hex_to_bytes(self.bound_digest, 32),
        ]


def _challenge(group: GroupParams, domain: bytes, fields: list[bytes]) -> int:
    data = pack_fields([domain, group.name.encode(), *fields])
    return int.from_bytes(sha256(data), "big") % group.q


# ---------------------------------------------------------------------------
# encryption-pair proof (initial ballot entries)


@dataclass(frozen=True)
class EncPairProof:
    challenge: int
    t: tuple[int, int, int, int]
    z_t: int
    z_v: int

    def to_hex(self, group: GroupParams) -> str:
        fields = [
            b"EP1",
            group.encode_scalar(self.challenge),
            *[group.encode_elem(t) for t in self.t],
            group.encode_scalar(self.z_t),
            group.encode_scalar(self.z_v),
        ]
        return pack_fields(fields).hex()

    @staticmethod
    def from_hex(group: GroupParams, text: str) -> "EncPairProof":
        fields = unpack_fields(bytes.fromhex(text))
        if len(fields) != 8 or fields[0] != b"EP1":
            raise Malformed("bad encryption-pair proof encoding")
        return EncPairProof(
            challenge=group.decode_scalar(fields[1]),
            t=tuple(group.decode_elem(f) for f in fields[2:6]),
            z_t=group.decode_scalar(fields[6]),
            z_v=group.decode_scalar(fields[7]),
        )


def _enc_pair_transcript(
    group: GroupParams,
    pk_t: int,
    pk_v: int,
    m: int,
    ct: Ciphertext,
    cv: Ciphertext,
    ctx: ProofContext,
    t: tuple[int, int, int, int],
) -> int:
    fields = [
        group.encode_elem(pk_t),
        group.encode_elem(pk_v),
        u64(m),
        group.encode_elem(ct.a),
        group.encode_elem(ct.b),
        group.encode_elem(cv.a),
        group.encode_elem(cv.b),
        *ctx.fields(),
        *[group.encode_elem(x) for x in t],
    ]
    return _challenge(group, DOMAIN_ENC_PAIR, fields)


def prove_enc_pair(
    group: GroupParams,
    pk_t: int,
    pk_v: int,
    m: int,
    r_t: int,
    r_v: int,
    ctx: ProofContext,
    rng: Random | None = None,
) -> EncPairProof:
    """Prove c_t = Enc(pk_t, m, r_t) and c_v = Enc(pk_v, m, r_v) for public m."""
    ct = encrypt(group, pk_t, m, r_t)
    cv = encrypt(group, pk_v, m, r_v)
    w_t = group.rand_scalar(rng)
    w_v = group.rand_scalar(rng)
    t = (group.g_pow(w_t), group.pow(pk_t, w_t), group.g_pow(w_v), group.pow(pk_v, w_v))
    c = _enc_pair_transcript(group, pk_t, pk_v, m, ct, cv, ctx, t)
    return EncPairProof(
        challenge=c,
        t=t,
        z_t=(w_t + c * r_t) % group.q,
        z_v=(w_v + c * r_v) % group.q,
    )


def verify_enc_pair(
    group: GroupParams,
    pk_t: int,
    pk_v: int,
    m: int,
    ct: Ciphertext,
    cv: Ciphertext,
    proof: EncPairProof,
    ctx: ProofContext,
) -> bool:
    try:
        g_inv_m = group.inv(group.g_pow(m))
        targets = (
            ct.a,
            group.mul(ct.b, g_inv_m),
            cv.a,
            group.mul(cv.b, g_inv_m),
        )
        bases = (group.g, pk_t, group.g, pk_v)
        zs = (proof.z_t, proof.z_t, proof.z_v, proof.z_v)
        c = proof.challenge
        for base, u, t, z in zip(bases, targets, proof.t, zs):
            if group.pow(base, z) != group.mul(t, group.pow(u, c)):
                return False
        return c == _enc_pair_transcript(group, pk_t, pk_v, m, ct, cv, ctx, proof.t)
    except (Malformed, ValueError, TypeError):
        return False


# ---------------------------------------------------------------------------
# disjunctive transition proof (every entry after the initial one)


@dataclass(frozen=True)
class BranchProof:
    challenge: int
    t: tuple[int, int, int, int]
    z_t: int
    z_v: int


@dataclass(frozen=True)
class TransitionProof:
    """Branch 0 is the sign disjunct; branch 1+j carries under audit-key epoch j."""

    branches: tuple[BranchProof, ...]

    def to_hex(self, group: GroupParams) -> str:
        fields: list[bytes] = [b"TR1"]
        for br in self.branches:
            fields.append(group.encode_scalar(br.challenge))
            fields.extend(group.encode_elem(t) for t in br.t)
            fields.append(group.encode_scalar(br.z_t))
            fields.append(group.encode_scalar(br.z_v))
        return pack_fields(fields).hex()

    @staticmethod
    def from_hex(group: GroupParams, text: str) -> "TransitionProof":
        fields = unpack_fields(bytes.fromhex(text))
        if len(fields) < 1 + 7 or fields[0] != b"TR1" or (len(fields) - 1) % 7 != 0:
            raise Malformed("bad transition proof encoding")
        branches = []
        for i in range(1, len(fields), 7):
            chunk = fields[i : i + 7]
            branches.append(
                BranchProof(
                    challenge=group.decode_scalar(chunk[0]),
                    t=tuple(group.decode_elem(f) for f in chunk[1:5]),
                    z_t=group.decode_scalar(chunk[5]),
                    z_v=group.decode_scalar(chunk[6]),
                )
            )
        return TransitionProof(branches=tuple(branches))


@dataclass(frozen=True)
class TransitionStatement:
    """Public statement: the keys and the predecessor/successor ciphertext pairs.

    ``pk_v_history`` lists the voter's audit keys up to the epoch active when
    the entry was created; the sign branch uses the last one.
    """

    pk_t: int
    pk_v_history: tuple[int, ...]
    prev_ct: Ciphertext
    prev_cv: Ciphertext
    next_ct: Ciphertext
    next_cv: Ciphertext

    def branch_count(self) -> int:
        return 1 + len(self.pk_v_history)

    def branch_bases_targets(
        self, group: GroupParams, branch: int
    ) -> tuple[tuple[int, int, int, int], tuple[int, int, int, int]]:
        """(bases, targets) of the four Chaum-Pedersen equations of a branch."""
        if branch == 0:
            pk_v = self.pk_v_history[-1]
            g_inv = group.inv(group.g)
            targets = (
                self.next_ct.a,
                group.mul(self.next_ct.b, g_inv),
                self.next_cv.a,
                group.mul(self.next_cv.b, g_inv),
            )
        else:
            pk_v = self.pk_v_history[branch - 1]
            targets = (
                group.mul(self.next_ct.a, group.inv(self.prev_ct.a)),
                group.mul(self.next_ct.b, group.inv(self.prev_ct.b)),
                group.mul(self.next_cv.a, group.inv(self.prev_cv.a)),
                group.mul(self.next_cv.b, group.inv(self.prev_cv.b)),
            )
        return (group.g, self.pk_t, group.g, pk_v), targets

    def transcript_fields(self, group: GroupParams, ctx: ProofContext) -> list[bytes]:
        return [
            group.encode_elem(self.pk_t),
            u64(len(self.pk_v_history)),
            *[group.encode_elem(pk) for pk in self.pk_v_history],
            group.encode_elem(self.prev_ct.a),
            group.encode_elem(self.prev_ct.b),
            group.encode_elem(self.prev_cv.a),
            group.encode_elem(self.prev_cv.b),
            group.encode_elem(self.next_ct.a),
            group.encode_elem(self.next_ct.b),
            group.encode_elem(self.next_cv.a),
            group.encode_elem(self.next_cv.b),
            *ctx.fields(),
        ]


def _transition_challenge(
    group: GroupParams,
    stmt: TransitionStatement,
    ctx: ProofContext,
    branches: list[BranchProof],
) -> int:
    fields = stmt.transcript_fields(group, ctx)
    for br in branches:
        fields.extend(group.encode_elem(t) for t in br.t)
    return _challenge(group, DOMAIN_TRANSITION, fields)


def _simulated_branch(
    group: GroupParams, stmt: TransitionStatement, branch: int, rng: Random | None
) -> BranchProof:
    bases, targets = stmt.branch_bases_targets(group, branch)
    c = group.rand_scalar(rng)
    z_t = group.rand_scalar(rng)
    z_v = group.rand_scalar(rng)
    zs = (z_t, z_t, z_v, z_v)
    t = tuple(
        group.mul(group.pow(base, z), group.inv(group.pow(u, c)))
        for base, u, z in zip(bases, targets, zs)
    )
    return BranchProof(challenge=c, t=t, z_t=z_t, z_v=z_v)


def prove_transition(
    group: GroupParams,
    stmt: TransitionStatement,
    branch: str,
    witness: tuple[int, int],
    ctx: ProofContext,
    rng: Random | None = None,
    carry_epoch: int | None = None,
) -> TransitionProof:
    """Prove the disjunction honestly for the declared branch.

    ``witness`` is the randomness (r_t, r_v) used to form the next pair. For
    the carry branch, ``carry_epoch`` names the audit-key epoch whose key was
    used as the re-randomization base.
    """
    r_t, r_v = witness
    if branch == SIGN:
        real = 0
        pk_v = stmt.pk_v_history[-1]
        expect_ct = encrypt(group, stmt.pk_t, 1, r_t)
        expect_cv = encrypt(group, pk_v, 1, r_v)
    elif branch == CARRY:
        if carry_epoch is None:
            carry_epoch = len(stmt.pk_v_history) - 1
        if not 0 <= carry_epoch < len(stmt.pk_v_history):
            raise ProtocolError("INVALID_WITNESS", "carry epoch out of range")
        real = 1 + carry_epoch
        pk_v = stmt.pk_v_history[carry_epoch]
        expect_ct = rerand(group, stmt.pk_t, stmt.prev_ct, r_t)
        expect_cv = rerand(group, pk_v, stmt.prev_cv, r_v)
    else:
        raise ProtocolError("INVALID_WITNESS", f"unknown branch {branch!r}")
    if expect_ct != stmt.next_ct or expect_cv != stmt.next_cv:
        raise ProtocolError("INVALID_WITNESS", "witness inconsistent with declared branch")

    branches: list[BranchProof | None] = [None] * stmt.branch_count()
    for i in range(stmt.branch_count()):
        if i != real:
            branches[i] = _simulated_branch(group, stmt, i, rng)

    bases, _targets = stmt.branch_bases_targets(group, real)
    w_t = group.rand_scalar(rng)
    w_v = group.rand_scalar(rng)
    t_real = (
        group.pow(bases[0], w_t),
        group.pow(bases[1], w_t),
        group.pow(bases[2], w_v),
        group.pow(bases[3], w_v),
    )
    branches[real] = BranchProof(challenge=0, t=t_real, z_t=0, z_v=0)
    c_global = _transition_challenge(group, stmt, ctx, branches)  # type: ignore[arg-type]
    c_real = (c_global - sum(b.challenge for i, b in enumerate(branches) if i != real)) % group.q
    branches[real] = BranchProof(
        challenge=c_real,
        t=t_real,
        z_t=(w_t + c_real * r_t) % group.q,
        z_v=(w_v + c_real * r_v) % group.q,
    )
    return TransitionProof(branches=tuple(branches))  # type: ignore[arg-type]


def verify_transition(
    group: GroupParams,
    stmt: TransitionStatement,
    proof: TransitionProof,
    ctx: ProofContext,
    challenge: int | None = None,
) -> bool:
    """Check every branch equation and the challenge split.

    ``challenge`` overrides the Fiat-Shamir hash; it exists for the simulator
    test harness only.
    """
    try:
        if len(proof.branches) != stmt.branch_count():
            return False
        for i, br in enumerate(proof.branches):
            bases, targets = stmt.branch_bases_targets(group, i)
            zs = (br.z_t, br.z_t, br.z_v, br.z_v)
            for base, u, t, z in zip(bases, targets, br.t, zs):
                if group.pow(base, z) != group.mul(t, group.pow(u, br.challenge)):
                    return False
        if challenge is None:
            challenge = _transition_challenge(group, stmt, ctx, list(proof.branches))
        return sum(br.challenge for br in proof.branches) % group.q == challenge % group.q
    except (Malformed, ValueError, TypeError):
        return False


def simulate_transition(
    group: GroupParams,
    stmt: TransitionStatement,
    ctx: ProofContext,
    rng: Random | None = None,
    challenge: int | None = None,
) -> tuple[TransitionProof, int]:
    """Zero-knowledge simulator: a verifying transcript from public values only.

    The returned transcript verifies under the programmed challenge (pass it
    to ``verify_transition`` via ``challenge=``). Test harness use only.
    """
    if challenge is None:
        challenge = group.rand_scalar(rng)
    branches = [_simulated_branch(group, stmt, i, rng) for i in range(stmt.branch_count())]
    # rewrite the last branch challenge so the split sums to the target
    partial = sum(b.challenge for b in branches[:-1]) % group.q
    c_last = (challenge - partial) % group.q
    bases, targets = stmt.branch_bases_targets(group, stmt.branch_count() - 1)
    z_t = group.rand_scalar(rng)
    z_v = group.rand_scalar(rng)
    zs = (z_t, z_t, z_v, z_v)
    t = tuple(
        group.mul(group.pow(base, z), group.inv(group.pow(u, c_last)))
        for base, u, z in zip(bases, targets, zs)
    )
    branches[-1] = BranchProof(challenge=c_last, t=t, z_t=z_t, z_v=z_v)
    return TransitionProof(branches=tuple(branches)), challenge


# ---------------------------------------------------------------------------
# Schnorr possession and Chaum-Pedersen equal-dlog proofs (tallier machinery)


@dataclass(frozen=True)
class SchnorrProof:
    challenge: int
    response: int

    def to_hex(self, group: GroupParams) -> str:
        return pack_fields(
            [b"SC1", group.encode_scalar(self.challenge), group.encode_scalar(self.response)]
        ).hex()

    @staticmethod
    def from_hex(group: GroupParams, text: str) -> "SchnorrProof":
        fields = unpack_fields(bytes.fromhex(text))
        if len(fields) != 3 or fields[0] != b"SC1":
            raise Malformed("bad possession proof encoding")
        return SchnorrProof(group.decode_scalar(fields[1]), group.decode_scalar(fields[2]))


def prove_schnorr(
    group: GroupParams, x: int, context: bytes, rng: Random | None = None
) -> SchnorrProof:
    """Possession proof for y = g^x, bound to an application context."""
    y = group.g_pow(x)
    w = group.rand_scalar(rng)
    t = group.g_pow(w)
    c = _challenge(
        group, DOMAIN_SCHNORR, [group.encode_elem(y), context, group.encode_elem(t)]
    )
    return SchnorrProof(challenge=c, response=(w + c * x) % group.q)


def verify_schnorr(group: GroupParams, y: int, proof: SchnorrProof, context: bytes) -> bool:
    try:
        t = group.mul(group.g_pow(proof.response), group.inv(group.pow(y, proof.challenge)))
        c = _challenge(
            group, DOMAIN_SCHNORR, [group.encode_elem(y), context, group.encode_elem(t)]
        )
        return c == proof.challenge
    except (Malformed, ValueError, TypeError):
        return False


@dataclass(frozen=True)
class DleqProof:
    challenge: int
    response: int

    def to_hex(self, group: GroupParams) -> str:
        return pack_fields(
            [b"DQ1", group.encode_scalar(self.challenge), group.encode_scalar(self.response)]
        ).hex()

    @staticmethod
    def from_hex(group: GroupParams, text: str) -> "DleqProof":
        fields = unpack_fields(bytes.fromhex(text))
        if len(fields) != 3 or fields[0] != b"DQ1":
            raise Malformed("bad equal-dlog proof encoding")
        return DleqProof(group.decode_scalar(fields[1]), group.decode_scalar(fields[2]))


def _dleq_challenge(
    group: GroupParams, base2: int, y: int, f: int, t1: int, t2: int, context: bytes
) -> int:
    return _challenge(
        group,
        DOMAIN_DLEQ,
        [
            group.encode_elem(base2),
            group.encode_elem(y),
            group.encode_elem(f),
            context,
            group.encode_elem(t1),
            group.encode_elem(t2),
        ],
    )


def prove_dleq(
    group: GroupParams, x: int, base2: int, context: bytes, rng: Random | None = None
) -> DleqProof:
    """Prove log_g(y) = log_base2(f) = x for y = g^x, f = base2^x."""
    y = group.g_pow(x)
    f = group.pow(base2, x)
    w = group.rand_scalar(rng)
    t1 = group.g_pow(w)
    t2 = group.pow(base2, w)
    c = _dleq_challenge(group, base2, y, f, t1, t2, context)
    return DleqProof(challenge=c, response=(w + c * x) % group.q)


def verify_dleq(
    group: GroupParams, y: int, base2: int, f: int, proof: DleqProof, context: bytes
) -> bool:
    try:
        c, z = proof.challenge, proof.response
        t1 = group.mul(group.g_pow(z), group.inv(group.pow(y, c)))
        t2 = group.mul(group.pow(base2, z), group.inv(group.pow(f, c)))
        return c == _dleq_challenge(group, base2, y, f, t1, t2, context)
    except (Malformed, ValueError, TypeError):
        return False
