"""Tallier-side machinery: n-of-n key generation, verifiable distributed
decryption, collection tallies, and hybrid-channel audits.

The tallier group uses additive n-of-n sharing: every tallier holds x_i, the
collection key is pk_t = prod(g^x_i), and decrypting anything requires a
verifying partial decryption from every share. Each share ships a Schnorr
possession proof; each partial decryption ships a Chaum-Pedersen equal-dlog
proof, so a single tampered factor is detectable by anyone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random

from .encoding import pack_fields
from .errors import (
    DecodeOutOfRange,
    InvalidPartProof,
    MissingShare,
    ProtocolError,
    Rejected,
    UNKNOWN_COLLECTION,
    UNKNOWN_VOTER,
)
from .groups import Ciphertext, GroupParams, ct_add, ct_sub, dlog_decode, encrypt
from .proofs import DleqProof, SchnorrProof, prove_dleq, prove_schnorr, verify_dleq, verify_schnorr


@dataclass(frozen=True)
class TallierShare:
    tallier: str
    secret: int
    public: int
    proof: SchnorrProof


@dataclass(frozen=True)
class PartialDecryption:
    tallier: str
    factor: int
    proof: DleqProof


def _share_context(collection_hint: str, tallier: str) -> bytes:
    return pack_fields([b"share", collection_hint.encode(), tallier.encode()])


def _part_context(group: GroupParams, tallier: str, c: Ciphertext) -> bytes:
    return pack_fields(
        [b"part", tallier.encode(), group.encode_elem(c.a), group.encode_elem(c.b)]
    )


def dkg(
    group: GroupParams,
    tallier_ids: list[str],
    rng: Random | None = None,
    collection_hint: str = "",
) -> tuple[int, list[TallierShare]]:
    """n-of-n distributed key generation (run locally for every party).

    Returns the joint public key pk_t = prod(g^x_i) and one share per tallier,
    each carrying a possession proof bound to the collection.
    """
    if len(set(tallier_ids)) != len(tallier_ids):
        raise ProtocolError("DUPLICATE_TALLIER", "tallier ids must be distinct")
    if not tallier_ids:
        raise ProtocolError("DUPLICATE_TALLIER", "at least one tallier required")
    shares = []
    pk_t = 1
    for tid in tallier_ids:
        while True:
            x = group.rand_scalar(rng)
            if x != 0:
                break
        y = group.g_pow(x)
        proof = prove_schnorr(group, x, _share_context(collection_hint, tid), rng)
        shares.append(TallierShare(tallier=tid, secret=x, public=y, proof=proof))
        pk_t = group.mul(pk_t, y)
    return pk_t, shares


def verify_share(
    group: GroupParams, tallier: str, public: int, proof: SchnorrProof, collection_hint: str = ""
) -> bool:
    return verify_schnorr(group, public, proof, _share_context(collection_hint, tallier))


def partial_decrypt(
    group: GroupParams, share: TallierShare, c: Ciphertext, rng: Random | None = None
) -> PartialDecryption:
    """One tallier's decryption factor a^x_i with its correctness proof."""
    factor = group.pow(c.a, share.secret)
    proof = prove_dleq(group, share.secret, c.a, _part_context(group, share.tallier, c), rng)
    return PartialDecryption(tallier=share.tallier, factor=factor, proof=proof)


def combine(
    group: GroupParams,
    share_publics: dict[str, int],
    c: Ciphertext,
    parts: list[PartialDecryption],
    bound: int,
) -> int:
    """Combine one verifying partial decryption per tallier into a plaintext."""
    by_tallier = {p.tallier: p for p in parts}
    prod = 1
    for tid, y in share_publics.items():
        part = by_tallier.get(tid)
        if part is None:
            raise MissingShare(f"no partial decryption from {tid}")
        if not verify_dleq(
            group, y, c.a, part.factor, part.proof, _part_context(group, tid, c)
        ):
            raise InvalidPartProof(f"partial decryption from {tid} failed verification")
        prod = group.mul(prod, part.factor)
    residue = group.mul(c.b, group.inv(prod))
    return dlog_decode(group, residue, bound)


def ddec(
    group: GroupParams,
    shares: list[TallierShare],
    c: Ciphertext,
    bound: int,
    rng: Random | None = None,
) -> int:
    """Full distributed decryption: every share contributes, then combine."""
    parts = [partial_decrypt(group, s, c, rng) for s in shares]
    return combine(group, {s.tallier: s.public for s in shares}, c, parts, bound)


# ---------------------------------------------------------------------------
# tallies


@dataclass(frozen=True)
class TallyResult:
    collection: str
    bound_digest: str
    aggregate: Ciphertext
    count: int
    voters: tuple[str, ...] | None  # None = every ballot chain of the collection
    voter_count: int
    parts: tuple[PartialDecryption, ...]

    def to_payload(self, group: GroupParams) -> dict:
        return {
            "collection": self.collection,
            "bound": self.bound_digest,
            "aggregate": self.aggregate.as_dict(group),
            "count": self.count,
            "voters": sorted(self.voters) if self.voters is not None else None,
            "voter_count": self.voter_count,
            "parts": {
                p.tallier: {
                    "factor": group.elem_hex(p.factor),
                    "proof": p.proof.to_hex(group),
                }
                for p in self.parts
            },
        }


def aggregate_last_entries(group: GroupParams, chains: dict[str, list], voters) -> Ciphertext:
    """Homomorphic sum of the last entries' tally-side ciphertexts."""
    agg = encrypt(group, 1, 0, 0)  # (1, 1): the additive identity
    for vid in voters:
        agg = ct_add(group, agg, chains[vid][-1].ct)
    return agg


def tally_collection(
    state,
    collection_id: str,
    shares: list[TallierShare],
    subset: list[str] | None = None,
    rng: Random | None = None,
) -> TallyResult:
    """Tally a collection over all its ballot chains, or a voter subset.

    Chains of voters later removed from the whitelist still count: granted
    participations are irrevocable. The result carries every partial
    decryption and proof so third parties can re-verify it from the board.
    """
    group = state.group
    if collection_id not in state.collections:
        raise Rejected(UNKNOWN_COLLECTION, f"no collection {collection_id}")
    chains = {
        vid: chain.entries
        for (vid, cid), chain in state.chains.items()
        if cid == collection_id
    }
    if subset is None:
        voters = sorted(chains)
        recorded: tuple[str, ...] | None = None
    else:
        for vid in subset:
            if vid not in chains:
                raise Rejected(UNKNOWN_VOTER, f"{vid} has no ballot for {collection_id}")
        voters = sorted(set(subset))
        recorded = tuple(voters)
    agg = aggregate_last_entries(group, chains, voters)
    parts = tuple(partial_decrypt(group, s, agg, rng) for s in shares)
    count = combine(group, {s.tallier: s.public for s in shares}, agg, list(parts), len(voters))
    return TallyResult(
        collection=collection_id,
        bound_digest=state.head,
        aggregate=agg,
        count=count,
        voters=recorded,
        voter_count=len(voters),
        parts=parts,
    )


# ---------------------------------------------------------------------------
# hybrid-channel audit


@dataclass(frozen=True)
class HCEvidence:
    """A paper-trail record: this voter verifiably participated over HC."""

    voter: str
    collection: str
    entry_index: int | None
    blob_digest: str

    def to_dict(self) -> dict:
        return {
            "voter": self.voter,
            "collection": self.collection,
            "entry_index": self.entry_index,
            "blob_digest": self.blob_digest,
        }

    @staticmethod
    def from_dict(doc: dict) -> "HCEvidence":
        return HCEvidence(
            voter=doc["voter"],
            collection=doc["collection"],
            entry_index=doc.get("entry_index"),
            blob_digest=doc.get("blob_digest", ""),
        )


@dataclass
class AuditReport:
    items: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(item["pass"] for item in self.items)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "items": self.items}


def hc_audit(
    state,
    shares_by_collection: dict[str, list[TallierShare]],
    evidence: list[HCEvidence],
    rng: Random | None = None,
) -> AuditReport:
    """Audit hybrid-channel conduct against the submitted evidence.

    Evidenced (voter, collection) pairs: the voter's last tally-side
    ciphertext must decrypt to 1 (HC did not drop the participation).
    Everything else HC touched: per collection, the aggregate of HC-submitted
    entries minus the aggregate of the entries immediately before must decrypt
    to 0 (HC did not stuff participations). Ciphertexts of different
    collections live under different tallier keys, so the aggregation runs
    across voters within each collection. Nothing else is ever decrypted.
    """
    group = state.group
    report = AuditReport()
    evidenced: set[tuple[str, str]] = set()
    for ev in evidence:
        chain = state.chains.get((ev.voter, ev.collection))
        shares = shares_by_collection.get(ev.collection)
        item = {
            "check": "hc_evidence",
            "voter": ev.voter,
            "collection": ev.collection,
            "pass": True,
            "detail": "",
        }
        if chain is None or shares is None:
            item["pass"] = False
            item["detail"] = "malformed: no ballot chain for evidence"
            report.items.append(item)
            continue
        if ev.entry_index is not None:
            if not (0 <= ev.entry_index < len(chain.entries)):
                item["pass"] = False
                item["detail"] = "malformed: evidence references a missing entry"
            elif chain.entries[ev.entry_index].origin != "HC":
                item["pass"] = False
                item["detail"] = "malformed: evidence references a non-HC entry"
        evidenced.add((ev.voter, ev.collection))
        try:
            value = ddec(group, shares, chain.entries[-1].ct, 1, rng)
        except DecodeOutOfRange:
            value = None
        if value != 1:
            item["pass"] = False
            item["detail"] = (item["detail"] + "; " if item["detail"] else "") + (
                "last entry does not encrypt 1 (participation dropped)"
            )
        report.items.append(item)

    # per collection: aggregate every HC entry lacking evidence for its chain
    per_collection: dict[str, tuple] = {}
    for (vid, cid), chain in sorted(state.chains.items()):
        if (vid, cid) in evidenced:
            continue
        for i, entry in enumerate(chain.entries):
            if entry.origin != "HC":
                continue
            prev = chain.entries[i - 1]
            alpha, beta, n = per_collection.get(cid, (None, None, 0))
            alpha = entry.ct if alpha is None else ct_add(group, alpha, entry.ct)
            beta = prev.ct if beta is None else ct_add(group, beta, prev.ct)
            per_collection[cid] = (alpha, beta, n + 1)
    for cid, (alpha, beta, n_entries) in sorted(per_collection.items()):
        shares = shares_by_collection.get(cid)
        if shares is None:
            report.items.append(
                {
                    "check": "hc_aggregate",
                    "collection": cid,
                    "entries": n_entries,
                    "pass": False,
                    "detail": "no tallier shares available for this collection",
                }
            )
            continue
        diff = ct_sub(group, alpha, beta)
        try:
            stuffed = ddec(group, shares, diff, n_entries, rng)
        except DecodeOutOfRange:
            stuffed = -1
        report.items.append(
            {
                "check": "hc_aggregate",
                "collection": cid,
                "entries": n_entries,
                "pass": stuffed == 0,
                "detail": "" if stuffed == 0 else f"aggregate difference decrypts to {stuffed}",
            }
        )
    return report
