"""Client-side actor logic.

Everything here works off a snapshot document (the board's public view, as
served by the snapshot/chain endpoints) so the same code drives an in-process
board and a remote one. Updates are always built against a concrete head
digest; if another writer lands first the board answers STALE_SNAPSHOT and
the client rebuilds from a fresh snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random

from .board import (
    HC_ID,
    ORIGIN_HC,
    ORIGIN_VOTER,
    REGISTER_VOTER,
    ROLL_ID,
    UPDATE_SET,
    WHITELIST_MUTATION,
    BallotEntry,
    make_envelope,
    replay_events,
    verify_chain,
)
from .authority import HCEvidence
from .encoding import pack_fields, sha256_hex
from .errors import DecodeOutOfRange, ProtocolError
from .groups import GroupParams, decrypt, encrypt, get_group, rerand
from .proofs import CARRY, SIGN, ProofContext, TransitionStatement, prove_transition
from .signing import SigKey

SIGNED = "Signed"
NOT_SIGNED = "NotSigned"
UNVERIFIABLE = "UnverifiableButUnchangedSinceRotation"


@dataclass
class VoterSecrets:
    """Authentication key plus the audit secret-key history (None = lost)."""

    voter: str
    group: str
    auth: SigKey
    audit_sks: list[int | None] = field(default_factory=list)

    @staticmethod
    def create(voter: str, group_name: str, rng: Random | None = None) -> "VoterSecrets":
        group = get_group(group_name)
        sk = group.rand_scalar(rng) or 1
        return VoterSecrets(voter=voter, group=group_name, auth=SigKey.generate(rng), audit_sks=[sk])

    def active_sk(self) -> int:
        sk = self.audit_sks[-1]
        if sk is None:
            raise ProtocolError("LOST_KEY", "active audit key unavailable")
        return sk

    def audit_pk(self, epoch: int = -1) -> int:
        group = get_group(self.group)
        sk = self.audit_sks[epoch]
        if sk is None:
            raise ProtocolError("LOST_KEY", f"audit key for epoch {epoch} unavailable")
        return group.g_pow(sk)

    def rotate(self, rng: Random | None = None) -> int:
        """Generate a fresh audit key; returns the new public key."""
        group = get_group(self.group)
        sk = group.rand_scalar(rng) or 1
        self.audit_sks.append(sk)
        return group.g_pow(sk)

    def forget_old_keys(self) -> None:
        """Simulate losing every pre-rotation secret key."""
        self.audit_sks = [None] * (len(self.audit_sks) - 1) + [self.audit_sks[-1]]

    def registration_envelope(self) -> dict:
        group = get_group(self.group)
        payload = {
            "voter": self.voter,
            "auth_key": self.auth.verify_key,
            "audit_key": group.elem_hex(self.audit_pk(0)),
        }
        return make_envelope(REGISTER_VOTER, payload, [(self.voter, self.auth)])

    def rotation_envelope(self) -> dict:
        group = get_group(self.group)
        payload = {"voter": self.voter, "audit_key": group.elem_hex(self.audit_pk(-1))}
        return make_envelope(REGISTER_VOTER, payload, [(self.voter, self.auth)])

    def to_payload(self) -> dict:
        return {
            "voter": self.voter,
            "group": self.group,
            "auth_seed": self.auth.seed.hex(),
            "audit_sks": [None if sk is None else sk for sk in self.audit_sks],
        }

    @staticmethod
    def from_payload(doc: dict) -> "VoterSecrets":
        return VoterSecrets(
            voter=doc["voter"],
            group=doc["group"],
            auth=SigKey(bytes.fromhex(doc["auth_seed"])),
            audit_sks=[None if sk is None else int(sk) for sk in doc["audit_sks"]],
        )


# ---------------------------------------------------------------------------
# snapshot helpers


def _snap_group(snap: dict) -> GroupParams:
    return get_group(snap["group"])


def _snap_entries(snap: dict, group: GroupParams, voter: str, cid: str) -> list[BallotEntry]:
    doc = snap["chains"][f"{voter}/{cid}"]
    return [BallotEntry.from_dict(group, e) for e in doc["entries"]]


def open_eligible(snap: dict, voter: str) -> list[str]:
    out = []
    for cid, col in snap["collections"].items():
        if col["status"] != "Open":
            continue
        if voter in snap["whitelists"].get(cid, {}).get("eligible", []):
            out.append(cid)
    return sorted(out)


def _chain_key_epoch(
    group: GroupParams, entry: BallotEntry, audit_sks: list[int | None]
) -> tuple[int | None, int | None]:
    """Which audit-key epoch the chain's audit ciphertext currently lives
    under, found by trial decryption. Returns (epoch, plaintext); (None, None)
    when no held key decodes it (lost keys, or a corrupted ciphertext)."""
    for epoch in range(min(entry.epoch, len(audit_sks) - 1), -1, -1):
        sk = audit_sks[epoch]
        if sk is None:
            continue
        try:
            value = decrypt(group, sk, entry.cv, 1)
        except DecodeOutOfRange:
            continue
        return epoch, value
    return None, None


# ---------------------------------------------------------------------------
# participation


def _build_entries(
    group: GroupParams,
    snap: dict,
    voter: str,
    choices: set[str],
    origin: str,
    rng: Random | None,
    audit_sks: list[int | None] | None,
) -> dict[str, dict]:
    """One new entry per open eligible collection: sign branch for choices,
    carry branch for everything else; all bound to the snapshot head."""
    head = snap["head"]
    record = snap["voters"][voter]
    history = tuple(group.elem_from_hex(pk) for pk, _ in record["audit_keys"])
    epoch = len(history) - 1
    eligible = open_eligible(snap, voter)
    if not eligible:
        raise ProtocolError("NOTHING_OPEN", f"{voter} has no open eligible collections")
    bad = sorted(choices - set(eligible))
    if bad:
        raise ProtocolError("CHOICE_NOT_ELIGIBLE", f"not open/eligible: {bad}")
    entries = {}
    for cid in eligible:
        chain_docs = snap["chains"][f"{voter}/{cid}"]["entries"]
        prev = BallotEntry.from_dict(group, chain_docs[-1])
        pk_t = group.elem_from_hex(snap["collections"][cid]["pk_t"])
        r_t, r_v = group.rand_scalar(rng), group.rand_scalar(rng)
        if cid in choices:
            branch, carry_epoch = SIGN, None
            next_ct = encrypt(group, pk_t, 1, r_t)
            next_cv = encrypt(group, history[epoch], 1, r_v)
        else:
            branch = CARRY
            if len(history) == 1:
                carry_epoch = 0  # no rotation has happened; no need to probe
            elif audit_sks is not None:
                carry_epoch, _ = _chain_key_epoch(group, prev, audit_sks)
                if carry_epoch is None:
                    carry_epoch = prev.epoch
            else:
                # The hybrid channel holds no audit keys, so after a rotation
                # it cannot tell which epoch's key the chain is under. Re-
                # randomizing with zero audit-side randomness is a valid carry
                # under any base and keeps the ciphertext decryptable for the
                # voter; the tally side still gets fresh randomness.
                carry_epoch = prev.epoch
                r_v = 0
            next_ct = rerand(group, pk_t, prev.ct, r_t)
            next_cv = rerand(group, history[carry_epoch], prev.cv, r_v)
        stmt = TransitionStatement(
            pk_t=pk_t,
            pk_v_history=history,
            prev_ct=prev.ct,
            prev_cv=prev.cv,
            next_ct=next_ct,
            next_cv=next_cv,
        )
        ctx = ProofContext(
            collection=cid,
            voter=voter,
            index=len(chain_docs),
            prev_digest=prev.digest(group),
            bound_digest=head,
        )
        proof = prove_transition(group, stmt, branch, (r_t, r_v), ctx, rng, carry_epoch=carry_epoch)
        entries[cid] = BallotEntry(
            ct=next_ct,
            cv=next_cv,
            proof_hex=proof.to_hex(group),
            origin=origin,
            epoch=epoch,
            bound=head,
        ).to_dict(group)
    return entries


def build_update(
    secrets: VoterSecrets, snap: dict, choices: set[str], rng: Random | None = None
) -> dict:
    """The participation device's update: sign the chosen collections, carry
    the rest, sign the whole set under the voter's auth key."""
    group = _snap_group(snap)
    entries = _build_entries(
        group, snap, secrets.voter, set(choices), ORIGIN_VOTER, rng, secrets.audit_sks
    )
    payload = {"voter": secrets.voter, "bound": snap["head"], "entries": entries}
    return make_envelope(UPDATE_SET, payload, [(secrets.voter, secrets.auth)])


def hc_submit(
    hc_key: SigKey, snap: dict, voter: str, collection: str, rng: Random | None = None
) -> tuple[dict, HCEvidence]:
    """The hybrid channel runs the same participation protocol on the voter's
    behalf and emits evidence for the talliers."""
    group = _snap_group(snap)
    entries = _build_entries(group, snap, voter, {collection}, ORIGIN_HC, rng, None)
    payload = {"voter": voter, "bound": snap["head"], "entries": entries}
    envelope = make_envelope(UPDATE_SET, payload, [(HC_ID, hc_key)])
    entry_index = len(snap["chains"][f"{voter}/{collection}"]["entries"])
    evidence = HCEvidence(
        voter=voter,
        collection=collection,
        entry_index=entry_index,
        blob_digest=sha256_hex(
            pack_fields([b"hc-declaration", voter.encode(), collection.encode(), bytes.fromhex(snap["head"])])
        ),
    )
    return envelope, evidence


def roll_mutate(roll_key: SigKey, collection: str, op: str, voter: str) -> dict:
    payload = {"collection": collection, "op": op, "voter": voter}
    return make_envelope(WHITELIST_MUTATION, payload, [(ROLL_ID, roll_key)])


# ---------------------------------------------------------------------------
# individual verification (audit device)


@dataclass
class AuditOutcome:
    voter: str
    head: str
    collections: dict[str, dict]

    def to_doc(self) -> dict:
        return {"voter": self.voter, "head": self.head, "collections": self.collections}


def individual_verify(secrets: VoterSecrets, snap: dict) -> AuditOutcome:
    """Decrypt each chain's last audit-side ciphertext and re-verify the chain.

    Entries that predate a key rotation stay under the old audit key; they are
    decrypted with the matching historical key. If that key is lost the chain
    is reported unverifiable-but-unchanged, which the verified proof chain
    justifies.
    """
    group = _snap_group(snap)
    voter = secrets.voter
    record = snap["voters"][voter]
    history = tuple(group.elem_from_hex(pk) for pk, _ in record["audit_keys"])
    collections: dict[str, dict] = {}
    for key, doc in sorted(snap["chains"].items()):
        vid, _, cid = key.partition("/")
        if vid != voter:
            continue
        entries = [BallotEntry.from_dict(group, e) for e in doc["entries"]]
        pk_t = group.elem_from_hex(snap["collections"][cid]["pk_t"])
        findings = verify_chain(group, pk_t, history, voter, cid, entries)
        _, value = _chain_key_epoch(group, entries[-1], secrets.audit_sks)
        if value == 1:
            status = SIGNED
        elif value == 0:
            status = NOT_SIGNED
        else:
            status = UNVERIFIABLE
        collections[cid] = {
            "status": status,
            "chain_valid": not findings,
            "origin_hc": any(e.origin == ORIGIN_HC for e in entries),
            "entries": len(entries),
        }
    return AuditOutcome(voter=voter, head=snap["head"], collections=collections)


# ---------------------------------------------------------------------------
# universal verification (any party)


def universal_verify(events: list[dict]) -> dict:
    """Replay the full log, re-running every validation; returns a report."""
    state, findings = replay_events(events)
    return {
        "ok": not findings,
        "findings": findings,
        "head": state.head if state is not None else None,
        "events": len(events),
    }
