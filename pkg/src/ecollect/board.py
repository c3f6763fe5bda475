"""The append-only bulletin board: a deterministic event-sourced validator.

The board accepts signed envelopes, validates them against the current state
(signatures, whitelists, chain proofs, tally proofs), and appends accepted
events to a hash-chained log. The materialized state is a pure fold over the
log: two replicas replaying the same lines agree bit-exactly, which is the
hook for distributing the board later.

Validation never consumes secrets or randomness other than a DRBG seeded from
public data (initial ballots), so any party can re-run it. ``replay_events``
does exactly that and reports findings instead of raising, which is what the
universal verification is built on.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from random import Random

from .encoding import (
    ZERO_DIGEST,
    canonical_bytes,
    canonical_json,
    is_digest,
    pack_fields,
    sha256_hex,
    u64,
)
from .errors import (
    BAD_SIGNATURE,
    CHAIN_EXISTS,
    CLOSED_COLLECTION,
    DUPLICATE_COLLECTION,
    DUPLICATE_REGISTRATION,
    INCOMPLETE_COVER,
    INVALID_PROOF,
    INVALID_TALLY,
    FROZEN_CHAIN,
    MALFORMED,
    MISSING_TALLIER_SIGNATURE,
    STALE_SNAPSHOT,
    UNKNOWN_COLLECTION,
    UNKNOWN_VERSION,
    UNKNOWN_VOTER,
    Malformed,
    Rejected,
)
from .groups import Ciphertext, GroupParams, ct_add, dlog_decode, encrypt, get_group
from .proofs import (
    DleqProof,
    EncPairProof,
    ProofContext,
    SchnorrProof,
    TransitionProof,
    TransitionStatement,
    prove_enc_pair,
    verify_dleq,
    verify_enc_pair,
    verify_transition,
)
from .authority import verify_share
from .signing import verify_sig

WIRE_VERSION = 1

GENESIS = "genesis"
REGISTER_VOTER = "register_voter"
OPEN_COLLECTION = "open_collection"
WHITELIST_MUTATION = "whitelist_mutation"
UPDATE_SET = "update_set"
CLOSE_COLLECTION = "close_collection"
TALLY_RESULT = "tally_result"

EVENT_TYPES = (
    GENESIS,
    REGISTER_VOTER,
    OPEN_COLLECTION,
    WHITELIST_MUTATION,
    UPDATE_SET,
    CLOSE_COLLECTION,
    TALLY_RESULT,
)

ORIGIN_BOARD = "Board"
ORIGIN_VOTER = "Voter"
ORIGIN_HC = "HC"

ROLL_ID = "roll"
HC_ID = "hc"
_RESERVED_IDS = {ROLL_ID, HC_ID, ""}

_ID_RE = re.compile(r"^[A-Za-z0-9_.:-]{1,64}$")


def valid_id(value) -> bool:
    return isinstance(value, str) and value not in _RESERVED_IDS and bool(_ID_RE.match(value))


def envelope_sign_bytes(envelope: dict) -> bytes:
    """The bytes every signature covers: version, type, and payload."""
    return canonical_bytes(
        {
            "payload": envelope["payload"],
            "type": envelope["type"],
            "version": envelope["version"],
        }
    )


def make_envelope(etype: str, payload: dict, signers: list) -> dict:
    """Assemble and sign an envelope; ``signers`` is a list of (id, SigKey)."""
    env = {"version": WIRE_VERSION, "type": etype, "payload": payload, "signatures": {}}
    data = envelope_sign_bytes(env)
    for signer_id, key in signers:
        env["signatures"][signer_id] = key.sign(data)
    return env


def event_digest(event: dict) -> str:
    body = {k: v for k, v in event.items() if k != "digest"}
    return sha256_hex(canonical_bytes(body))


# ---------------------------------------------------------------------------
# materialized state


@dataclass(frozen=True)
class BallotEntry:
    ct: Ciphertext
    cv: Ciphertext
    proof_hex: str
    origin: str
    epoch: int  # audit-key epoch active when the entry was created
    bound: str  # board head digest the entry was built against

    def to_dict(self, group: GroupParams) -> dict:
        return {
            "ct": self.ct.as_dict(group),
            "cv": self.cv.as_dict(group),
            "proof": self.proof_hex,
            "origin": self.origin,
            "epoch": self.epoch,
            "bound": self.bound,
        }

    @staticmethod
    def from_dict(group: GroupParams, doc: dict) -> "BallotEntry":
        if not isinstance(doc, dict) or set(doc) != {"ct", "cv", "proof", "origin", "epoch", "bound"}:
            raise Malformed("ballot entry must have fields ct, cv, proof, origin, epoch, bound")
        if doc["origin"] not in (ORIGIN_BOARD, ORIGIN_VOTER, ORIGIN_HC):
            raise Malformed("bad entry origin")
        if not isinstance(doc["epoch"], int) or doc["epoch"] < 0:
            raise Malformed("bad entry epoch")
        if not is_digest(doc["bound"]):
            raise Malformed("bad entry bound digest")
        if not isinstance(doc["proof"], str):
            raise Malformed("bad entry proof")
        return BallotEntry(
            ct=Ciphertext.from_dict(group, doc["ct"]),
            cv=Ciphertext.from_dict(group, doc["cv"]),
            proof_hex=doc["proof"],
            origin=doc["origin"],
            epoch=doc["epoch"],
            bound=doc["bound"],
        )

    def digest(self, group: GroupParams) -> str:
        return sha256_hex(canonical_bytes(self.to_dict(group)))


@dataclass
class Collection:
    id: str
    title: str
    pk_t: int
    status: str  # "Open" | "Closed"
    opened_at: int
    closed_at: int | None
    shares_pub: dict[str, int]


@dataclass
class VoterRecord:
    id: str
    auth_key: str
    audit_keys: list[tuple[int, int]]  # (pk_v, registered-at event index)

    @property
    def active_epoch(self) -> int:
        return len(self.audit_keys) - 1

    def key_history(self) -> tuple[int, ...]:
        return tuple(pk for pk, _ in self.audit_keys)


@dataclass
class Whitelist:
    collection: str
    eligible: set[str] = field(default_factory=set)
    history: list[tuple[str, str, int]] = field(default_factory=list)  # (op, voter, index)


@dataclass
class BallotChain:
    voter: str
    collection: str
    entries: list[BallotEntry] = field(default_factory=list)
    frozen: bool = False


class BoardState:
    """Pure fold of the event log; all mutation goes through apply_envelope."""

    def __init__(self, genesis_payload: dict):
        self._check_genesis(genesis_payload)
        self.group: GroupParams = get_group(genesis_payload["group"])
        self.talliers: dict[str, str] = dict(genesis_payload["talliers"])
        self.roll_key: str = genesis_payload["roll_key"]
        self.hc_key: str = genesis_payload["hc_key"]
        self.collections: dict[str, Collection] = {}
        self.voters: dict[str, VoterRecord] = {}
        self.whitelists: dict[str, Whitelist] = {}
        self.chains: dict[tuple[str, str], BallotChain] = {}
        self.tallies: dict[str, list[dict]] = {}
        genesis_event = {
            "version": WIRE_VERSION,
            "type": GENESIS,
            "payload": genesis_payload,
            "signatures": {},
            "index": 0,
            "prev": ZERO_DIGEST,
        }
        genesis_event["digest"] = event_digest(genesis_event)
        self.head: str = genesis_event["digest"]
        self.next_index: int = 1
        self.genesis_event = genesis_event

    @staticmethod
    def _check_genesis(payload) -> None:
        if not isinstance(payload, dict) or set(payload) != {"group", "talliers", "roll_key", "hc_key"}:
            raise Malformed("genesis must have fields group, talliers, roll_key, hc_key")
        get_group(payload["group"])
        talliers = payload["talliers"]
        if not isinstance(talliers, dict) or not talliers:
            raise Malformed("tallier roster must be a non-empty object")
        for tid, key in talliers.items():
            if not valid_id(tid) or not isinstance(key, str) or len(key) != 64:
                raise Malformed("bad tallier roster entry")
        for k in ("roll_key", "hc_key"):
            if not isinstance(payload[k], str) or len(payload[k]) != 64:
                raise Malformed(f"bad {k}")

    # -- queries ------------------------------------------------------------

    def required_cover(self, voter_id: str) -> list[str]:
        """Open collections the voter is currently eligible for, sorted."""
        out = []
        for cid, col in self.collections.items():
            if col.status != "Open":
                continue
            wl = self.whitelists.get(cid)
            if wl and voter_id in wl.eligible:
                out.append(cid)
        return sorted(out)

    def state_digest(self) -> str:
        return sha256_hex(canonical_bytes(self.snapshot_doc(chains="full")))

    def snapshot_doc(self, chains: str = "lengths") -> dict:
        """Point-in-time public view. ``chains``: 'none' | 'lengths' | 'full'."""
        doc = {
            "head": self.head,
            "epoch": self.next_index,
            "group": self.group.name,
            "talliers": dict(sorted(self.talliers.items())),
            "roll_key": self.roll_key,
            "hc_key": self.hc_key,
            "collections": {
                cid: {
                    "title": c.title,
                    "pk_t": self.group.elem_hex(c.pk_t),
                    "status": c.status,
                    "opened_at": c.opened_at,
                    "closed_at": c.closed_at,
                    "shares": {t: self.group.elem_hex(y) for t, y in sorted(c.shares_pub.items())},
                }
                for cid, c in sorted(self.collections.items())
            },
            "voters": {
                vid: {
                    "auth_key": v.auth_key,
                    "audit_keys": [[self.group.elem_hex(pk), idx] for pk, idx in v.audit_keys],
                }
                for vid, v in sorted(self.voters.items())
            },
            "whitelists": {
                cid: {
                    "eligible": sorted(wl.eligible),
                    "history": [[op, vid, idx] for op, vid, idx in wl.history],
                }
                for cid, wl in sorted(self.whitelists.items())
            },
            "tallies": {cid: list(items) for cid, items in sorted(self.tallies.items())},
        }
        if chains == "lengths":
            doc["chains"] = {
                f"{vid}/{cid}": {"entries": len(ch.entries), "frozen": ch.frozen}
                for (vid, cid), ch in sorted(self.chains.items())
            }
        elif chains == "full":
            doc["chains"] = {
                f"{vid}/{cid}": {
                    "entries": [e.to_dict(self.group) for e in ch.entries],
                    "frozen": ch.frozen,
                }
                for (vid, cid), ch in sorted(self.chains.items())
            }
        return doc

    def chain_doc(self, voter_id: str, collection_id: str) -> dict:
        chain = self.chains.get((voter_id, collection_id))
        if chain is None:
            raise Rejected(UNKNOWN_VOTER, f"no ballot chain {voter_id}/{collection_id}")
        return {
            "head": self.head,
            "voter": voter_id,
            "collection": collection_id,
            "frozen": chain.frozen,
            "entries": [e.to_dict(self.group) for e in chain.entries],
        }

    # -- application --------------------------------------------------------

    def apply_envelope(self, envelope) -> dict:
        """Validate and apply one envelope; returns the appended event."""
        self._check_envelope(envelope)
        etype = envelope["type"]
        payload = envelope["payload"]
        signatures = envelope["signatures"]
        if etype == GENESIS:
            raise Rejected(MALFORMED, "genesis is only valid at index 0")
        handler = {
            REGISTER_VOTER: self._apply_register_voter,
            OPEN_COLLECTION: self._apply_open_collection,
            WHITELIST_MUTATION: self._apply_whitelist_mutation,
            UPDATE_SET: self._apply_update_set,
            CLOSE_COLLECTION: self._apply_close_collection,
            TALLY_RESULT: self._apply_tally_result,
        }[etype]
        sign_data = envelope_sign_bytes(envelope)
        mutate = handler(payload, signatures, sign_data)
        event = {
            "version": WIRE_VERSION,
            "type": etype,
            "payload": payload,
            "signatures": signatures,
            "index": self.next_index,
            "prev": self.head,
        }
        event["digest"] = event_digest(event)
        mutate(self.next_index)
        self.head = event["digest"]
        self.next_index += 1
        return event

    def _check_envelope(self, envelope) -> None:
        if not isinstance(envelope, dict) or set(envelope) != {
            "version",
            "type",
            "payload",
            "signatures",
        }:
            raise Rejected(MALFORMED, "envelope must have version, type, payload, signatures")
        if envelope["version"] != WIRE_VERSION:
            raise Rejected(UNKNOWN_VERSION, f"unsupported version {envelope['version']!r}")
        if envelope["type"] not in EVENT_TYPES:
            raise Rejected(MALFORMED, f"unknown message type {envelope['type']!r}")
        if not isinstance(envelope["payload"], dict):
            raise Rejected(MALFORMED, "payload must be an object")
        sigs = envelope["signatures"]
        if not isinstance(sigs, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in sigs.items()
        ):
            raise Rejected(MALFORMED, "signatures must map signer ids to hex")
        try:
            canonical_bytes(envelope)
        except ValueError as exc:
            raise Rejected(MALFORMED, str(exc)) from None

    def _require_tallier_cosign(self, signatures: dict, sign_data: bytes) -> None:
        for tid, key in self.talliers.items():
            sig = signatures.get(tid)
            if sig is None:
                raise Rejected(MISSING_TALLIER_SIGNATURE, f"missing signature from {tid}")
            if not verify_sig(key, sign_data, sig):
                raise Rejected(BAD_SIGNATURE, f"bad signature from {tid}")
        extra = set(signatures) - set(self.talliers)
        if extra:
            raise Rejected(MALFORMED, f"unexpected signers {sorted(extra)}")

    def _require_single_sig(self, signatures: dict, signer: str, key: str, sign_data: bytes) -> None:
        if set(signatures) != {signer}:
            raise Rejected(BAD_SIGNATURE, f"expected exactly one signature from {signer}")
        if not verify_sig(key, sign_data, signatures[signer]):
            raise Rejected(BAD_SIGNATURE, f"bad signature from {signer}")

    # -- voters ---------------------------------------------------------

    def _apply_register_voter(self, payload, signatures, sign_data):
        allowed = {"voter", "auth_key", "audit_key"}
        if not isinstance(payload, dict) or not set(payload) <= allowed or "voter" not in payload or "audit_key" not in payload:
            raise Rejected(MALFORMED, "registration needs voter, audit_key, optional auth_key")
        vid = payload["voter"]
        if not valid_id(vid) or vid in self.talliers:
            raise Rejected(MALFORMED, "bad voter id")
        try:
            pk_v = self.group.elem_from_hex(payload["audit_key"])
        except Malformed as exc:
            raise Rejected(MALFORMED, f"bad audit key: {exc}") from None

        record = self.voters.get(vid)
        if record is None:
            auth_key = payload.get("auth_key")
            if not isinstance(auth_key, str) or len(auth_key) != 64:
                raise Rejected(MALFORMED, "registration requires a 32-byte auth key")
            self._require_single_sig(signatures, vid, auth_key, sign_data)

            def mutate(index: int, vid=vid, auth_key=auth_key, pk_v=pk_v):
                self.voters[vid] = VoterRecord(id=vid, auth_key=auth_key, audit_keys=[(pk_v, index)])
                for cid, wl in self.whitelists.items():
                    if vid in wl.eligible and (vid, cid) not in self.chains:
                        self._init_chain(vid, cid)

            return mutate

        # key rotation extends the audit-key history; the auth key is fixed
        if "auth_key" in payload and payload["auth_key"] != record.auth_key:
            raise Rejected(MALFORMED, "auth key cannot change on rotation")
        self._require_single_sig(signatures, vid, record.auth_key, sign_data)
        if pk_v == record.audit_keys[-1][0]:
            raise Rejected(DUPLICATE_REGISTRATION, "active audit key re-registered verbatim")

        def mutate(index: int, record=record, pk_v=pk_v):
            record.audit_keys.append((pk_v, index))

        return mutate

    # -- collections ------------------------------------------------------

    def _apply_open_collection(self, payload, signatures, sign_data):
        if not isinstance(payload, dict) or set(payload) != {"collection", "title", "pk_t", "shares"}:
            raise Rejected(MALFORMED, "open needs collection, title, pk_t, shares")
        cid = payload["collection"]
        if not valid_id(cid):
            raise Rejected(MALFORMED, "bad collection id")
        if cid in self.collections:
            raise Rejected(DUPLICATE_COLLECTION, f"collection {cid} already exists")
        title = payload["title"]
        if not isinstance(title, str) or len(title) > 200:
            raise Rejected(MALFORMED, "bad title")
        self._require_tallier_cosign(signatures, sign_data)
        shares = payload["shares"]
        if not isinstance(shares, dict) or set(shares) != set(self.talliers):
            raise Rejected(MALFORMED, "share set must match the tallier roster")
        shares_pub = {}
        product = 1
        for tid in sorted(shares):
            doc = shares[tid]
            if not isinstance(doc, dict) or set(doc) != {"y", "proof"}:
                raise Rejected(MALFORMED, "each share needs y and proof")
            try:
                y = self.group.elem_from_hex(doc["y"])
                proof = SchnorrProof.from_hex(self.group, doc["proof"])
            except (Malformed, ValueError) as exc:
                raise Rejected(MALFORMED, f"bad share encoding: {exc}") from None
            if not verify_share(self.group, tid, y, proof, collection_hint=cid):
                raise Rejected(INVALID_PROOF, f"possession proof of {tid} failed")
            shares_pub[tid] = y
            product = self.group.mul(product, y)
        try:
            pk_t = self.group.elem_from_hex(payload["pk_t"])
        except Malformed as exc:
            raise Rejected(MALFORMED, f"bad pk_t: {exc}") from None
        if pk_t != product:
            raise Rejected(INVALID_PROOF, "pk_t is not the product of the shares")

        def mutate(index: int):
            self.collections[cid] = Collection(
                id=cid,
                title=title,
                pk_t=pk_t,
                status="Open",
                opened_at=index,
                closed_at=None,
                shares_pub=shares_pub,
            )
            self.whitelists[cid] = Whitelist(collection=cid)

        return mutate

    def _apply_close_collection(self, payload, signatures, sign_data):
        if not isinstance(payload, dict) or set(payload) != {"collection"}:
            raise Rejected(MALFORMED, "close needs collection")
        cid = payload["collection"]
        col = self.collections.get(cid)
        if col is None:
            raise Rejected(UNKNOWN_COLLECTION, f"no collection {cid}")
        if col.status != "Open":
            raise Rejected(CLOSED_COLLECTION, f"collection {cid} is closed")
        self._require_tallier_cosign(signatures, sign_data)

        def mutate(index: int):
            col.status = "Closed"
            col.closed_at = index

        return mutate

    # -- whitelists -------------------------------------------------------

    def _apply_whitelist_mutation(self, payload, signatures, sign_data):
        if not isinstance(payload, dict) or set(payload) != {"collection", "op", "voter"}:
            raise Rejected(MALFORMED, "mutation needs collection, op, voter")
        cid, op, vid = payload["collection"], payload["op"], payload["voter"]
        if cid not in self.collections:
            raise Rejected(UNKNOWN_COLLECTION, f"no collection {cid}")
        if not valid_id(vid):
            raise Rejected(MALFORMED, "bad voter id")
        if op not in ("add", "remove"):
            raise Rejected(MALFORMED, "op must be add or remove")
        self._require_single_sig(signatures, ROLL_ID, self.roll_key, sign_data)
        wl = self.whitelists[cid]
        if op == "add" and vid in wl.eligible:
            raise Rejected(MALFORMED, f"{vid} already whitelisted for {cid}")
        if op == "remove" and vid not in wl.eligible:
            raise Rejected(UNKNOWN_VOTER, f"{vid} not whitelisted for {cid}")

        def mutate(index: int):
            wl.history.append((op, vid, index))
            chain = self.chains.get((vid, cid))
            if op == "add":
                wl.eligible.add(vid)
                if chain is not None:
                    chain.frozen = False
                elif vid in self.voters:
                    self._init_chain(vid, cid)
            else:
                wl.eligible.discard(vid)
                if chain is not None:
                    chain.frozen = True

        return mutate

    # -- ballots ----------------------------------------------------------

    def _init_chain(self, vid: str, cid: str) -> None:
        """Deterministic initial ballot: trivial encryptions of 0 plus a proof
        whose nonces come from a DRBG over public data, so every replica
        recomputes identical bytes."""
        if (vid, cid) in self.chains:
            raise Rejected(CHAIN_EXISTS, f"chain {vid}/{cid} already exists")
        group = self.group
        record = self.voters[vid]
        col = self.collections[cid]
        epoch = record.active_epoch
        pk_v = record.audit_keys[epoch][0]
        bound = self.head
        ctx = ProofContext(
            collection=cid, voter=vid, index=0, prev_digest=ZERO_DIGEST, bound_digest=bound
        )
        seed = sha256_hex(
            pack_fields(
                [b"init-ballot", group.name.encode(), vid.encode(), cid.encode(), bytes.fromhex(bound), u64(epoch)]
            )
        )
        drbg = Random(int(seed, 16))
        proof = prove_enc_pair(group, col.pk_t, pk_v, 0, 0, 0, ctx, drbg)
        entry = BallotEntry(
            ct=encrypt(group, col.pk_t, 0, 0),
            cv=encrypt(group, pk_v, 0, 0),
            proof_hex=proof.to_hex(group),
            origin=ORIGIN_BOARD,
            epoch=epoch,
            bound=bound,
        )
        self.chains[(vid, cid)] = BallotChain(voter=vid, collection=cid, entries=[entry])

    def init_ballots(self, vid: str, collection_ids: list[str]) -> None:
        """Create initial ballots; the voter must be registered and whitelisted."""
        if vid not in self.voters:
            raise Rejected(UNKNOWN_VOTER, f"{vid} is not registered")
        for cid in collection_ids:
            wl = self.whitelists.get(cid)
            if wl is None:
                raise Rejected(UNKNOWN_COLLECTION, f"no collection {cid}")
            if vid not in wl.eligible:
                raise Rejected(UNKNOWN_VOTER, f"{vid} not whitelisted for {cid}")
            self._init_chain(vid, cid)

    def _apply_update_set(self, payload, signatures, sign_data):
        if not isinstance(payload, dict) or set(payload) != {"voter", "bound", "entries"}:
            raise Rejected(MALFORMED, "update needs voter, bound, entries")
        vid = payload["voter"]
        record = self.voters.get(vid)
        if record is None:
            raise Rejected(UNKNOWN_VOTER, f"{vid} is not registered")
        if list(signatures) == [HC_ID]:
            origin = ORIGIN_HC
            self._require_single_sig(signatures, HC_ID, self.hc_key, sign_data)
        else:
            origin = ORIGIN_VOTER
            self._require_single_sig(signatures, vid, record.auth_key, sign_data)
        if payload["bound"] != self.head:
            raise Rejected(
                STALE_SNAPSHOT,
                "update built against a superseded board head",
                head=self.head,
            )
        entries_doc = payload["entries"]
        if not isinstance(entries_doc, dict):
            raise Rejected(MALFORMED, "entries must be an object")
        required = self.required_cover(vid)
        got = sorted(entries_doc)
        if got != required:
            for cid in got:
                chain = self.chains.get((vid, cid))
                if chain is not None and chain.frozen:
                    raise Rejected(FROZEN_CHAIN, f"chain {vid}/{cid} is frozen")
            raise Rejected(
                INCOMPLETE_COVER,
                f"update must cover exactly {required}, got {got}",
            )
        if not required:
            raise Rejected(MALFORMED, "voter has no open eligible collections")

        history = record.key_history()
        epoch = record.active_epoch
        validated: list[tuple[str, BallotEntry]] = []
        for cid in required:
            doc = entries_doc[cid]
            try:
                entry = BallotEntry.from_dict(self.group, doc)
            except Malformed as exc:
                raise Rejected(MALFORMED, f"bad entry for {cid}: {exc}") from None
            if entry.origin != origin:
                raise Rejected(MALFORMED, f"entry origin must be {origin}")
            if entry.bound != payload["bound"]:
                raise Rejected(MALFORMED, "entry bound differs from update bound")
            if entry.epoch != epoch:
                raise Rejected(INVALID_PROOF, f"entry epoch must be the active epoch {epoch}")
            chain = self.chains[(vid, cid)]
            prev = chain.entries[-1]
            col = self.collections[cid]
            stmt = TransitionStatement(
                pk_t=col.pk_t,
                pk_v_history=history,
                prev_ct=prev.ct,
                prev_cv=prev.cv,
                next_ct=entry.ct,
                next_cv=entry.cv,
            )
            ctx = ProofContext(
                collection=cid,
                voter=vid,
                index=len(chain.entries),
                prev_digest=prev.digest(self.group),
                bound_digest=payload["bound"],
            )
            try:
                proof = TransitionProof.from_hex(self.group, entry.proof_hex)
            except (Malformed, ValueError) as exc:
                raise Rejected(INVALID_PROOF, f"bad proof encoding for {cid}: {exc}") from None
            if not verify_transition(self.group, stmt, proof, ctx):
                raise Rejected(INVALID_PROOF, f"transition proof for {cid} failed")
            validated.append((cid, entry))

        def mutate(index: int):
            for cid, entry in validated:
                self.chains[(vid, cid)].entries.append(entry)

        return mutate

    # -- tallies ----------------------------------------------------------

    def _apply_tally_result(self, payload, signatures, sign_data):
        keys = {"collection", "bound", "aggregate", "count", "voters", "voter_count", "parts"}
        if not isinstance(payload, dict) or set(payload) != keys:
            raise Rejected(MALFORMED, f"tally result needs {sorted(keys)}")
        cid = payload["collection"]
        col = self.collections.get(cid)
        if col is None:
            raise Rejected(UNKNOWN_COLLECTION, f"no collection {cid}")
        signer = list(signatures)
        if len(signer) != 1 or signer[0] not in self.talliers:
            raise Rejected(BAD_SIGNATURE, "tally results are submitted by one tallier")
        self._require_single_sig(signatures, signer[0], self.talliers[signer[0]], sign_data)
        if payload["bound"] != self.head:
            raise Rejected(STALE_SNAPSHOT, "tally computed on a superseded head", head=self.head)
        chains = {v: ch for (v, c), ch in self.chains.items() if c == cid}
        voters = payload["voters"]
        if voters is None:
            subset = sorted(chains)
        else:
            if not isinstance(voters, list) or not all(isinstance(v, str) for v in voters):
                raise Rejected(MALFORMED, "voters must be null or a list of ids")
            subset = sorted(set(voters))
            for v in subset:
                if v not in chains:
                    raise Rejected(INVALID_TALLY, f"{v} has no ballot for {cid}")
        if payload["voter_count"] != len(subset):
            raise Rejected(INVALID_TALLY, "voter_count mismatch")
        try:
            agg = Ciphertext.from_dict(self.group, payload["aggregate"])
        except Malformed as exc:
            raise Rejected(MALFORMED, f"bad aggregate: {exc}") from None
        expected = encrypt(self.group, 1, 0, 0)
        for v in subset:
            expected = ct_add(self.group, expected, chains[v].entries[-1].ct)
        if agg != expected:
            raise Rejected(INVALID_TALLY, "aggregate does not match the published ballots")
        parts = payload["parts"]
        if not isinstance(parts, dict) or set(parts) != set(self.talliers):
            raise Rejected(INVALID_TALLY, "one partial decryption per tallier required")
        product = 1
        for tid in sorted(parts):
            doc = parts[tid]
            if not isinstance(doc, dict) or set(doc) != {"factor", "proof"}:
                raise Rejected(MALFORMED, "each part needs factor and proof")
            try:
                factor = self.group.elem_from_hex(doc["factor"])
                proof = DleqProof.from_hex(self.group, doc["proof"])
            except (Malformed, ValueError) as exc:
                raise Rejected(MALFORMED, f"bad part encoding: {exc}") from None
            context = pack_fields(
                [b"part", tid.encode(), self.group.encode_elem(agg.a), self.group.encode_elem(agg.b)]
            )
            if not verify_dleq(self.group, col.shares_pub[tid], agg.a, factor, proof, context):
                raise Rejected(INVALID_TALLY, f"partial decryption proof of {tid} failed")
            product = self.group.mul(product, factor)
        residue = self.group.mul(agg.b, self.group.inv(product))
        try:
            count = dlog_decode(self.group, residue, len(subset))
        except Exception:
            raise Rejected(INVALID_TALLY, "decryption residue out of range") from None
        if count != payload["count"]:
            raise Rejected(INVALID_TALLY, f"count is {count}, not {payload['count']}")

        def mutate(index: int):
            self.tallies.setdefault(cid, []).append(
                {
                    "index": index,
                    "count": payload["count"],
                    "voter_count": payload["voter_count"],
                    "voters": payload["voters"],
                    "bound": payload["bound"],
                }
            )

        return mutate


# ---------------------------------------------------------------------------
# chain verification helpers (audit device / universal verification)


def verify_chain(
    group: GroupParams,
    pk_t: int,
    record_history: tuple[int, ...],
    voter_id: str,
    collection_id: str,
    entries: list[BallotEntry],
) -> list[str]:
    """Re-verify a full ballot chain; returns human-readable findings."""
    findings = []
    if not entries:
        return ["chain has no initial entry"]
    e0 = entries[0]
    if e0.epoch >= len(record_history):
        return ["initial entry epoch out of range"]
    pk_v0 = record_history[e0.epoch]
    if e0.ct != encrypt(group, pk_t, 0, 0) or e0.cv != encrypt(group, pk_v0, 0, 0):
        findings.append("initial entry is not the trivial encryption of 0")
    ctx0 = ProofContext(
        collection=collection_id,
        voter=voter_id,
        index=0,
        prev_digest=ZERO_DIGEST,
        bound_digest=e0.bound,
    )
    try:
        proof0 = EncPairProof.from_hex(group, e0.proof_hex)
        ok = verify_enc_pair(group, pk_t, pk_v0, 0, e0.ct, e0.cv, proof0, ctx0)
    except (Malformed, ValueError):
        ok = False
    if not ok:
        findings.append("initial entry proof failed")
    last_epoch = e0.epoch
    for i in range(1, len(entries)):
        prev, entry = entries[i - 1], entries[i]
        if entry.epoch < last_epoch or entry.epoch >= len(record_history):
            findings.append(f"entry {i}: bad key epoch")
            continue
        last_epoch = entry.epoch
        stmt = TransitionStatement(
            pk_t=pk_t,
            pk_v_history=record_history[: entry.epoch + 1],
            prev_ct=prev.ct,
            prev_cv=prev.cv,
            next_ct=entry.ct,
            next_cv=entry.cv,
        )
        ctx = ProofContext(
            collection=collection_id,
            voter=voter_id,
            index=i,
            prev_digest=prev.digest(group),
            bound_digest=entry.bound,
        )
        try:
            proof = TransitionProof.from_hex(group, entry.proof_hex)
            ok = verify_transition(group, stmt, proof, ctx)
        except (Malformed, ValueError):
            ok = False
        if not ok:
            findings.append(f"entry {i}: transition proof failed")
    return findings


# ---------------------------------------------------------------------------
# replay and verification


def replay_events(events: list[dict]) -> tuple[BoardState | None, list[dict]]:
    """Replay a full event log, re-running all validation.

    Returns the rebuilt state and a list of findings; an honest log yields no
    findings and a state whose head equals the last line's digest.
    """
    findings: list[dict] = []

    def finding(index, code, detail):
        findings.append({"index": index, "code": code, "detail": detail})

    if not events:
        return None, [{"index": 0, "code": MALFORMED, "detail": "empty log"}]
    state: BoardState | None = None
    prev = ZERO_DIGEST
    for i, event in enumerate(events):
        if not isinstance(event, dict) or set(event) != {
            "version",
            "type",
            "payload",
            "signatures",
            "index",
            "prev",
            "digest",
        }:
            finding(i, MALFORMED, "bad event shape")
            continue
        if event["index"] != i:
            finding(i, MALFORMED, f"index {event['index']} at position {i}")
        if event["prev"] != prev:
            finding(i, "BROKEN_CHAIN", "prev digest does not extend the log")
        if event_digest(event) != event["digest"]:
            finding(i, "BAD_DIGEST", "stored digest does not match the event bytes")
        prev = event["digest"]
        if i == 0:
            if event["type"] != GENESIS:
                finding(i, MALFORMED, "first event must be the genesis")
                return None, findings
            try:
                state = BoardState(event["payload"])
            except (Malformed, Rejected) as exc:
                finding(i, MALFORMED, f"bad genesis: {exc}")
                return None, findings
            if state.genesis_event["digest"] != event["digest"]:
                finding(i, "BAD_DIGEST", "genesis digest mismatch")
            continue
        envelope = {
            "version": event["version"],
            "type": event["type"],
            "payload": event["payload"],
            "signatures": event["signatures"],
        }
        try:
            applied = state.apply_envelope(envelope)
        except Rejected as exc:
            finding(i, exc.code, str(exc))
            continue
        if applied["digest"] != event["digest"]:
            finding(i, "EVENT_MISMATCH", "replayed event differs from the logged one")
    return state, findings


# ---------------------------------------------------------------------------
# durable log


class EventLog:
    """Append-only JSONL log; every accepted event is fsynced before the
    acknowledgment, so an acknowledged event survives a crash."""

    def __init__(self, path: str):
        self.path = path
        self.events: list[dict] = []
        if os.path.exists(path):
            self.events = self._load(path)
        self._fh = open(path, "a", encoding="utf-8")

    @staticmethod
    def _load(path: str) -> list[dict]:
        import json

        events = []
        with open(path, "rb") as fh:
            raw = fh.read()
        lines = raw.split(b"\n")
        for n, line in enumerate(lines[:-1]):
            try:
                events.append(json.loads(line))
            except ValueError:
                raise Malformed(f"corrupt log line {n}") from None
        tail = lines[-1]
        if tail:
            # no trailing newline: a torn write of an unacknowledged event.
            # Keep it if it parses (crash after write, before newline flush is
            # impossible with our single-write lines, but be permissive).
            try:
                events.append(json.loads(tail))
            except ValueError:
                pass
        return events

    def append(self, event: dict) -> None:
        line = canonical_json(event) + "\n"
        self._fh.write(line)
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self.events.append(event)

    def close(self) -> None:
        self._fh.close()
