"""Bulletin-board state machine: validation, atomicity, determinism, replay."""

import copy
import random

import pytest

from ecollect.actors import build_update, roll_mutate
from ecollect.board import (
    CLOSE_COLLECTION,
    UPDATE_SET,
    BallotEntry,
    BoardState,
    EventLog,
    make_envelope,
    replay_events,
)
from ecollect.errors import Rejected
from ecollect.groups import decrypt
from ecollect.signing import SigKey

from conftest import Harness


def expect_rejected(code, fn, *args, **kwargs):
    with pytest.raises(Rejected) as err:
        fn(*args, **kwargs)
    assert err.value.code == code, f"expected {code}, got {err.value.code}: {err.value}"
    return err.value


# ---------------------------------------------------------------------------
# registration and rotation


def test_register_fresh_voter(harness):
    harness.open_collection("C1")
    harness.register("v1")
    rec = harness.board.voters["v1"]
    assert len(rec.audit_keys) == 1
    # not whitelisted yet: no chain
    assert ("v1", "C1") not in harness.board.chains


def test_register_bad_signature_rejected(harness):
    h = harness
    from ecollect.actors import VoterSecrets

    secrets = VoterSecrets.create("v1", h.group.name, h.rng)
    env = secrets.registration_envelope()
    env["signatures"]["v1"] = "00" * 64
    expect_rejected("BAD_SIGNATURE", h.board.apply_envelope, env)
    assert "v1" not in h.board.voters


def test_rotation_appends_key_epoch(small_board):
    h = small_board
    secrets = h.voters["v1"]
    secrets.rotate(h.rng)
    h.submit(secrets.rotation_envelope())
    rec = h.board.voters["v1"]
    assert len(rec.audit_keys) == 2
    # subsequent updates are validated under the new epoch
    h.participate("v1", {"C1"})
    chain = h.board.chains[("v1", "C1")]
    assert chain.entries[-1].epoch == 1


def test_duplicate_registration_rejected(small_board):
    h = small_board
    secrets = h.voters["v1"]
    env = make_envelope(
        "register_voter",
        {"voter": "v1", "audit_key": h.group.elem_hex(secrets.audit_pk(0))},
        [("v1", secrets.auth)],
    )
    expect_rejected("DUPLICATE_REGISTRATION", h.board.apply_envelope, env)


# ---------------------------------------------------------------------------
# collections


def test_open_requires_all_tallier_signatures(harness):
    h = harness
    from ecollect.authority import dkg

    pk_t, shares = dkg(h.group, h.tallier_ids, h.rng, collection_hint="C1")
    payload = {
        "collection": "C1",
        "title": "t",
        "pk_t": h.group.elem_hex(pk_t),
        "shares": {
            s.tallier: {"y": h.group.elem_hex(s.public), "proof": s.proof.to_hex(h.group)}
            for s in shares
        },
    }
    env = make_envelope("open_collection", payload, h.tallier_signers()[:1])
    expect_rejected("MISSING_TALLIER_SIGNATURE", h.board.apply_envelope, env)


def test_open_duplicate_and_reopen_rejected(small_board):
    h = small_board
    expect_rejected("DUPLICATE_COLLECTION", h.open_collection, "C1")
    h.close_collection("C1")
    expect_rejected("DUPLICATE_COLLECTION", h.open_collection, "C1")  # Closed is terminal


def test_open_with_bad_possession_proof(harness):
    h = harness
    from ecollect.authority import dkg

    pk_t, shares = dkg(h.group, h.tallier_ids, h.rng, collection_hint="C1")
    docs = {
        s.tallier: {"y": h.group.elem_hex(s.public), "proof": s.proof.to_hex(h.group)}
        for s in shares
    }
    # swap one share's proof for the other's
    docs["T1"]["proof"], docs["T2"]["proof"] = docs["T2"]["proof"], docs["T1"]["proof"]
    payload = {"collection": "C1", "title": "t", "pk_t": h.group.elem_hex(pk_t), "shares": docs}
    env = make_envelope("open_collection", payload, h.tallier_signers())
    expect_rejected("INVALID_PROOF", h.board.apply_envelope, env)


def test_close_lifecycle(small_board):
    h = small_board
    h.close_collection("C1")
    assert h.board.collections["C1"].status == "Closed"
    expect_rejected("CLOSED_COLLECTION", h.close_collection, "C1")
    # updates now cover only C2
    h.participate("v1", {"C2"})
    assert len(h.board.chains[("v1", "C1")].entries) == 1
    assert len(h.board.chains[("v1", "C2")].entries) == 2


# ---------------------------------------------------------------------------
# whitelists and chain lifecycle


def test_whitelist_add_creates_initial_ballot(small_board):
    h = small_board
    chain = h.board.chains[("v1", "C1")]
    assert len(chain.entries) == 1
    e0 = chain.entries[0]
    assert e0.origin == "Board"
    assert (e0.ct.a, e0.ct.b) == (1, 1)
    assert (e0.cv.a, e0.cv.b) == (1, 1)


def test_whitelist_add_before_registration(harness):
    h = harness
    h.open_collection("C1")
    h.whitelist("v1", "C1")  # roll may list a voter who has not registered a device yet
    assert ("v1", "C1") not in h.board.chains
    h.register("v1")
    assert ("v1", "C1") in h.board.chains  # ballots appear at registration


def test_whitelist_remove_freezes_and_update_rejected(small_board):
    h = small_board
    h.participate("v1", {"C1"})
    snap = h.snapshot()
    h.unwhitelist("v1", "C1")
    assert h.board.chains[("v1", "C1")].frozen
    # an update still covering C1 (built against the stale snapshot) is rejected
    env = build_update(h.voters["v1"], snap, set(), h.rng)
    err = expect_rejected("STALE_SNAPSHOT", h.board.apply_envelope, env)
    assert err.head == h.board.head
    # even with a fresh bound, a forged cover including C1 is rejected
    env2 = build_update(h.voters["v1"], h.snapshot(), set(), h.rng)
    payload = dict(env2["payload"])
    snap_entries = build_update(h.voters["v1"], snap, set(), h.rng)["payload"]["entries"]
    payload["entries"] = {**env2["payload"]["entries"], "C1": snap_entries["C1"]}
    forged = make_envelope(UPDATE_SET, payload, [("v1", h.voters["v1"].auth)])
    expect_rejected("FROZEN_CHAIN", h.board.apply_envelope, forged)


def test_whitelist_readd_unfreezes_history_intact(small_board):
    h = small_board
    h.participate("v1", {"C1"})
    h.unwhitelist("v1", "C1")
    h.whitelist("v1", "C1")
    chain = h.board.chains[("v1", "C1")]
    assert not chain.frozen
    assert len(chain.entries) == 2  # history preserved
    h.participate("v1", set())
    assert len(h.board.chains[("v1", "C1")].entries) == 3


def test_whitelist_unknown_collection(small_board):
    env = roll_mutate(small_board.roll_key, "C9", "add", "v1")
    expect_rejected("UNKNOWN_COLLECTION", small_board.board.apply_envelope, env)


def test_whitelist_requires_roll_signature(small_board):
    h = small_board
    impostor = SigKey.generate(h.rng)
    env = make_envelope(
        "whitelist_mutation",
        {"collection": "C1", "op": "remove", "voter": "v1"},
        [("roll", impostor)],
    )
    expect_rejected("BAD_SIGNATURE", h.board.apply_envelope, env)


# ---------------------------------------------------------------------------
# update sets


def test_update_extends_every_chain_once(small_board):
    h = small_board
    h.participate("v1", {"C2"})
    for cid in ("C1", "C2"):
        assert len(h.board.chains[("v1", cid)].entries) == 2
    # the signed collection decrypts to 1 on both sides, the carried one to 0
    sk_v = h.voters["v1"].audit_sks[0]
    assert decrypt(h.group, sk_v, h.board.chains[("v1", "C2")].entries[-1].cv, 1) == 1
    assert decrypt(h.group, sk_v, h.board.chains[("v1", "C1")].entries[-1].cv, 1) == 0


def test_update_omitting_a_collection_rejected(small_board):
    h = small_board
    env = build_update(h.voters["v1"], h.snapshot(), {"C1"}, h.rng)
    payload = dict(env["payload"])
    payload["entries"] = {k: v for k, v in payload["entries"].items() if k != "C2"}
    partial = make_envelope(UPDATE_SET, payload, [("v1", h.voters["v1"].auth)])
    expect_rejected("INCOMPLETE_COVER", h.board.apply_envelope, partial)
    # nothing applied
    assert len(h.board.chains[("v1", "C1")].entries) == 1


def test_update_against_superseded_head(small_board):
    h = small_board
    snap = h.snapshot()
    first = build_update(h.voters["v1"], snap, {"C1"}, h.rng)
    second = build_update(h.voters["v2"], snap, {"C2"}, h.rng)
    h.board.apply_envelope(first)
    err = expect_rejected("STALE_SNAPSHOT", h.board.apply_envelope, second)
    assert err.head == h.board.head
    # rebuilt against the new head it lands
    rebuilt = build_update(h.voters["v2"], h.snapshot(), {"C2"}, h.rng)
    h.board.apply_envelope(rebuilt)


def test_empty_participation_is_valid(small_board):
    h = small_board
    h.participate("v1", set())
    for cid in ("C1", "C2"):
        chain = h.board.chains[("v1", cid)]
        assert len(chain.entries) == 2
        sk_v = h.voters["v1"].audit_sks[0]
        assert decrypt(h.group, sk_v, chain.entries[-1].cv, 1) == 0


def test_update_tampered_entry_rejected(small_board):
    h = small_board
    env = build_update(h.voters["v1"], h.snapshot(), {"C1"}, h.rng)
    payload = copy.deepcopy(env["payload"])
    # swap the two entries' ciphertexts: proofs no longer match
    payload["entries"]["C1"]["ct"], payload["entries"]["C2"]["ct"] = (
        payload["entries"]["C2"]["ct"],
        payload["entries"]["C1"]["ct"],
    )
    forged = make_envelope(UPDATE_SET, payload, [("v1", h.voters["v1"].auth)])
    expect_rejected("INVALID_PROOF", h.board.apply_envelope, forged)


def test_update_signed_by_wrong_voter_rejected(small_board):
    h = small_board
    env = build_update(h.voters["v1"], h.snapshot(), {"C1"}, h.rng)
    forged = make_envelope(UPDATE_SET, env["payload"], [("v1", h.voters["v2"].auth)])
    expect_rejected("BAD_SIGNATURE", h.board.apply_envelope, forged)


def test_irrevocability_once_signed_always_one(small_board):
    h = small_board
    sk_t = sum(s.secret for s in h.shares["C1"]) % h.group.q
    h.participate("v1", {"C1"})
    for _ in range(4):
        h.participate("v1", set())
        entry = h.board.chains[("v1", "C1")].entries[-1]
        assert decrypt(h.group, sk_t, entry.ct, 1) == 1
    h.participate("v1", {"C1"})  # re-signing stays at 1
    entry = h.board.chains[("v1", "C1")].entries[-1]
    assert decrypt(h.group, sk_t, entry.ct, 1) == 1


# ---------------------------------------------------------------------------
# determinism and replay


def test_replay_reproduces_state_bit_exactly(small_board):
    h = small_board
    h.participate("v1", {"C1"})
    h.participate("v2", set())
    state, findings = replay_events(h.events)
    assert findings == []
    assert state.head == h.board.head
    assert state.state_digest() == h.board.state_digest()


def test_replay_detects_tampered_ciphertext(small_board):
    h = small_board
    h.participate("v1", {"C1"})
    events = copy.deepcopy(h.events)
    # flip the tally-side ciphertext inside the update event
    entry = events[-1]["payload"]["entries"]["C1"]
    g = h.group
    from ecollect.groups import Ciphertext

    ct = Ciphertext.from_dict(g, entry["ct"])
    entry["ct"] = Ciphertext(g.mul(ct.a, g.g), ct.b).as_dict(g)
    _state, findings = replay_events(events)
    assert findings, "tampering must surface"
    codes = {f["code"] for f in findings}
    assert "BAD_DIGEST" in codes or "INVALID_PROOF" in codes


def test_replay_detects_unauthorized_whitelist_add(small_board):
    h = small_board
    events = copy.deepcopy(h.events)
    # graft a whitelist event signed by a non-roll key, with recomputed digests
    impostor = SigKey.generate(h.rng)
    env = make_envelope(
        "whitelist_mutation",
        {"collection": "C1", "op": "add", "voter": "mallory"},
        [("roll", impostor)],
    )
    from ecollect.board import event_digest

    forged = {**env, "index": len(events), "prev": events[-1]["digest"]}
    forged["digest"] = event_digest(forged)
    events.append(forged)
    _state, findings = replay_events(events)
    assert any(f["code"] == "BAD_SIGNATURE" for f in findings)


def test_initial_ballots_identical_across_replicas(small_board):
    h = small_board
    state, _ = replay_events(h.events)
    for key, chain in h.board.chains.items():
        replica = state.chains[key]
        assert chain.entries[0].to_dict(h.group) == replica.entries[0].to_dict(h.group)


# ---------------------------------------------------------------------------
# event log persistence


def test_event_log_append_and_reload(tmp_path, small_board):
    h = small_board
    path = str(tmp_path / "board.log")
    log = EventLog(path)
    for ev in h.events:
        log.append(ev)
    log.close()
    reloaded = EventLog(path)
    assert reloaded.events == h.events
    state, findings = replay_events(reloaded.events)
    assert findings == []
    assert state.head == h.board.head
    reloaded.close()


def test_event_log_recovers_from_torn_write(tmp_path, small_board):
    h = small_board
    path = str(tmp_path / "board.log")
    log = EventLog(path)
    for ev in h.events:
        log.append(ev)
    log.close()
    # simulate a crash mid-write of an unacknowledged event
    with open(path, "a", encoding="utf-8") as fh:
        fh.write('{"version": 1, "type": "upd')
    reloaded = EventLog(path)
    assert reloaded.events == h.events  # the torn tail is dropped
    reloaded.close()
