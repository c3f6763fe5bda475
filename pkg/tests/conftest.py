"""Shared fixtures: an in-process board with talliers, roll, and HC wired up."""

import random

import pytest

from ecollect.actors import VoterSecrets, build_update, roll_mutate
from ecollect.authority import dkg
from ecollect.board import OPEN_COLLECTION, BoardState, make_envelope
from ecollect.groups import get_group
from ecollect.signing import SigKey


class Harness:
    """A board plus every authority actor, driven by one seeded RNG."""

    def __init__(self, group_name="p23", n_talliers=2, seed=1):
        self.rng = random.Random(seed)
        self.group = get_group(group_name)
        self.tallier_ids = [f"T{i + 1}" for i in range(n_talliers)]
        self.tallier_keys = {t: SigKey.generate(self.rng) for t in self.tallier_ids}
        self.roll_key = SigKey.generate(self.rng)
        self.hc_key = SigKey.generate(self.rng)
        self.board = BoardState(
            {
                "group": group_name,
                "talliers": {t: k.verify_key for t, k in self.tallier_keys.items()},
                "roll_key": self.roll_key.verify_key,
                "hc_key": self.hc_key.verify_key,
            }
        )
        self.events = [self.board.genesis_event]
        self.shares = {}  # collection id -> [TallierShare]
        self.voters = {}  # voter id -> VoterSecrets

    def submit(self, envelope):
        event = self.board.apply_envelope(envelope)
        self.events.append(event)
        return event

    def tallier_signers(self):
        return [(t, self.tallier_keys[t]) for t in self.tallier_ids]

    def open_collection(self, cid, title=None):
        pk_t, shares = dkg(self.group, self.tallier_ids, self.rng, collection_hint=cid)
        self.shares[cid] = shares
        payload = {
            "collection": cid,
            "title": title if title is not None else f"Initiative {cid}",
            "pk_t": self.group.elem_hex(pk_t),
            "shares": {
                s.tallier: {"y": self.group.elem_hex(s.public), "proof": s.proof.to_hex(self.group)}
                for s in shares
            },
        }
        return self.submit(make_envelope(OPEN_COLLECTION, payload, self.tallier_signers()))

    def close_collection(self, cid):
        from ecollect.board import CLOSE_COLLECTION

        return self.submit(
            make_envelope(CLOSE_COLLECTION, {"collection": cid}, self.tallier_signers())
        )

    def register(self, vid):
        secrets = VoterSecrets.create(vid, self.group.name, self.rng)
        self.voters[vid] = secrets
        return self.submit(secrets.registration_envelope())

    def whitelist(self, vid, cid):
        return self.submit(roll_mutate(self.roll_key, cid, "add", vid))

    def unwhitelist(self, vid, cid):
        return self.submit(roll_mutate(self.roll_key, cid, "remove", vid))

    def snapshot(self):
        return self.board.snapshot_doc(chains="full")

    def participate(self, vid, choices):
        env = build_update(self.voters[vid], self.snapshot(), set(choices), self.rng)
        return self.submit(env)


@pytest.fixture
def harness():
    h = Harness()
    return h


@pytest.fixture
def small_board():
    """Two collections, two voters, ready to participate."""
    h = Harness(seed=7)
    h.open_collection("C1")
    h.open_collection("C2")
    h.register("v1")
    h.register("v2")
    for v in ("v1", "v2"):
        for c in ("C1", "C2"):
            h.whitelist(v, c)
    return h
