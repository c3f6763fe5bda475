"""Scripted end-to-end scenarios with an independent ground-truth oracle.

A scenario is a declarative document: logical time steps, an action script
(open/close collections, register, roll mutations, participations, hybrid
channel, tallies, audits), optional adversary directives, and an optional
privacy pair. The runner executes the script against an in-process board,
runs every scheduled audit, and emits a deterministic verdict.

The oracle never touches board or crypto code: it folds the same action
stream over plain sets and counts what the tally must say. Adversary
directives are expanded into the *effective* action stream shared by the
runner and the oracle, while audits are judged against the *intended* script,
which is how stuffing and dropping become visible.
"""

from __future__ import annotations

import copy
from random import Random

from .actors import (
    SIGNED,
    UNVERIFIABLE,
    VoterSecrets,
    build_update,
    hc_submit,
    individual_verify,
    open_eligible,
    roll_mutate,
    universal_verify,
)
from .authority import dkg, hc_audit, tally_collection
from .board import (
    CLOSE_COLLECTION,
    OPEN_COLLECTION,
    TALLY_RESULT,
    BoardState,
    event_digest,
    make_envelope,
)
from .encoding import canonical_json
from .errors import ProtocolError, Rejected
from .groups import get_group
from .signing import SigKey

MAX_RESUBMITS = 6


# ---------------------------------------------------------------------------
# scenario expansion: script + adversary -> effective / intended action streams


def _directives(scenario: dict) -> list[dict]:
    out = []
    adv = scenario.get("adversary") or {}
    for kind in ("pd_drop", "pd_stuff", "hc_stuff", "hc_drop", "roll_stuff"):
        for i, d in enumerate(adv.get(kind, [])):
            out.append({"kind": kind, "id": f"{kind}:{i}", **d})
    if adv.get("forge_tally"):
        out.append({"kind": "forge_tally", "id": "forge_tally:0"})
    return out


def expand_actions(scenario: dict) -> tuple[list[dict], list[dict]]:
    """Returns (effective, intended) action streams, both ordered and carrying
    a global sequence number. Adversary directives transform the effective
    stream only; the intended stream is the voters' view of the world."""
    directives = _directives(scenario)
    by_kind = {}
    for d in directives:
        by_kind.setdefault(d["kind"], []).append(d)

    script = sorted(enumerate(scenario["actions"]), key=lambda p: (p[1]["at"], p[0]))
    effective: list[dict] = []
    intended: list[dict] = []
    injections: dict[int, list[dict]] = {}
    for d in by_kind.get("hc_stuff", []):
        injections.setdefault(d["at"], []).append(
            {"at": d["at"], "do": "hc_sign", "voter": d["voter"], "collection": d["collection"],
             "evidence": False, "directive": d["id"]}
        )
    for d in by_kind.get("roll_stuff", []):
        injections.setdefault(d["at"], []).append(
            {"at": d["at"], "do": "register", "voter": d["voter"], "directive": d["id"]}
        )
        injections.setdefault(d["at"], []).append(
            {"at": d["at"], "do": "roll_add", "voter": d["voter"],
             "collection": d["collection"], "directive": d["id"]}
        )
        injections.setdefault(d["at"], []).append(
            {"at": d["at"], "do": "participate", "voter": d["voter"],
             "sign": [d["collection"]], "directive": d["id"]}
        )

    last_step = script[-1][1]["at"] if script else 0
    steps = sorted(set([a["at"] for _, a in script]) | set(injections) | {last_step})
    for step in steps:
        for _, action in script:
            if action["at"] != step:
                continue
            intended.append(copy.deepcopy(action))
            eff = copy.deepcopy(action)
            if action["do"] == "participate":
                signs = set(action.get("sign", []))
                for d in by_kind.get("pd_drop", []):
                    if d["voter"] == action["voter"] and d["collection"] in signs:
                        signs.discard(d["collection"])
                        eff["directive"] = d["id"]
                for d in by_kind.get("pd_stuff", []):
                    if d["voter"] == action["voter"] and d.get("at", step) == step:
                        signs.add(d["collection"])
                        eff["directive"] = d["id"]
                eff["sign"] = sorted(signs)
            elif action["do"] == "hc_sign":
                eff["evidence"] = True
                for d in by_kind.get("hc_drop", []):
                    if d["voter"] == action["voter"] and d["collection"] == action["collection"]:
                        eff["dropped"] = True
                        eff["directive"] = d["id"]
            effective.append(eff)
        for inj in injections.get(step, []):
            effective.append(inj)
    for seq, a in enumerate(effective):
        a["seq"] = seq
    return effective, intended


# ---------------------------------------------------------------------------
# the brute-force oracle: a fold over plain dictionaries


class ScriptOracle:
    """Ground truth computed from the action stream alone.

    A sign attempt counts when, at that point of the stream, the collection is
    open, the voter registered, and the voter whitelisted; the first accepted
    sign per (voter, collection) is definitive (signatures are irrevocable and
    idempotent). Voters removed from the roll afterwards stay counted.
    """

    def __init__(self, actions: list[dict]):
        self.first_sign: dict[tuple[str, str], int] = {}
        open_now: set[str] = set()
        registered: set[str] = set()
        whitelist: dict[str, set[str]] = {}
        for seq, action in enumerate(actions):
            do = action["do"]
            if do == "open":
                open_now.add(action["collection"])
                whitelist.setdefault(action["collection"], set())
            elif do == "close":
                open_now.discard(action["collection"])
            elif do == "register":
                registered.add(action["voter"])
            elif do == "roll_add":
                if action["collection"] in whitelist:
                    whitelist[action["collection"]].add(action["voter"])
            elif do == "roll_remove":
                if action["collection"] in whitelist:
                    whitelist[action["collection"]].discard(action["voter"])
            elif do in ("participate", "hc_sign"):
                voter = action["voter"]
                signs = action.get("sign", []) if do == "participate" else [action["collection"]]
                if do == "hc_sign" and action.get("dropped"):
                    signs = []
                if voter not in registered:
                    continue
                for cid in signs:
                    if cid in open_now and voter in whitelist.get(cid, set()):
                        self.first_sign.setdefault((voter, cid), seq)

    def tally(self, collection: str, seq: int) -> int:
        return sum(
            1 for (v, c), s in self.first_sign.items() if c == collection and s < seq
        )

    def signed(self, voter: str, collection: str, seq: int) -> bool:
        s = self.first_sign.get((voter, collection))
        return s is not None and s < seq


# ---------------------------------------------------------------------------
# runner environment


class Env:
    """An in-process deployment: board, talliers, roll, hybrid channel."""

    def __init__(self, scenario: dict):
        self.rng = Random(scenario["seed"])
        self.group = get_group(scenario.get("group", "sim64"))
        n = scenario.get("talliers", 2)
        self.tallier_ids = [f"T{i + 1}" for i in range(n)]
        self.tallier_keys = {t: SigKey.generate(self.rng) for t in self.tallier_ids}
        self.roll_key = SigKey.generate(self.rng)
        self.hc_key = SigKey.generate(self.rng)
        self.board = BoardState(
            {
                "group": self.group.name,
                "talliers": {t: k.verify_key for t, k in self.tallier_keys.items()},
                "roll_key": self.roll_key.verify_key,
                "hc_key": self.hc_key.verify_key,
            }
        )
        self.events = [self.board.genesis_event]
        self.shares = {}
        self.voters: dict[str, VoterSecrets] = {}

    def submit(self, envelope: dict) -> dict:
        event = self.board.apply_envelope(envelope)
        self.events.append(event)
        return event

    def tallier_signers(self):
        return [(t, self.tallier_keys[t]) for t in self.tallier_ids]

    def open_collection(self, cid: str, title: str = "") -> None:
        pk_t, shares = dkg(self.group, self.tallier_ids, self.rng, collection_hint=cid)
        self.shares[cid] = shares
        payload = {
            "collection": cid,
            "title": title or f"Initiative {cid}",
            "pk_t": self.group.elem_hex(pk_t),
            "shares": {
                s.tallier: {
                    "y": self.group.elem_hex(s.public),
                    "proof": s.proof.to_hex(self.group),
                }
                for s in shares
            },
        }
        self.submit(make_envelope(OPEN_COLLECTION, payload, self.tallier_signers()))

    def close_collection(self, cid: str) -> None:
        self.submit(make_envelope(CLOSE_COLLECTION, {"collection": cid}, self.tallier_signers()))

    def register(self, vid: str) -> None:
        secrets = VoterSecrets.create(vid, self.group.name, self.rng)
        self.voters[vid] = secrets
        self.submit(secrets.registration_envelope())

    def snapshot(self) -> dict:
        return self.board.snapshot_doc(chains="full")


# ---------------------------------------------------------------------------
# verdicts


def run_scenario(scenario: dict, _with_env: bool = False):
    """Execute one scenario and produce its deterministic verdict."""
    effective, intended = expand_actions(scenario)
    oracle = ScriptOracle(effective)
    intent = ScriptOracle(intended)
    env = Env(scenario)
    directives = {d["id"]: d for d in _directives(scenario)}
    detections = {
        d_id: {"kind": d["kind"], "detected": False, "by": None}
        for d_id, d in directives.items()
    }

    tallies: list[dict] = []
    audits: list[dict] = []
    hc_audits: list[dict] = []
    evidence_store = []
    retries = 0
    skipped = 0

    # deferred submissions within one step race against each other
    step_snapshot: dict | None = None
    current_step = None

    def fresh_updates(action):
        """Submit a participation or HC update with stale-retry.

        The first attempt builds against the step-start snapshot, so
        same-step writers race and exercise STALE_SNAPSHOT; eligibility is
        always decided on current state, matching the board's (and the
        oracle's) sequence-ordered semantics.
        """
        nonlocal retries, skipped
        voter = action["voter"]
        if voter not in env.voters:
            skipped += 1
            return
        snap = step_snapshot if voter in step_snapshot["voters"] else env.snapshot()
        is_hc = action["do"] == "hc_sign"
        for _attempt in range(MAX_RESUBMITS):
            current = snap["head"] == env.board.head
            eligible = set(open_eligible(snap, voter))
            wanted = {action["collection"]} if is_hc else set(action.get("sign", []))
            if (not eligible) or (is_hc and action["collection"] not in eligible):
                if current:
                    skipped += 1
                    return
                snap = env.snapshot()
                continue
            try:
                if is_hc and action.get("dropped"):
                    from .actors import _build_entries
                    from .authority import HCEvidence
                    from .board import HC_ID, UPDATE_SET
                    from .encoding import pack_fields, sha256_hex

                    cid = action["collection"]
                    entries = _build_entries(env.group, snap, voter, set(), "HC", env.rng, None)
                    payload = {"voter": voter, "bound": snap["head"], "entries": entries}
                    envl = make_envelope(UPDATE_SET, payload, [(HC_ID, env.hc_key)])
                    ev = HCEvidence(
                        voter=voter,
                        collection=cid,
                        entry_index=len(snap["chains"][f"{voter}/{cid}"]["entries"]),
                        blob_digest=sha256_hex(
                            pack_fields([b"hc-declaration", voter.encode(), cid.encode()])
                        ),
                    )
                elif is_hc:
                    envl, ev = hc_submit(env.hc_key, snap, voter, action["collection"], env.rng)
                else:
                    ev = None
                    envl = build_update(env.voters[voter], snap, wanted & eligible, env.rng)
                env.submit(envl)
                if is_hc and action.get("evidence", True):
                    evidence_store.append(ev)
                return
            except Rejected as exc:
                if exc.code != "STALE_SNAPSHOT":
                    raise
                retries += 1
                snap = env.snapshot()
        raise ProtocolError("RETRY_EXHAUSTED", f"{voter} could not land an update")

    for action in effective:
        if action["at"] != current_step:
            current_step = action["at"]
            step_snapshot = env.snapshot()
        do = action["do"]
        if do == "open":
            env.open_collection(action["collection"], action.get("title", ""))
        elif do == "close":
            env.close_collection(action["collection"])
        elif do == "register":
            if action["voter"] not in env.voters:
                env.register(action["voter"])
        elif do == "rotate":
            secrets = env.voters[action["voter"]]
            secrets.rotate(env.rng)
            env.submit(secrets.rotation_envelope())
        elif do == "roll_add":
            wl = env.board.whitelists.get(action["collection"])
            if wl is not None and action["voter"] not in wl.eligible:
                env.submit(roll_mutate(env.roll_key, action["collection"], "add", action["voter"]))
        elif do == "roll_remove":
            wl = env.board.whitelists.get(action["collection"])
            if wl is not None and action["voter"] in wl.eligible:
                env.submit(roll_mutate(env.roll_key, action["collection"], "remove", action["voter"]))
        elif do in ("participate", "hc_sign"):
            fresh_updates(action)
        elif do == "tally":
            cid = action["collection"]
            if cid in env.shares:
                result = tally_collection(env.board, cid, env.shares[cid], rng=env.rng)
                env.submit(
                    make_envelope(
                        TALLY_RESULT, result.to_payload(env.group), [env.tallier_signers()[0]]
                    )
                )
                tallies.append(
                    {
                        "collection": cid,
                        "at": action["at"],
                        "seq": action["seq"],
                        "protocol": result.count,
                        "oracle": oracle.tally(cid, action["seq"]),
                    }
                )
        elif do == "audit":
            voter = action["voter"]
            if voter not in env.voters:
                continue
            outcome = individual_verify(env.voters[voter], env.snapshot())
            mismatches = []
            for cid, entry in outcome.collections.items():
                expected = SIGNED if intent.signed(voter, cid, action["seq"]) else "NotSigned"
                actual = entry["status"]
                if actual != expected or not entry["chain_valid"]:
                    mismatches.append(
                        {"collection": cid, "expected": expected, "actual": actual,
                         "chain_valid": entry["chain_valid"]}
                    )
            audits.append(
                {
                    "at": action["at"],
                    "seq": action["seq"],
                    "voter": voter,
                    "outcome": outcome.to_doc()["collections"],
                    "mismatches": mismatches,
                }
            )
            for mismatch in mismatches:
                _attribute_audit_mismatch(voter, mismatch, directives, detections)
        elif do == "hc_audit":
            report = hc_audit(env.board, env.shares, list(evidence_store), env.rng)
            hc_audits.append(
                {
                    "at": action["at"],
                    "ok": report.ok,
                    "failures": sum(1 for i in report.items if not i["pass"]),
                    "items": report.items,
                }
            )
            if not report.ok:
                _attribute_hc_failures(report, directives, detections)
        elif do == "verify":
            pass  # rolled into the final verification below
        else:
            raise ProtocolError("MALFORMED", f"unknown action {do!r}")

    # final universal verification on the honest log
    report = universal_verify(env.events)

    # whitelist audit: the published mutation history against the true roll
    truth: list[tuple[str, str, str]] = []
    for action in intended:
        if action["do"] in ("roll_add", "roll_remove"):
            truth.append((action["do"].removeprefix("roll_"), action["voter"], action["collection"]))
    published = []
    for cid, wl in sorted(env.board.whitelists.items()):
        for op, vid, _idx in wl.history:
            published.append((op, vid, cid))
    unauthorized = [entry for entry in published if entry not in truth or published.count(entry) > truth.count(entry)]
    for entry in unauthorized:
        for d_id, d in directives.items():
            if d["kind"] == "roll_stuff" and d["voter"] == entry[1]:
                detections[d_id].update(detected=True, by="whitelist_audit")

    # forged tally: rejected live, and flagged on a tampered log copy
    forged_findings = []
    if "forge_tally:0" in directives and env.board.tallies:
        forged_findings = _forge_tally_checks(env, detections)

    checks = _assemble_checks(scenario, tallies, audits, hc_audits, report, detections, unauthorized)
    verdict = {
        "name": scenario.get("name", ""),
        "seed": scenario["seed"],
        "group": env.group.name,
        "events": len(env.events),
        "head": env.board.head,
        "checks": checks,
        "tallies": tallies,
        "audits": audits,
        "hc_audits": hc_audits,
        "detections": {k: detections[k] for k in sorted(detections)},
        "findings": report["findings"],
        "unauthorized_whitelist": [list(u) for u in unauthorized],
        "forged_log_findings": forged_findings,
        "retries": retries,
        "skipped_actions": skipped,
    }
    canonical_json(verdict)  # must always be canonicalizable
    if _with_env:
        return verdict, env
    return verdict


def _attribute_audit_mismatch(voter, mismatch, directives, detections):
    for d_id, d in directives.items():
        if d["kind"] in ("pd_drop", "pd_stuff", "hc_drop") and d.get("voter") == voter and d.get(
            "collection"
        ) == mismatch["collection"]:
            detections[d_id].update(detected=True, by="audit_device")


def _attribute_hc_failures(report, directives, detections):
    for item in report.items:
        if item["pass"]:
            continue
        if item["check"] == "hc_evidence":
            for d_id, d in directives.items():
                if d["kind"] == "hc_drop" and d["voter"] == item["voter"] and d["collection"] == item["collection"]:
                    detections[d_id].update(detected=True, by="hc_audit")
        elif item["check"] == "hc_aggregate":
            for d_id, d in directives.items():
                if d["kind"] == "hc_stuff" and d["collection"] == item["collection"]:
                    detections[d_id].update(detected=True, by="hc_audit")


def _forge_tally_checks(env: Env, detections) -> list[dict]:
    """A forged tally must be rejected live and flagged on a doctored log."""
    cid, items = sorted(env.board.tallies.items())[0]
    # live: resubmit the last tally with an inflated count
    result = tally_collection(env.board, cid, env.shares[cid], rng=env.rng)
    payload = result.to_payload(env.group)
    payload["count"] += 1
    live_rejected = False
    try:
        env.board.apply_envelope(
            make_envelope(TALLY_RESULT, payload, [env.tallier_signers()[0]])
        )
    except Rejected as exc:
        live_rejected = exc.code == "INVALID_TALLY"
    # offline: tamper the logged tally event in a copy, re-chain the digests
    events = copy.deepcopy(env.events)
    idx = next(i for i, ev in enumerate(events) if ev["type"] == TALLY_RESULT)
    events[idx]["payload"]["count"] += 1
    prev = events[idx - 1]["digest"]
    for i in range(idx, len(events)):
        events[i]["prev"] = prev
        events[i]["digest"] = event_digest(events[i])
        prev = events[i]["digest"]
    report = universal_verify(events)
    if live_rejected and not report["ok"]:
        detections["forge_tally:0"].update(detected=True, by="universal_verify")
    return report["findings"]


def _assemble_checks(scenario, tallies, audits, hc_audits, report, detections, unauthorized):
    checks = []
    checks.append(
        {
            "name": "tally_oracle_match",
            "pass": all(t["protocol"] == t["oracle"] for t in tallies),
            "detail": f"{len(tallies)} tallies compared",
        }
    )
    by_collection: dict[str, list[int]] = {}
    for t in tallies:
        by_collection.setdefault(t["collection"], []).append(t["protocol"])
    monotone = all(
        all(a <= b for a, b in zip(series, series[1:])) for series in by_collection.values()
    )
    checks.append(
        {"name": "tally_monotone", "pass": monotone, "detail": f"{len(by_collection)} collections"}
    )
    explained = []
    for audit in audits:
        for m in audit["mismatches"]:
            ok = any(
                d["kind"] in ("pd_drop", "pd_stuff", "hc_drop")
                and d.get("voter") == audit["voter"]
                and d.get("collection") == m["collection"]
                for d in _directives(scenario)
            )
            explained.append(ok)
    checks.append(
        {
            "name": "no_unexplained_audit_mismatches",
            "pass": all(explained),
            "detail": f"{len(explained)} mismatches, all adversary-attributed"
            if explained
            else "no mismatches",
        }
    )
    adversarial = bool(_directives(scenario))
    if not adversarial:
        checks.append(
            {
                "name": "honest_run_clean",
                "pass": report["ok"]
                and not unauthorized
                and all(h["ok"] for h in hc_audits)
                and all(not a["mismatches"] for a in audits),
                "detail": "no findings, no mismatches, hc audits pass",
            }
        )
    else:
        checks.append(
            {
                "name": "all_adversaries_detected",
                "pass": all(d["detected"] for d in detections.values()),
                "detail": canonical_json(
                    {k: v["by"] for k, v in sorted(detections.items())}
                ),
            }
        )
    return checks


# ---------------------------------------------------------------------------
# privacy pairs


def transcript_shape(events: list[dict]) -> list:
    """Structure of the public transcript: types, signers, entry counts and
    byte sizes, but no ciphertext or proof values."""
    shape = []
    for ev in events:
        item = [ev["type"], sorted(ev["signatures"])]
        payload = ev["payload"]
        if ev["type"] == "update_set":
            item.append(payload["voter"])
            item.append(
                [
                    [cid, len(doc["proof"]), len(canonical_json(doc)), doc["origin"], doc["epoch"]]
                    for cid, doc in sorted(payload["entries"].items())
                ]
            )
        elif ev["type"] == "tally_result":
            item.append([payload["collection"], payload["count"], payload["voter_count"]])
        elif ev["type"] == "register_voter":
            item.append(payload["voter"])
        elif ev["type"] == "whitelist_mutation":
            item.append([payload["collection"], payload["op"], payload["voter"]])
        elif ev["type"] in ("open_collection", "close_collection"):
            item.append(payload["collection"])
        shape.append(item)
    return shape


def run_privacy_pair(scenario: dict) -> dict:
    """Run the scenario twice, assignments f and g, and compare the outcomes.

    Both runs make the same voters submit updates at the same step; only which
    ciphertext carries the 1 differs. The screen requires identical tallies
    and structurally identical public transcripts.
    """
    pair = scenario["privacy_pair"]
    at = pair["at"]
    participants = sorted(set(pair["f"].values()) | set(pair["g"].values()))
    verdicts = {}
    shapes = {}
    for label in ("f", "g"):
        assignment: dict[str, str] = pair[label]
        by_voter: dict[str, list[str]] = {}
        for cid, vid in assignment.items():
            by_voter.setdefault(vid, []).append(cid)
        derived = copy.deepcopy(scenario)
        derived.pop("privacy_pair")
        for vid in participants:
            derived["actions"].append(
                {"at": at, "do": "participate", "voter": vid, "sign": sorted(by_voter.get(vid, []))}
            )
        final = max(a["at"] for a in derived["actions"]) + 1
        for cid in sorted(pair["f"]):
            derived["actions"].append({"at": final, "do": "tally", "collection": cid})
        verdict, env = run_scenario(derived, _with_env=True)
        verdicts[label] = verdict
        shapes[label] = transcript_shape(env.events)
    tallies_f = {t["collection"]: t["protocol"] for t in verdicts["f"]["tallies"]}
    tallies_g = {t["collection"]: t["protocol"] for t in verdicts["g"]["tallies"]}
    same_tallies = {
        cid: tallies_f.get(cid) == tallies_g.get(cid) for cid in sorted(pair["f"])
    }
    return {
        "tallies_equal": all(same_tallies.values()),
        "per_collection": same_tallies,
        "transcript_shapes_equal": shapes["f"] == shapes["g"],
        "f": verdicts["f"],
        "g": verdicts["g"],
    }


# ---------------------------------------------------------------------------
# randomized scenario generation (acceptance suites)


def generate_scenario(
    rng: Random,
    *,
    name: str = "",
    group: str = "sim64",
    max_voters: int = 50,
    max_collections: int = 8,
    steps: int = 12,
    adversary_kinds: tuple[str, ...] = (),
    with_hc: bool = True,
    with_rotation: bool = True,
) -> dict:
    """A random but well-formed scenario: mixed open/close times, eligibility
    churn, participations, optional HC traffic, interim and final tallies."""
    n_voters = rng.randrange(3, max_voters + 1)
    n_collections = rng.randrange(2, max_collections + 1)
    voters = [f"v{i + 1}" for i in range(n_voters)]
    collections = [f"C{i + 1}" for i in range(n_collections)]
    actions: list[dict] = []

    open_at = {}
    close_at = {}
    for cid in collections:
        open_at[cid] = rng.randrange(0, max(1, steps // 3))
        actions.append({"at": open_at[cid], "do": "open", "collection": cid})
        if rng.random() < 0.25:
            close_at[cid] = rng.randrange(open_at[cid] + 3, open_at[cid] + steps)
            actions.append({"at": close_at[cid], "do": "close", "collection": cid})

    registered_at = {}
    eligible_from: dict[tuple[str, str], int] = {}
    removed_at: dict[tuple[str, str], int] = {}
    for vid in voters:
        registered_at[vid] = rng.randrange(0, max(1, steps // 2))
        actions.append({"at": registered_at[vid], "do": "register", "voter": vid})
        for cid in collections:
            if rng.random() < 0.85:
                at = max(open_at[cid], rng.randrange(0, steps))
                eligible_from[(vid, cid)] = at
                actions.append({"at": at, "do": "roll_add", "voter": vid, "collection": cid})
                if rng.random() < 0.08:
                    rm = rng.randrange(at + 1, at + steps)
                    removed_at[(vid, cid)] = rm
                    actions.append({"at": rm, "do": "roll_remove", "voter": vid, "collection": cid})

    def eligible_pairs(step):
        out = []
        for (vid, cid), frm in eligible_from.items():
            if frm <= step < removed_at.get((vid, cid), 10**9) and registered_at[vid] <= step:
                if open_at[cid] <= step < close_at.get(cid, 10**9):
                    out.append((vid, cid))
        return out

    participations = []
    for vid in voters:
        for _ in range(rng.randrange(0, 3)):
            at = rng.randrange(registered_at[vid] + 1, steps + 3)
            candidates = [c for (v, c) in eligible_pairs(at) if v == vid]
            signs = sorted({c for c in candidates if rng.random() < 0.5})
            action = {"at": at, "do": "participate", "voter": vid, "sign": signs}
            actions.append(action)
            participations.append(action)

    if with_rotation:
        for vid in rng.sample(voters, max(1, n_voters // 10)):
            actions.append(
                {"at": rng.randrange(registered_at[vid] + 1, steps + 3), "do": "rotate", "voter": vid}
            )

    hc_signed = []
    if with_hc:
        for _ in range(rng.randrange(0, 3)):
            at = rng.randrange(1, steps + 3)
            pairs = eligible_pairs(at)
            if pairs:
                vid, cid = rng.choice(pairs)
                actions.append({"at": at, "do": "hc_sign", "voter": vid, "collection": cid})
                hc_signed.append((vid, cid, at))

    final = steps + 4
    for cid in collections:
        for _ in range(rng.randrange(1, 3)):
            actions.append({"at": rng.randrange(open_at[cid] + 1, final), "do": "tally", "collection": cid})
        actions.append({"at": final, "do": "tally", "collection": cid})
    for vid in voters:
        actions.append({"at": final, "do": "audit", "voter": vid})
    actions.append({"at": final, "do": "hc_audit"})
    actions.append({"at": final, "do": "verify"})

    scenario = {
        "name": name or f"random-{rng.randrange(1 << 30)}",
        "seed": rng.randrange(1 << 31),
        "group": group,
        "talliers": rng.randrange(1, 4),
        "actions": actions,
    }

    if adversary_kinds:
        adversary: dict = {}
        signed_parts = [p for p in participations if p["sign"]]
        ever_signed = {(p["voter"], c) for p in participations for c in p["sign"]}
        ever_signed |= {(v, c) for v, c, _ in hc_signed}
        hc_pairs = {(v, c) for v, c, _ in hc_signed}
        for kind in adversary_kinds:
            if kind == "pd_drop" and signed_parts:
                # an independent HC signature for the same pair would mask the
                # drop (the participation legitimately exists); avoid those
                for p in rng.sample(signed_parts, len(signed_parts)):
                    options = [c for c in p["sign"] if (p["voter"], c) not in hc_pairs]
                    if options:
                        adversary.setdefault("pd_drop", []).append(
                            {"voter": p["voter"], "collection": rng.choice(options)}
                        )
                        break
            elif kind == "pd_stuff" and participations:
                # a pair the voter signs anywhere else would make the stuffed
                # signature an idempotent no-op; pick an untouched pair
                for p in rng.sample(participations, len(participations)):
                    options = [
                        c
                        for (v, c) in eligible_pairs(p["at"])
                        if v == p["voter"] and (v, c) not in ever_signed
                    ]
                    if options:
                        adversary.setdefault("pd_stuff", []).append(
                            {"voter": p["voter"], "collection": rng.choice(options), "at": p["at"]}
                        )
                        break
            elif kind == "hc_stuff":
                for at in rng.sample(range(1, steps + 3), steps + 1):
                    pairs = [
                        (v, c)
                        for (v, c) in eligible_pairs(at)
                        if (v, c) not in ever_signed
                    ]
                    if pairs:
                        vid, cid = rng.choice(pairs)
                        adversary.setdefault("hc_stuff", []).append(
                            {"voter": vid, "collection": cid, "at": at}
                        )
                        break
            elif kind == "hc_drop":
                candidates = [
                    (v, c, at)
                    for (v, c, at) in hc_signed
                    if not any(p["voter"] == v and c in p["sign"] for p in participations)
                ]
                if not candidates:
                    at = steps
                    pairs = [(v, c) for (v, c) in eligible_pairs(at) if (v, c) not in ever_signed]
                    if pairs:
                        vid, cid = rng.choice(pairs)
                        actions.append({"at": at, "do": "hc_sign", "voter": vid, "collection": cid})
                        candidates = [(vid, cid, at)]
                if candidates:
                    vid, cid, _at = rng.choice(candidates)
                    adversary.setdefault("hc_drop", []).append({"voter": vid, "collection": cid})
            elif kind == "roll_stuff":
                cid = rng.choice(collections)
                at = min(open_at[cid] + 1, steps)
                adversary.setdefault("roll_stuff", []).append(
                    {"voter": "mallory", "collection": cid, "at": at}
                )
            elif kind == "forge_tally":
                adversary["forge_tally"] = True
        if adversary:
            scenario["adversary"] = adversary
    return scenario
