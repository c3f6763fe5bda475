"""Command-line interface: per-role subcommands and the scenario runner.

All machine output is canonical JSON on stdout; failures exit nonzero with an
{"error": ...} document. The role subcommands are thin wrappers over the
actor, authority, and service modules; a demo deployment directory created by
``board init`` holds the event log plus the authority key files the other
subcommands read.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from random import Random

from . import __version__
from .actors import VoterSecrets, build_update, hc_submit, individual_verify, roll_mutate
from .authority import HCEvidence, TallierShare, dkg, hc_audit, tally_collection
from .board import (
    CLOSE_COLLECTION,
    OPEN_COLLECTION,
    TALLY_RESULT,
    BoardState,
    EventLog,
    make_envelope,
    replay_events,
)
from .encoding import canonical_json
from .errors import ProtocolError, Rejected
from .groups import get_group
from .proofs import SchnorrProof
from .scenarios import generate_scenario, run_privacy_pair, run_scenario
from .secrets_store import load_secrets, save_secrets
from .service import BoardClient, BoardHub, ServiceConfig, serve
from .signing import SigKey

MAX_RETRIES = 5


def _print(doc) -> None:
    sys.stdout.write(canonical_json(doc) + "\n")


def _fail(code: str, detail: str = "") -> int:
    sys.stderr.write(canonical_json({"error": code, "detail": detail}) + "\n")
    return 1


def _load_key(path: str) -> SigKey:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return SigKey(bytes.fromhex(doc["seed"]))


def _save_key(path: str, key: SigKey, extra: dict | None = None) -> None:
    doc = {"seed": key.seed.hex(), "verify_key": key.verify_key, **(extra or {})}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _keys_dir(data_dir: str) -> str:
    return os.path.join(data_dir, "keys")


def _shares_path(data_dir: str, collection: str) -> str:
    return os.path.join(data_dir, "shares", f"{collection}.json")


def _load_shares(data_dir: str, group, collection: str) -> list[TallierShare]:
    with open(_shares_path(data_dir, collection), encoding="utf-8") as fh:
        doc = json.load(fh)
    return [
        TallierShare(
            tallier=tid,
            secret=int(entry["secret"]),
            public=group.elem_from_hex(entry["public"]),
            proof=SchnorrProof.from_hex(group, entry["proof"]),
        )
        for tid, entry in sorted(doc.items())
    ]


def _tallier_signers(data_dir: str) -> list[tuple[str, SigKey]]:
    keys_dir = _keys_dir(data_dir)
    signers = []
    for name in sorted(os.listdir(keys_dir)):
        if name.startswith("tallier-"):
            key = _load_key(os.path.join(keys_dir, name))
            signers.append((name[len("tallier-") : -len(".json")], key))
    return signers


# ---------------------------------------------------------------------------
# board


def cmd_board_init(args) -> int:
    os.makedirs(args.data, exist_ok=True)
    os.makedirs(_keys_dir(args.data), exist_ok=True)
    os.makedirs(os.path.join(args.data, "shares"), exist_ok=True)
    rng = Random(args.seed) if args.seed is not None else None
    talliers = {}
    for i in range(args.talliers):
        tid = f"T{i + 1}"
        key = SigKey.generate(rng)
        _save_key(os.path.join(_keys_dir(args.data), f"tallier-{tid}.json"), key, {"id": tid})
        talliers[tid] = key.verify_key
    roll = SigKey.generate(rng)
    hc = SigKey.generate(rng)
    _save_key(os.path.join(_keys_dir(args.data), "roll.json"), roll)
    _save_key(os.path.join(_keys_dir(args.data), "hc.json"), hc)
    log_path = os.path.join(args.data, "board.log")
    if os.path.exists(log_path):
        return _fail("MALFORMED", f"{log_path} already exists")
    BoardHub.initialize(
        log_path,
        {
            "group": args.group,
            "talliers": talliers,
            "roll_key": roll.verify_key,
            "hc_key": hc.verify_key,
        },
    )
    _print({"ok": True, "data_dir": args.data, "group": args.group, "talliers": sorted(talliers)})
    return 0


def cmd_board_serve(args) -> int:
    cfg = ServiceConfig.load(args.config)
    if args.data:
        cfg.data_dir = args.data
    if args.port is not None:
        cfg.port = args.port
    if args.host:
        cfg.host = args.host
    serve(cfg)
    return 0


def cmd_board_verify(args) -> int:
    if args.log:
        events = EventLog._load(args.log)
    else:
        client = BoardClient(args.board)
        events = client.events(0)["events"]
    state, findings = replay_events(events)
    doc = {
        "ok": not findings,
        "events": len(events),
        "head": state.head if state is not None else None,
        "findings": findings,
    }
    _print(doc)
    return 0 if not findings else 1


# ---------------------------------------------------------------------------
# voter


def cmd_voter_init(args) -> int:
    secrets = VoterSecrets.create(args.voter, args.group)
    save_secrets(args.secrets, secrets, args.passphrase)
    _print({"ok": True, "voter": args.voter, "group": args.group, "secrets": args.secrets})
    return 0


def cmd_voter_register(args) -> int:
    secrets = load_secrets(args.secrets, args.passphrase)
    client = BoardClient(args.board)
    result = client.submit(secrets.registration_envelope())
    _print(result)
    return 0


def cmd_voter_rotate(args) -> int:
    secrets = load_secrets(args.secrets, args.passphrase)
    secrets.rotate()
    result = BoardClient(args.board).submit(secrets.rotation_envelope())
    save_secrets(args.secrets, secrets, args.passphrase)
    _print(result)
    return 0


def cmd_voter_participate(args) -> int:
    secrets = load_secrets(args.secrets, args.passphrase)
    client = BoardClient(args.board)
    choices = set(args.sign or [])
    for _attempt in range(MAX_RETRIES):
        snap = client.full_snapshot(voters=[secrets.voter])
        envelope = build_update(secrets, snap, choices)
        try:
            result = client.submit(envelope)
            _print(result)
            return 0
        except Rejected as exc:
            if exc.code != "STALE_SNAPSHOT":
                raise
    return _fail("RETRY_EXHAUSTED", "another writer kept superseding the snapshot")


def cmd_voter_audit(args) -> int:
    secrets = load_secrets(args.secrets, args.passphrase)
    client = BoardClient(args.board)
    snap = client.full_snapshot(voters=[secrets.voter])
    outcome = individual_verify(secrets, snap)
    _print(outcome.to_doc())
    return 0 if all(c["chain_valid"] for c in outcome.collections.values()) else 1


# ---------------------------------------------------------------------------
# roll / hybrid channel


def cmd_roll_mutate(args) -> int:
    key = _load_key(args.key)
    envelope = roll_mutate(key, args.collection, args.op, args.voter)
    _print(BoardClient(args.board).submit(envelope))
    return 0


def cmd_hc_submit(args) -> int:
    key = _load_key(args.key)
    client = BoardClient(args.board)
    for _attempt in range(MAX_RETRIES):
        snap = client.full_snapshot(voters=[args.voter])
        envelope, evidence = hc_submit(key, snap, args.voter, args.collection)
        try:
            result = client.submit(envelope)
        except Rejected as exc:
            if exc.code != "STALE_SNAPSHOT":
                raise
            continue
        if args.evidence_out:
            with open(args.evidence_out, "a", encoding="utf-8") as fh:
                fh.write(canonical_json(evidence.to_dict()) + "\n")
        _print({**result, "evidence": evidence.to_dict()})
        return 0
    return _fail("RETRY_EXHAUSTED", "another writer kept superseding the snapshot")


# ---------------------------------------------------------------------------
# tallier


def _remote_state(client: BoardClient) -> BoardState:
    events = client.events(0)["events"]
    state, findings = replay_events(events)
    if findings:
        raise ProtocolError("MALFORMED", f"remote log has findings: {findings[:3]}")
    return state


def cmd_tallier_open(args) -> int:
    signers = _tallier_signers(args.data)
    if not signers:
        return _fail("MALFORMED", f"no tallier keys under {args.data}")
    group = get_group(args.group)
    pk_t, shares = dkg(group, [t for t, _ in signers], collection_hint=args.collection)
    os.makedirs(os.path.dirname(_shares_path(args.data, args.collection)), exist_ok=True)
    with open(_shares_path(args.data, args.collection), "w", encoding="utf-8") as fh:
        json.dump(
            {
                s.tallier: {
                    "secret": s.secret,
                    "public": group.elem_hex(s.public),
                    "proof": s.proof.to_hex(group),
                }
                for s in shares
            },
            fh,
            indent=1,
            sort_keys=True,
        )
    payload = {
        "collection": args.collection,
        "title": args.title,
        "pk_t": group.elem_hex(pk_t),
        "shares": {
            s.tallier: {"y": group.elem_hex(s.public), "proof": s.proof.to_hex(group)}
            for s in shares
        },
    }
    envelope = make_envelope(OPEN_COLLECTION, payload, signers)
    _print(BoardClient(args.board).submit(envelope))
    return 0


def cmd_tallier_close(args) -> int:
    signers = _tallier_signers(args.data)
    envelope = make_envelope(CLOSE_COLLECTION, {"collection": args.collection}, signers)
    _print(BoardClient(args.board).submit(envelope))
    return 0


def cmd_tallier_tally(args) -> int:
    client = BoardClient(args.board)
    state = _remote_state(client)
    shares = _load_shares(args.data, state.group, args.collection)
    subset = args.voters if args.voters else None
    result = tally_collection(state, args.collection, shares, subset=subset)
    signers = _tallier_signers(args.data)
    envelope = make_envelope(TALLY_RESULT, result.to_payload(state.group), signers[:1])
    submit = client.submit(envelope)
    _print({"collection": args.collection, "count": result.count, "submitted": submit})
    return 0


def cmd_tallier_hc_audit(args) -> int:
    client = BoardClient(args.board)
    state = _remote_state(client)
    evidence = []
    if args.evidence and os.path.exists(args.evidence):
        with open(args.evidence, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    evidence.append(HCEvidence.from_dict(json.loads(line)))
    shares = {}
    for cid in state.collections:
        path = _shares_path(args.data, cid)
        if os.path.exists(path):
            shares[cid] = _load_shares(args.data, state.group, cid)
    report = hc_audit(state, shares, evidence)
    _print(report.to_dict())
    return 0 if report.ok else 1


# ---------------------------------------------------------------------------
# scenarios


def cmd_scenario_run(args) -> int:
    with open(args.file, encoding="utf-8") as fh:
        scenario = json.load(fh)
    if "privacy_pair" in scenario:
        result = run_privacy_pair(scenario)
        ok = result["tallies_equal"] and result["transcript_shapes_equal"]
        for label in ("f", "g"):
            ok = ok and all(c["pass"] for c in result[label]["checks"])
    else:
        result = run_scenario(scenario)
        ok = all(c["pass"] for c in result["checks"])
    text = canonical_json(result) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0 if ok else 1


def cmd_scenario_generate(args) -> int:
    rng = Random(args.seed)
    scenario = generate_scenario(
        rng,
        name=args.name,
        group=args.group,
        max_voters=args.voters,
        max_collections=args.collections,
        adversary_kinds=tuple(args.adversary or ()),
    )
    _print(scenario)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecollect", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    board = sub.add_parser("board", help="bulletin board operations").add_subparsers(
        dest="sub", required=True
    )
    p = board.add_parser("init", help="create a deployment directory with a genesis log")
    p.add_argument("--data", required=True)
    p.add_argument("--group", default="prod2048")
    p.add_argument("--talliers", type=int, default=2)
    p.add_argument("--seed", type=int, default=None, help="deterministic demo keys")
    p.set_defaults(fn=cmd_board_init)
    p = board.add_parser("serve", help="serve the board over HTTP")
    p.add_argument("--config", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(fn=cmd_board_serve)
    p = board.add_parser("verify", help="universal verification of a board log")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--log")
    src.add_argument("--board")
    p.set_defaults(fn=cmd_board_verify)

    voter = sub.add_parser("voter", help="voter-side operations").add_subparsers(
        dest="sub", required=True
    )
    for name, fn, extra in (
        ("init", cmd_voter_init, ("voter", "group")),
        ("register", cmd_voter_register, ("board",)),
        ("rotate", cmd_voter_rotate, ("board",)),
        ("participate", cmd_voter_participate, ("board", "sign")),
        ("audit", cmd_voter_audit, ("board",)),
    ):
        p = voter.add_parser(name)
        p.add_argument("--secrets", required=True)
        p.add_argument("--passphrase", default="")
        if "voter" in extra:
            p.add_argument("--voter", required=True)
        if "group" in extra:
            p.add_argument("--group", default="prod2048")
        if "board" in extra:
            p.add_argument("--board", required=True)
        if "sign" in extra:
            p.add_argument("--sign", action="append", default=[])
        p.set_defaults(fn=fn)

    roll = sub.add_parser("roll", help="electoral roll operations").add_subparsers(
        dest="sub", required=True
    )
    p = roll.add_parser("mutate")
    p.add_argument("--board", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--collection", required=True)
    p.add_argument("--op", choices=["add", "remove"], required=True)
    p.add_argument("--voter", required=True)
    p.set_defaults(fn=cmd_roll_mutate)

    hc = sub.add_parser("hc", help="hybrid channel operations").add_subparsers(
        dest="sub", required=True
    )
    p = hc.add_parser("submit")
    p.add_argument("--board", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--voter", required=True)
    p.add_argument("--collection", required=True)
    p.add_argument("--evidence-out", default=None)
    p.set_defaults(fn=cmd_hc_submit)

    tallier = sub.add_parser("tallier", help="tallier operations").add_subparsers(
        dest="sub", required=True
    )
    p = tallier.add_parser("open", help="distributed keygen and collection opening")
    p.add_argument("--board", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--group", default="prod2048")
    p.add_argument("--collection", required=True)
    p.add_argument("--title", default="")
    p.set_defaults(fn=cmd_tallier_open)
    p = tallier.add_parser("close")
    p.add_argument("--board", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--collection", required=True)
    p.set_defaults(fn=cmd_tallier_close)
    p = tallier.add_parser("tally")
    p.add_argument("--board", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--collection", required=True)
    p.add_argument("--voters", action="append", default=[])
    p.set_defaults(fn=cmd_tallier_tally)
    p = tallier.add_parser("hc-audit")
    p.add_argument("--board", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--evidence", default=None)
    p.set_defaults(fn=cmd_tallier_hc_audit)

    scenario = sub.add_parser("scenario", help="scripted end-to-end runs").add_subparsers(
        dest="sub", required=True
    )
    p = scenario.add_parser("run")
    p.add_argument("file")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_scenario_run)
    p = scenario.add_parser("generate")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--name", default="")
    p.add_argument("--group", default="sim64")
    p.add_argument("--voters", type=int, default=12)
    p.add_argument("--collections", type=int, default=5)
    p.add_argument("--adversary", action="append", default=[])
    p.set_defaults(fn=cmd_scenario_generate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Rejected as exc:
        return _fail(exc.code, str(exc))
    except ProtocolError as exc:
        return _fail(exc.code, str(exc))
    except FileNotFoundError as exc:
        return _fail("MALFORMED", str(exc))


if __name__ == "__main__":
    sys.exit(main())
