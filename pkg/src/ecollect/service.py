"""HTTP service around the bulletin board.

One writer, many readers: submissions serialize through a single lock, get
validated by board_core, and are fsynced to the event log before the
acknowledgment goes out. Reads render point-in-time documents under the same
lock (the state is small at desk scale), so a snapshot can never be torn.
Event reads support long-polling from an index so clients and mirrors can
tail the log.

Endpoints (all bodies are canonical JSON):
    GET  /health                      -> {"ok": true, "head": ..., "events": n}
    GET  /snapshot                    -> public state document (chain lengths)
    GET  /chain/<voter>/<collection>  -> full ballot chain with proofs
    GET  /events?from=N&wait=S        -> {"events": [...], "head": ...}
    POST /submit                      -> {"accepted": true, "index": n, "head": ...}
                                         or {"error": CODE, "head": ...} with 4xx
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import requests

from .board import BoardState, EventLog, replay_events
from .encoding import canonical_bytes
from .errors import Malformed, Rejected

MAX_BODY = 8 * 1024 * 1024
LONG_POLL_CAP = 25.0


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8723
    data_dir: str = "./board-data"

    @staticmethod
    def load(path: str | None = None, env: dict | None = None) -> "ServiceConfig":
        cfg = ServiceConfig()
        if path:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            for key in ("host", "port", "data_dir"):
                if key in doc:
                    setattr(cfg, key, doc[key])
        env = os.environ if env is None else env
        if "ECOLLECT_HOST" in env:
            cfg.host = env["ECOLLECT_HOST"]
        if "ECOLLECT_PORT" in env:
            cfg.port = int(env["ECOLLECT_PORT"])
        if "ECOLLECT_DATA_DIR" in env:
            cfg.data_dir = env["ECOLLECT_DATA_DIR"]
        return cfg


class BoardHub:
    """The single-writer core shared by the HTTP handlers."""

    def __init__(self, log_path: str):
        self.log = EventLog(log_path)
        if not self.log.events:
            raise Malformed(f"{log_path} has no genesis event; initialize the board first")
        state, findings = replay_events(self.log.events)
        if findings:
            raise Malformed(f"refusing to serve a log with findings: {findings[:3]}")
        self.state: BoardState = state
        self._cv = threading.Condition()

    @staticmethod
    def initialize(log_path: str, genesis_payload: dict) -> None:
        state = BoardState(genesis_payload)
        log = EventLog(log_path)
        log.append(state.genesis_event)
        log.close()

    def submit(self, envelope) -> dict:
        with self._cv:
            event = self.state.apply_envelope(envelope)  # raises Rejected
            self.log.append(event)  # durable before acknowledgment
            self._cv.notify_all()
            return {"accepted": True, "index": event["index"], "head": event["digest"]}

    def snapshot(self) -> dict:
        with self._cv:
            return self.state.snapshot_doc(chains="lengths")

    def chain(self, voter: str, collection: str) -> dict:
        with self._cv:
            return self.state.chain_doc(voter, collection)

    def events(self, start: int, wait: float = 0.0) -> dict:
        with self._cv:
            if wait > 0 and start >= len(self.log.events):
                self._cv.wait_for(
                    lambda: len(self.log.events) > start, timeout=min(wait, LONG_POLL_CAP)
                )
            return {
                "events": self.log.events[start:],
                "head": self.state.head,
                "next": len(self.log.events),
            }

    def head(self) -> dict:
        with self._cv:
            return {"ok": True, "head": self.state.head, "events": len(self.log.events)}

    def close(self) -> None:
        self.log.close()


class _Handler(BaseHTTPRequestHandler):
    hub: BoardHub  # set by make_server

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _respond(self, status: int, doc: dict) -> None:
        body = canonical_bytes(doc) + b"\n"
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self._respond(204, {})

    def do_GET(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts == ["health"]:
                self._respond(200, self.hub.head())
            elif parts == ["snapshot"]:
                self._respond(200, self.hub.snapshot())
            elif len(parts) == 3 and parts[0] == "chain":
                self._respond(200, self.hub.chain(parts[1], parts[2]))
            elif parts == ["events"]:
                q = parse_qs(url.query)
                start = int(q.get("from", ["0"])[0])
                wait = float(q.get("wait", ["0"])[0])
                self._respond(200, self.hub.events(start, wait))
            else:
                self._respond(404, {"error": "MALFORMED", "detail": "unknown endpoint"})
        except Rejected as exc:
            self._respond(404, {"error": exc.code, "detail": str(exc)})
        except (ValueError, KeyError) as exc:
            self._respond(400, {"error": "MALFORMED", "detail": str(exc)})

    def do_POST(self):
        url = urlparse(self.path)
        if url.path.rstrip("/") != "/submit":
            self._respond(404, {"error": "MALFORMED", "detail": "unknown endpoint"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            if length > MAX_BODY:
                self._respond(400, {"error": "MALFORMED", "detail": "body too large"})
                return
            envelope = json.loads(self.rfile.read(length))
        except ValueError:
            self._respond(400, {"error": "MALFORMED", "detail": "body is not JSON"})
            return
        try:
            self._respond(200, self.hub.submit(envelope))
        except Rejected as exc:
            status = 409 if exc.code == "STALE_SNAPSHOT" else 400
            doc = {"error": exc.code, "detail": str(exc)}
            doc["head"] = exc.head if exc.head is not None else self.hub.state.head
            self._respond(status, doc)


def make_server(hub: BoardHub, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"hub": hub})
    return ThreadingHTTPServer((host, port), handler)


def serve(config: ServiceConfig) -> None:  # pragma: no cover - CLI entry
    log_path = os.path.join(config.data_dir, "board.log")
    hub = BoardHub(log_path)
    server = make_server(hub, config.host, config.port)
    print(f"board service on http://{config.host}:{server.server_address[1]} ({log_path})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        hub.close()


class BoardClient:
    """Thin client over the service; raises Rejected with the current head on
    rejection so callers can rebuild and retry."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()

    def health(self) -> dict:
        return self._get("/health")

    def snapshot(self) -> dict:
        return self._get("/snapshot")

    def chain(self, voter: str, collection: str) -> dict:
        return self._get(f"/chain/{voter}/{collection}")

    def events(self, start: int = 0, wait: float = 0.0) -> dict:
        return self._get(f"/events?from={start}&wait={wait}")

    def submit(self, envelope: dict) -> dict:
        resp = self._session.post(
            self.base_url + "/submit", json=envelope, timeout=self.timeout + LONG_POLL_CAP
        )
        doc = resp.json()
        if resp.status_code == 200:
            return doc
        raise Rejected(doc.get("error", "MALFORMED"), doc.get("detail", ""), head=doc.get("head"))

    def full_snapshot(self, voters: list[str] | None = None) -> dict:
        """Snapshot with full chain entries for the given voters (all if None)."""
        snap = self.snapshot()
        chains = {}
        for key, meta in snap.get("chains", {}).items():
            vid, _, cid = key.partition("/")
            if voters is not None and vid not in voters:
                chains[key] = meta
                continue
            chains[key] = self.chain(vid, cid)
        snap["chains"] = {
            k: ({"entries": v["entries"], "frozen": v["frozen"]} if "entries" in v else v)
            for k, v in chains.items()
        }
        return snap

    def _get(self, path: str) -> dict:
        resp = self._session.get(self.base_url + path, timeout=self.timeout + LONG_POLL_CAP)
        doc = resp.json()
        if resp.status_code != 200:
            raise Rejected(doc.get("error", "MALFORMED"), doc.get("detail", ""))
        return doc
