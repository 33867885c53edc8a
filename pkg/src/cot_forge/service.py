"""Local HTTP scoring service for RL training loops.

Endpoints:

``POST /v1/score``
    ``{"items": [{"task", "gold_label", "text"}, ...], "config_override": {...}}``
    returns one entry per item, in request order, plus the fingerprint of the
    reward config that produced them. Bad items get an inline ``error``.
``GET /v1/config``
    effective reward config and its fingerprint.
``GET /healthz``
    liveness probe.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Mapping

from .chain import DEFAULT_LEXICON, MarkerLexicon
from .core import LabelSpace, TaskKind, default_label_spaces
from .dataset import DEFAULT_LENGTH_THRESHOLD, classify_stratum
from .errors import ConfigError, EmptyInput
from .reward import RewardConfig, score_text

log = logging.getLogger(__name__)

MAX_BODY_BYTES = 64 * 1024 * 1024


class BadRequest(Exception):
    def __init__(self, code: str, reason: str):
        super().__init__(reason)
        self.code = code
        self.reason = reason


def _item_error(index: int, code: str, message: str) -> dict:
    return {"index": index, "error": {"code": code, "message": message}}


def score_item(
    index: int,
    item: Any,
    config: RewardConfig,
    lexicon: MarkerLexicon,
    spaces: Mapping[TaskKind, LabelSpace],
    length_threshold: int,
) -> dict:
    if not isinstance(item, Mapping):
        return _item_error(index, "INVALID_ITEM", "item must be an object")
    missing = [k for k in ("task", "gold_label", "text") if k not in item]
    if missing:
        return _item_error(index, "INVALID_ITEM", f"missing field(s): {', '.join(missing)}")
    try:
        task = TaskKind.parse(item["task"])
    except ValueError as exc:
        return _item_error(index, "INVALID_TASK", str(exc))
    space = spaces[task]
    gold = item["gold_label"]
    if gold not in space:
        return _item_error(index, "INVALID_LABEL", f"gold_label {gold!r} not in the {task.value} label space")
    text = item["text"]
    if not isinstance(text, str):
        return _item_error(index, "INVALID_ITEM", "text must be a string")
    try:
        scored = score_text(task, gold, text, config, lexicon, space)
    except EmptyInput as exc:
        return _item_error(index, "EMPTY_INPUT", str(exc))
    return {
        "index": index,
        "rewards": scored.rewards.to_dict(),
        "predicted_label": scored.predicted_label,
        "stratum": classify_stratum(scored.chain, length_threshold).to_dict(),
        "token_length": scored.chain.token_length,
    }


class ScoringService:
    """Holds the immutable scoring state shared by all request threads."""

    def __init__(
        self,
        config: RewardConfig | None = None,
        lexicon: MarkerLexicon = DEFAULT_LEXICON,
        spaces: Mapping[TaskKind, LabelSpace] | None = None,
        length_threshold: int = DEFAULT_LENGTH_THRESHOLD,
    ):
        self.config = config or RewardConfig()
        self.lexicon = lexicon
        self.spaces = dict(spaces or default_label_spaces())
        self.length_threshold = length_threshold

    def config_payload(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_fingerprint": self.config.fingerprint(),
            "length_threshold": self.length_threshold,
        }

    def score(self, body: Any) -> dict:
        if not isinstance(body, Mapping):
            raise BadRequest("MALFORMED_BODY", "body must be a JSON object")
        items = body.get("items")
        if not isinstance(items, list):
            raise BadRequest("MALFORMED_BODY", "'items' must be a list")
        if not items:
            raise BadRequest("EMPTY_ITEMS", "'items' must not be empty")
        override = body.get("config_override")
        if override is not None and not isinstance(override, Mapping):
            raise BadRequest("INVALID_OVERRIDE", "'config_override' must be an object")
        try:
            config = self.config.override(override)
        except ConfigError as exc:
            raise BadRequest("INVALID_OVERRIDE", str(exc)) from None
        scored = [score_item(i, it, config, self.lexicon, self.spaces, self.length_threshold) for i, it in enumerate(items)]
        return {"items": scored, "config_fingerprint": config.fingerprint()}


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 128  # many trainer workers may connect at once


def _make_handler(service: ScoringService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s - " + fmt, self.address_string(), *args)

        def _send(self, status: int, payload: Any) -> None:
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _bad(self, status: int, code: str, reason: str) -> None:
            self._send(status, {"error": {"code": code, "reason": reason}})

        def do_GET(self):
            if self.path == "/healthz":
                self._send(200, {"status": "ok"})
            elif self.path == "/v1/config":
                self._send(200, service.config_payload())
            elif self.path == "/v1/score":
                self._bad(405, "METHOD_NOT_ALLOWED", "use POST")
            else:
                self._bad(404, "NOT_FOUND", f"no route {self.path}")

        def do_POST(self):
            if self.path in ("/healthz", "/v1/config"):
                self._bad(405, "METHOD_NOT_ALLOWED", "use GET")
                return
            if self.path != "/v1/score":
                self._bad(404, "NOT_FOUND", f"no route {self.path}")
                return
            try:
                length = int(self.headers.get("Content-Length", ""))
            except ValueError:
                self._bad(411, "LENGTH_REQUIRED", "Content-Length header required")
                return
            if length > MAX_BODY_BYTES:
                self._bad(413, "BODY_TOO_LARGE", f"body exceeds {MAX_BODY_BYTES} bytes")
                return
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw)
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                self._bad(400, "MALFORMED_BODY", f"invalid JSON: {exc}")
                return
            try:
                self._send(200, service.score(body))
            except BadRequest as exc:
                self._bad(400, exc.code, exc.reason)

    return Handler


def parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not host:
        raise ValueError(f"bind address must be host:port, got {bind!r}")
    try:
        return host.strip("[]"), int(port)
    except ValueError:
        raise ValueError(f"invalid port in bind address {bind!r}") from None


def make_server(bind: str | tuple[str, int], service: ScoringService) -> ThreadingHTTPServer:
    address = parse_bind(bind) if isinstance(bind, str) else bind
    return _Server(address, _make_handler(service))


def serve(
    bind: str,
    config: RewardConfig | None = None,
    lexicon: MarkerLexicon = DEFAULT_LEXICON,
    *,
    spaces: Mapping[TaskKind, LabelSpace] | None = None,
    length_threshold: int = DEFAULT_LENGTH_THRESHOLD,
    ready: threading.Event | None = None,
) -> None:
    """Serve until interrupted (Ctrl-C / SIGINT)."""
    server = make_server(bind, ScoringService(config, lexicon, spaces, length_threshold))
    host, port = server.server_address[:2]
    log.info("scoring service listening on http://%s:%d", host, port)
    if ready is not None:
        ready.set()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        log.info("shutting down")
    finally:
        server.server_close()


class BackgroundServer:
    """Run the service on a daemon thread; handy in tests and notebooks."""

    def __init__(self, service: ScoringService | None = None, bind: str = "127.0.0.1:0"):
        self.server = make_server(bind, service or ScoringService())
        self._thread = threading.Thread(target=self.server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "BackgroundServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.server.shutdown()
        self.server.server_close()
