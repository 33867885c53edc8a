"""Local scripted chat-completions server for tests, demos and dry runs.

The responder receives the user prompt and the 0-based request number and
returns either the completion text or ``(status, body)`` to simulate a
failure::

    with StubEndpoint(lambda prompt, i: "1") as stub:
        ep = EndpointConfig(stub.base_url, "stub")
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Union

Reply = Union[str, tuple[int, Any]]
Responder = Callable[[str, int], Reply]


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 128  # the default of 5 drops SYNs under concurrent load


def completion_body(text: str, model: str = "stub") -> dict:
    return {
        "object": "chat.completion",
        "model": model,
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
    }


class StubEndpoint:
    def __init__(self, responder: Responder, *, delay: float = 0.0, host: str = "127.0.0.1", port: int = 0):
        self.responder = responder
        self.delay = delay
        self.requests: list[dict] = []
        self.start_times: list[float] = []
        self.in_flight = 0
        self.peak_in_flight = 0
        self._lock = threading.Lock()
        self._server = _Server((host, port), self._handler())
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1"

    @property
    def request_count(self) -> int:
        with self._lock:
            return len(self.requests)

    def _handler(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, status: int, payload: Any) -> None:
                data = payload.encode() if isinstance(payload, str) else json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                if not self.path.endswith("/chat/completions"):
                    self._send(404, {"error": "not found"})
                    return
                body = json.loads(self.rfile.read(int(self.headers.get("Content-Length", 0))) or b"{}")
                with stub._lock:
                    index = len(stub.requests)
                    stub.requests.append(body)
                    stub.start_times.append(time.monotonic())
                    stub.in_flight += 1
                    stub.peak_in_flight = max(stub.peak_in_flight, stub.in_flight)
                try:
                    if stub.delay:
                        time.sleep(stub.delay)
                    prompt = body["messages"][-1]["content"]
                    reply = stub.responder(prompt, index)
                finally:
                    with stub._lock:
                        stub.in_flight -= 1
                if isinstance(reply, tuple):
                    status, payload = reply
                    self._send(status, payload)
                else:
                    self._send(200, completion_body(reply, body.get("model", "stub")))

        return Handler

    def start(self) -> "StubEndpoint":
        self._thread = threading.Thread(target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "StubEndpoint":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
