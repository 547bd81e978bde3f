"""A local HTTP stand-in for a remote QA service, backed by the synthetic oracle.

Speaks the same wire protocol as :class:`~beliefbank.oracle.RemoteOracle`: POST a JSON
body ``{"question_text", "context_text"}``, get ``{"answer": "yes"|"no", "confidence"}``.
Failures can be injected to exercise client retries.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Iterable

from .beliefs import SentenceKey, TemplateRegistry
from .oracle import SyntheticOracle

log = logging.getLogger(__name__)


class StubServer:
    """Serve ``oracle`` on ``host:port`` (port 0 picks a free one).

    ``fail_first`` makes the first N requests return ``fail_status``; ``always_fail``
    makes every request fail. Use as a context manager to run it on a background thread.
    """

    def __init__(self, oracle: SyntheticOracle, registry: TemplateRegistry, entities: Iterable[str],
                 host: str = "127.0.0.1", port: int = 0, fail_first: int = 0,
                 always_fail: bool = False, fail_status: int = 503):
        self.oracle = oracle
        self.questions: dict[str, SentenceKey] = {}
        for entity in entities:
            for t in registry:
                key = SentenceKey(entity, t.template_id)
                self.questions[registry.question(key)] = key
        self.fail_first = fail_first
        self.always_fail = always_fail
        self.fail_status = fail_status
        self.requests = 0
        self.failures = 0
        self._lock = threading.Lock()
        self.httpd = ThreadingHTTPServer((host, port), self._handler())
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}/"

    def _should_fail(self) -> bool:
        with self._lock:
            self.requests += 1
            fail = self.always_fail or self.requests <= self.fail_first
            self.failures += fail
            return fail

    def answer(self, body: dict) -> tuple[int, dict]:
        if self._should_fail():
            return self.fail_status, {"error": "injected failure"}
        try:
            key = self.questions[body["question_text"]]
        except (KeyError, TypeError):
            return 400, {"error": "unknown question"}
        ans = self.oracle.query(key, str(body.get("context_text") or ""))
        return 200, {"answer": "yes" if ans.label else "no", "confidence": ans.confidence}

    def _handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length") or 0)
                try:
                    body = json.loads(self.rfile.read(length).decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError):
                    status, payload = 400, {"error": "body is not JSON"}
                else:
                    status, payload = server.answer(body)
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, fmt, *args):
                log.debug("stub: " + fmt, *args)

        return Handler

    def start(self) -> "StubServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._thread is not None:
            self.httpd.shutdown()
            self._thread.join()
            self._thread = None
        self.httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
