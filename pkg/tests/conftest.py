from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from listqa.gateway import GatewayConfig, StubGateway

DATA_DIR = Path(__file__).parent / "data"


def make_gateway(lexicon=None, qa_scores=None, **config_overrides) -> StubGateway:
    """In-memory stub gateway; fixture files are exercised separately."""
    config = GatewayConfig(backend="stub", **config_overrides)
    return StubGateway(config, lexicon=lexicon or {}, qa_scores=qa_scores or {})


def write_stub_dir(path: Path, lexicon: dict, qa_scores: dict) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    (path / "lexicon.json").write_text(json.dumps(lexicon, ensure_ascii=False), encoding="utf-8")
    (path / "qa_scores.json").write_text(json.dumps(qa_scores, ensure_ascii=False), encoding="utf-8")
    return path


def write_corpus(path: Path, rows: list[dict]) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


class CountingGateway:
    """Pass-through wrapper that counts calls per operation."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = {"summarize": 0, "tag_entities": 0, "generate_question": 0, "qa_top_spans": 0}

    def summarize(self, text):
        self.calls["summarize"] += 1
        return self.inner.summarize(text)

    def tag_entities(self, text, domain):
        self.calls["tag_entities"] += 1
        return self.inner.tag_entities(text, domain)

    def generate_question(self, answers, context):
        self.calls["generate_question"] += 1
        return self.inner.generate_question(answers, context)

    def qa_top_spans(self, question, context):
        self.calls["qa_top_spans"] += 1
        return self.inner.qa_top_spans(question, context)

    def excluded_types_for(self, domain):
        return self.inner.excluded_types_for(domain)

    def qa_caps_hit(self, question, context):
        return self.inner.qa_caps_hit(question, context)

    def op_timings(self):
        return self.inner.op_timings()


class MockModelServer:
    """Scripted HTTP server standing in for the inference service.

    responses maps a request path to the JSON body to return. fail_first
    makes the first N POST requests fail with fail_status before the scripted
    responses kick in. All received (path, payload) pairs are logged.
    """

    def __init__(self, responses: dict, fail_first: int = 0, fail_status: int = 500):
        self.responses = responses
        self.fail_first = fail_first
        self.fail_status = fail_status
        self.requests: list[tuple[str, dict]] = []
        self._lock = threading.Lock()
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler_class())
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def _handler_class(self):
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send_json(self, status: int, body: dict):
                data = json.dumps(body, ensure_ascii=False).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length) or b"{}")
                with outer._lock:
                    outer.requests.append((self.path, payload))
                    if outer.fail_first > 0:
                        outer.fail_first -= 1
                        self._send_json(outer.fail_status, {"error": "scripted failure"})
                        return
                body = outer.responses.get(self.path)
                if body is None:
                    self._send_json(404, {"error": f"no scripted response for {self.path}"})
                    return
                self._send_json(200, body)

            def do_GET(self):
                with outer._lock:
                    outer.requests.append((self.path, {}))
                body = outer.responses.get(self.path)
                if body is None:
                    self._send_json(404, {"error": f"no scripted response for {self.path}"})
                    return
                self._send_json(200, body)

        return Handler

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
