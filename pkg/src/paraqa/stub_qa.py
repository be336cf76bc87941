"""Deterministic stand-in for an extractive-QA model, served over the same HTTP protocol.

The "answer" is the context sentence sharing the most content words with the
question; its probability is the fraction of question terms it covers.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .corpus import sentence_spans
from .qa_client import PARAGRAPH_MARKER
from .retrieval.tfidf import analyze

__all__ = ["make_server", "serve", "start_background", "stub_answer"]

log = logging.getLogger(__name__)


def stub_answer(question: str, context: str) -> tuple[str, float]:
    q_terms = set(analyze(question))
    if not q_terms:
        return "", 0.0
    best_text, best_hits = "", 0
    for block in PARAGRAPH_MARKER.split(context)[::2]:
        for s, e in sentence_spans(block):
            sentence = block[s:e].strip()
            hits = len(q_terms & set(analyze(sentence)))
            if hits > best_hits:
                best_text, best_hits = sentence, hits
    return best_text, round(best_hits / len(q_terms), 6)


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802
        length = int(self.headers.get("Content-Length") or 0)
        try:
            payload = json.loads(self.rfile.read(length) or b"null")
            question, context = payload["question"], payload["context"]
            if not isinstance(question, str) or not isinstance(context, str):
                raise TypeError("question and context must be strings")
        except (ValueError, KeyError, TypeError) as exc:
            self._send(400, {"error": str(exc)})
            return
        answer, prob = stub_answer(question, context)
        self._send(200, {"answer": answer, "probability": prob})

    def _send(self, status: int, body: dict):
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):
        log.debug("stub-qa: " + fmt, *args)


def make_server(host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), _Handler)


def start_background(host: str = "127.0.0.1", port: int = 0) -> tuple[ThreadingHTTPServer, str]:
    """Start the stub on a daemon thread; returns the server and its endpoint URL."""
    server = make_server(host, port)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    h, p = server.server_address[:2]
    return server, f"http://{h}:{p}/"


def serve(port: int, host: str = "127.0.0.1") -> None:
    server = make_server(host, port)
    log.info("stub QA backend listening on http://%s:%d/", host, server.server_address[1])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
