"""Small JSON-over-HTTP front end for prompt-level estimates.

Endpoints:

``POST /v1/estimate``
    Body as in :mod:`promptcarbon.api`; 200 with the estimate, 400 with
    ``{"error": ..., "field": ...}`` on a bad request.
``GET /v1/models``
    Bundle threshold, per-slot regressor kinds, GPU vocabulary, metadata.
``GET /v1/health``
    ``{"status": "ok", "dataset_hash": ...}``.

The loaded bundle is never mutated, so the threaded server needs no locking.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .api import RequestError, dumps, estimate_payload
from .bundle import SLOTS

log = logging.getLogger(__name__)

MAX_BODY = 1 << 20


def models_document(bundle) -> dict:
    md = {k: v for k, v in bundle.metadata.items() if k != "evaluation"}
    return {
        "format_version": bundle.format_version,
        "threshold_b": bundle.threshold_b,
        "gpu_vocabulary": list(bundle.vocab.labels),
        "slots": [
            {"phase": p.value, "regime": r.value, "kind": bundle.models[(p, r)].kind.value}
            for p, r in SLOTS
        ],
        "metadata": md,
    }


def make_handler(bundle, table=None):
    class Handler(BaseHTTPRequestHandler):
        server_version = "promptcarbon/0.1"

        def _send(self, status: int, doc) -> None:
            body = dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/v1/health":
                self._send(200, {"status": "ok", "dataset_hash": bundle.metadata.get("dataset_hash")})
            elif self.path == "/v1/models":
                self._send(200, models_document(bundle))
            else:
                self._send(404, {"error": f"no such endpoint {self.path}"})

        def do_POST(self):
            if self.path != "/v1/estimate":
                self._send(404, {"error": f"no such endpoint {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length") or 0)
            except ValueError:
                length = -1
            if not 0 <= length <= MAX_BODY:
                self._send(400, {"error": "missing or invalid Content-Length", "field": None})
                return
            raw = self.rfile.read(length)
            try:
                payload = json.loads(raw.decode("utf-8") or "null")
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                self._send(400, {"error": f"body is not valid JSON: {exc}", "field": None})
                return
            try:
                doc = estimate_payload(bundle, payload, table)
            except RequestError as exc:
                self._send(400, {"error": str(exc), "field": exc.field})
                return
            except Exception:  # keep the server alive; report as internal
                log.exception("estimate failed")
                self._send(500, {"error": "internal error"})
                return
            self._send(200, doc)

        def log_message(self, fmt, *args):
            log.info("%s - %s", self.address_string(), fmt % args)

    return Handler


def make_server(bundle, host: str = "127.0.0.1", port: int = 8080, table=None) -> ThreadingHTTPServer:
    """Bind a server; raises ``OSError`` when the port is taken."""
    server = ThreadingHTTPServer((host, port), make_handler(bundle, table))
    server.daemon_threads = True
    return server
