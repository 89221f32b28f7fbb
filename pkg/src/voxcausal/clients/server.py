"""Loopback HTTP server exposing any in-process client, for integration tests.

Honors idempotency keys with an in-memory response cache, giving at-most-once
execution per logical request even when an adapter retries.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .base import ENDPOINTS, PROTOCOL_VERSION, ClientRequest, ModelClient

_PATH_TO_KIND = {path: kind for kind, path in ENDPOINTS.items()}


class ClientHTTPServer:
    """Serve a :class:`ModelClient` over HTTP on a loopback port."""

    def __init__(self, client: ModelClient, host: str = "127.0.0.1", port: int = 0):
        self.client = client
        self._cache: dict[str, dict] = {}
        self._cache_lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def do_POST(self):
                kind = _PATH_TO_KIND.get(self.path)
                if kind is None:
                    self._reply(404, {"status": "fatal", "error": f"no endpoint {self.path}"})
                    return
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                    body = json.loads(self.rfile.read(length) or b"{}")
                except (ValueError, json.JSONDecodeError):
                    self._reply(400, {"status": "fatal", "error": "malformed request body"})
                    return
                if body.get("version") != PROTOCOL_VERSION:
                    self._reply(
                        400,
                        {"status": "fatal", "error": f"unsupported version {body.get('version')}"},
                    )
                    return
                key = str(body.pop("idempotency_key", ""))
                body.pop("version", None)
                if key:
                    with outer._cache_lock:
                        cached = outer._cache.get(key)
                    if cached is not None:
                        self._reply(200, cached)
                        return
                response = outer.client.call(ClientRequest(kind=kind, payload=body))
                data = {"status": response.status.value, **response.payload}
                if response.error:
                    data["error"] = response.error
                if key:
                    with outer._cache_lock:
                        outer._cache[key] = data
                self._reply(200, data)

            def _reply(self, code: int, data: dict):
                raw = json.dumps(data).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ClientHTTPServer":
        self._thread.start()
        return self

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "ClientHTTPServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()
