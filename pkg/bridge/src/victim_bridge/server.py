"""Victim server: one adapter callback behind stdio or HTTP.

Every request gets exactly one response with its id. Schema violations and
callback exceptions become error responses; they never take the server down.
The request loop is single-threaded, which already guarantees each id is
answered exactly once per transport connection.
"""

from __future__ import annotations

import sys
from http.server import BaseHTTPRequestHandler, HTTPServer
from typing import Callable

from .protocol import (
    RequestError,
    Task,
    encode_error,
    encode_response,
    normalize_tracks,
    parse_request_line,
    salvage_id,
)

AdapterCallback = Callable[[Task], object]


def handle_line(line: str, callback: AdapterCallback) -> str:
    """Answer one request line; always returns a response line."""
    try:
        task = parse_request_line(line)
    except RequestError as exc:
        return encode_error(salvage_id(line), str(exc))
    try:
        tracks = normalize_tracks(callback(task), task.frame_count)
    except Exception as exc:  # noqa: BLE001 - adapter bugs become error responses
        return encode_error(task.request_id, f"{type(exc).__name__}: {exc}")
    return encode_response(task.request_id, tracks)


def serve_stdio(callback: AdapterCallback, lines=None, out=None) -> None:
    """Blocking request loop over newline-delimited JSON; blank lines skipped."""
    lines = sys.stdin if lines is None else lines
    out = sys.stdout if out is None else out
    for line in lines:
        if not line.strip():
            continue
        out.write(handle_line(line, callback) + "\n")
        out.flush()


class _BridgeHTTPHandler(BaseHTTPRequestHandler):
    callback: AdapterCallback

    def _reply(self, status: int, body: str) -> None:
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_POST(self):
        if self.path.rstrip("/") != "/generate":
            self._reply(404, encode_error("", f"no such endpoint: {self.path}"))
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length).decode("utf-8", errors="replace")
        self._reply(200, handle_line(body, type(self).callback))

    def do_GET(self):
        self._reply(404, encode_error("", "this server only answers POST /generate"))

    def log_message(self, *args):
        pass


def make_http_server(
    callback: AdapterCallback, host: str = "127.0.0.1", port: int = 0
) -> HTTPServer:
    handler = type("BoundBridgeHandler", (_BridgeHTTPHandler,), {"callback": staticmethod(callback)})
    return HTTPServer((host, port), handler)


def serve(
    callback: AdapterCallback,
    transport: str = "stdio",
    port: int = 0,
    host: str = "127.0.0.1",
) -> None:
    """Run the server until EOF (stdio) or interrupt (http)."""
    if transport == "stdio":
        serve_stdio(callback)
    elif transport == "http":
        server = make_http_server(callback, host, port)
        try:
            server.serve_forever()
        finally:
            server.server_close()
    else:
        raise ValueError(f"transport must be 'stdio' or 'http', got {transport!r}")
