"""Serve a victim over the wire protocol (stdio lines or HTTP POST).

The server never dies on bad input: malformed requests and victim failures
come back as {"id": ..., "error": ...} responses.
"""

from __future__ import annotations

import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .victims import GenerationRequest, VictimFn
from .wire import (
    ProtocolError,
    build_error_response,
    build_response,
    parse_request_line,
)


def _best_effort_id(line: str) -> str:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return ""
    if isinstance(obj, dict) and isinstance(obj.get("id"), str):
        return obj["id"]
    return ""


def handle_request_line(victim: VictimFn, line: str) -> dict:
    try:
        wire_request = parse_request_line(line)
    except ProtocolError as exc:
        return build_error_response(_best_effort_id(line), str(exc))
    request = GenerationRequest(
        trajectory=wire_request.trajectory,
        seed=wire_request.seed,
        track_points=wire_request.track_points,
        image_ref=wire_request.image_ref,
    )
    try:
        tracks = victim(request)
    except Exception as exc:  # victim bug must not kill the server
        return build_error_response(
            wire_request.request_id, f"{type(exc).__name__}: {exc}"
        )
    return build_response(wire_request.request_id, tracks)


def serve_stdio(victim: VictimFn, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        response = handle_request_line(victim, line)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


class _VictimHTTPHandler(BaseHTTPRequestHandler):
    victim: VictimFn = None

    def log_message(self, *args) -> None:
        pass

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self) -> None:
        if self.path.rstrip("/") != "/generate":
            self._reply(404, {"id": "", "error": f"unknown path {self.path}"})
            return
        length = int(self.headers.get("Content-Length", "0"))
        body = self.rfile.read(length).decode("utf-8", errors="replace")
        self._reply(200, handle_request_line(type(self).victim, body))

    def do_GET(self) -> None:
        self._reply(404, {"id": "", "error": "POST /generate only"})


def make_http_server(victim: VictimFn, host: str, port: int) -> ThreadingHTTPServer:
    handler = type("BoundVictimHandler", (_VictimHTTPHandler,), {"victim": staticmethod(victim)})
    return ThreadingHTTPServer((host, port), handler)


def serve_http(victim: VictimFn, host: str = "127.0.0.1", port: int = 8731) -> None:
    server = make_http_server(victim, host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
