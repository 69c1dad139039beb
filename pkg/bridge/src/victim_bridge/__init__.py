"""Reference victim host for the trajattack wire protocol.

Wrap a generative pipeline in an AdapterCallback, then `serve` it; the
toolkit attacks it like any external victim. `track_from_video` is the
bundled fallback for turning rendered frames into point tracks.
"""

from .callbacks import echo_callback, load_callback
from .protocol import (
    RequestError,
    Task,
    encode_error,
    encode_response,
    normalize_tracks,
    parse_request_line,
)
from .server import AdapterCallback, handle_line, make_http_server, serve, serve_stdio
from .tracking import TrackingError, track_from_video

__all__ = [
    "AdapterCallback",
    "RequestError",
    "Task",
    "TrackingError",
    "echo_callback",
    "encode_error",
    "encode_response",
    "handle_line",
    "load_callback",
    "make_http_server",
    "normalize_tracks",
    "parse_request_line",
    "serve",
    "serve_stdio",
    "track_from_video",
]
