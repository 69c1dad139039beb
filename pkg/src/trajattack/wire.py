"""Victim wire protocol: newline-delimited JSON requests and responses.

Request:  {"id": str, "frame_width": int, "frame_height": int,
           "boxes": [[x0, y0, x1, y1] * T], "seed": int,
           "track_points": int, "image_ref": str-or-null}
Response: {"id": str, "tracks": [[[x, y] * K] * T]}
          or {"id": str, "error": str}

One request per line over stdio; one request per POST body over HTTP
(endpoint path /generate). Responses may arrive in any order and are matched
by id. All numbers are decimal.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from .trajectory import BoundingBox, TrajectoryCondition

REQUEST_FIELDS = frozenset(
    {"id", "frame_width", "frame_height", "boxes", "seed", "track_points", "image_ref"}
)


class TransportError(RuntimeError):
    """Connection-level failure; safe to retry."""


class VictimTimeoutError(TransportError):
    """No response within the configured timeout; not retried."""


class ProtocolError(RuntimeError):
    """Payload violates the wire schema or reports a victim-side error."""


def _excerpt(payload) -> str:
    text = payload if isinstance(payload, str) else json.dumps(payload)
    return text[:200]


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class WireRequest:
    request_id: str
    trajectory: TrajectoryCondition
    seed: int
    track_points: int
    image_ref: str | None


def build_request(
    request_id: str,
    trajectory: TrajectoryCondition,
    seed: int,
    track_points: int,
    image_ref: str | None = None,
) -> dict:
    return {
        "id": request_id,
        "frame_width": trajectory.frame_width,
        "frame_height": trajectory.frame_height,
        "boxes": [[b.x0, b.y0, b.x1, b.y1] for b in trajectory.boxes],
        "seed": int(seed),
        "track_points": int(track_points),
        "image_ref": image_ref,
    }


def parse_request(obj) -> WireRequest:
    """Validate a decoded request object; raises ProtocolError with an excerpt."""
    if not isinstance(obj, dict):
        raise ProtocolError(f"request must be an object: {_excerpt(obj)}")
    if not isinstance(obj.get("id"), str):
        raise ProtocolError(f"request id must be a string: {_excerpt(obj)}")
    missing = REQUEST_FIELDS - obj.keys()
    if missing:
        raise ProtocolError(f"request missing fields {sorted(missing)}: {_excerpt(obj)}")
    unknown = obj.keys() - REQUEST_FIELDS
    if unknown:
        raise ProtocolError(f"request has unknown fields {sorted(unknown)}: {_excerpt(obj)}")
    if not (_is_number(obj["frame_width"]) and _is_number(obj["frame_height"])):
        raise ProtocolError(f"frame dimensions must be numbers: {_excerpt(obj)}")
    if not isinstance(obj["seed"], int) or isinstance(obj["seed"], bool):
        raise ProtocolError(f"seed must be an integer: {_excerpt(obj)}")
    if not isinstance(obj["track_points"], int) or obj["track_points"] < 1:
        raise ProtocolError(f"track_points must be a positive integer: {_excerpt(obj)}")
    if obj["image_ref"] is not None and not isinstance(obj["image_ref"], str):
        raise ProtocolError(f"image_ref must be a string or null: {_excerpt(obj)}")
    boxes_raw = obj["boxes"]
    if not isinstance(boxes_raw, list) or not boxes_raw:
        raise ProtocolError(f"boxes must be a non-empty list: {_excerpt(obj)}")
    boxes = []
    for t, entry in enumerate(boxes_raw):
        if not (
            isinstance(entry, list) and len(entry) == 4 and all(_is_number(v) for v in entry)
        ):
            raise ProtocolError(f"frame {t}: box must be 4 numbers: {_excerpt(entry)}")
        try:
            boxes.append(BoundingBox(*[float(v) for v in entry]))
        except ValueError as exc:
            raise ProtocolError(f"frame {t}: {exc}") from exc
    try:
        trajectory = TrajectoryCondition(
            float(obj["frame_width"]), float(obj["frame_height"]), tuple(boxes)
        )
    except ValueError as exc:
        raise ProtocolError(f"invalid trajectory: {exc}") from exc
    return WireRequest(
        request_id=obj["id"],
        trajectory=trajectory,
        seed=obj["seed"],
        track_points=obj["track_points"],
        image_ref=obj["image_ref"],
    )


def parse_request_line(line: str) -> WireRequest:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed request JSON ({exc.msg}): {_excerpt(line)}") from exc
    return parse_request(obj)


def build_response(request_id: str, tracks: np.ndarray) -> dict:
    tracks = np.asarray(tracks, dtype=float)
    return {"id": request_id, "tracks": tracks.tolist()}


def build_error_response(request_id: str, message: str) -> dict:
    return {"id": request_id, "error": str(message)}


def parse_response(obj, expected_frames: int | None = None) -> tuple[str, np.ndarray]:
    """Validate a decoded response; returns (id, tracks array of shape (T, K, 2)).

    A well-formed error response raises ProtocolError carrying the victim's
    message.
    """
    if not isinstance(obj, dict):
        raise ProtocolError(f"response must be an object: {_excerpt(obj)}")
    request_id = obj.get("id")
    if not isinstance(request_id, str):
        raise ProtocolError(f"response id must be a string: {_excerpt(obj)}")
    if "error" in obj:
        raise ProtocolError(f"victim reported error for {request_id!r}: {obj['error']}")
    if set(obj.keys()) != {"id", "tracks"}:
        raise ProtocolError(f"response fields must be id+tracks or id+error: {_excerpt(obj)}")
    raw = obj["tracks"]
    if not isinstance(raw, list) or not raw:
        raise ProtocolError(f"tracks must be a non-empty list: {_excerpt(obj)}")
    if expected_frames is not None and len(raw) != expected_frames:
        raise ProtocolError(
            f"response has {len(raw)} frames, request had {expected_frames}"
        )
    k = None
    for t, frame in enumerate(raw):
        if not isinstance(frame, list) or not frame:
            raise ProtocolError(f"frame {t}: points must be a non-empty list: {_excerpt(frame)}")
        if k is None:
            k = len(frame)
        elif len(frame) != k:
            raise ProtocolError(
                f"frame {t} has {len(frame)} points, frame 0 has {k}: {_excerpt(frame)}"
            )
        for point in frame:
            if not (
                isinstance(point, list)
                and len(point) == 2
                and all(_is_number(v) for v in point)
            ):
                raise ProtocolError(f"frame {t}: point must be 2 numbers: {_excerpt(point)}")
    tracks = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(tracks)):
        raise ProtocolError(f"tracks contain non-finite values: {_excerpt(obj)}")
    return request_id, tracks


def parse_response_line(line: str, expected_frames: int | None = None) -> tuple[str, np.ndarray]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed response JSON ({exc.msg}): {_excerpt(line)}") from exc
    return parse_response(obj, expected_frames)
