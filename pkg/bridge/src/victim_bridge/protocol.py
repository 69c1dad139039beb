"""Wire schema shared with the attack toolkit's victim client.

Requests and responses are single JSON objects, one per stdio line or HTTP
POST body, matched by id:

    request   {"id": "q0", "frame_width": 256.0, "frame_height": 256.0,
               "boxes": [[x0, y0, x1, y1], ...], "seed": 7,
               "track_points": 8, "image_ref": null}
    response  {"id": "q0", "tracks": [[[x, y], ...K points], ...T frames]}
              {"id": "q0", "error": "what went wrong"}

The authoritative schema lives in the toolkit; this is an independent
serving-side implementation so the bridge carries no toolkit import. The
checks mirror the client's: exact field set, finite numbers, at least two
frames, non-degenerate boxes that stay inside the frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

REQUEST_FIELDS = frozenset(
    {"id", "frame_width", "frame_height", "boxes", "seed", "track_points", "image_ref"}
)


class RequestError(ValueError):
    """Incoming request violates the wire schema."""


def _clip(payload) -> str:
    text = payload if isinstance(payload, str) else json.dumps(payload)
    return text[:200]


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class Task:
    """One validated generation request, as handed to an adapter callback."""

    request_id: str
    frame_width: float
    frame_height: float
    boxes: tuple[tuple[float, float, float, float], ...]
    seed: int
    track_points: int
    image_ref: str | None

    @property
    def frame_count(self) -> int:
        return len(self.boxes)

    def box_centers(self) -> np.ndarray:
        """Midpoints of the conditioning boxes, shape (T, 2)."""
        return np.array(
            [((x0 + x1) / 2.0, (y0 + y1) / 2.0) for x0, y0, x1, y1 in self.boxes]
        )


def parse_request(obj) -> Task:
    if not isinstance(obj, dict):
        raise RequestError(f"request must be a JSON object: {_clip(obj)}")
    if not isinstance(obj.get("id"), str):
        raise RequestError(f"request id must be a string: {_clip(obj)}")
    missing = REQUEST_FIELDS - obj.keys()
    if missing:
        raise RequestError(f"request missing fields {sorted(missing)}: {_clip(obj)}")
    unknown = obj.keys() - REQUEST_FIELDS
    if unknown:
        raise RequestError(f"request has unknown fields {sorted(unknown)}: {_clip(obj)}")

    width, height = obj["frame_width"], obj["frame_height"]
    for name, value in (("frame_width", width), ("frame_height", height)):
        if not _is_number(value) or not math.isfinite(value) or value <= 0:
            raise RequestError(f"{name} must be a positive number: {_clip(obj)}")
    if not isinstance(obj["seed"], int) or isinstance(obj["seed"], bool):
        raise RequestError(f"seed must be an integer: {_clip(obj)}")
    points = obj["track_points"]
    if not isinstance(points, int) or isinstance(points, bool) or points < 1:
        raise RequestError(f"track_points must be a positive integer: {_clip(obj)}")
    if obj["image_ref"] is not None and not isinstance(obj["image_ref"], str):
        raise RequestError(f"image_ref must be a string or null: {_clip(obj)}")

    raw_boxes = obj["boxes"]
    if not isinstance(raw_boxes, list) or len(raw_boxes) < 2:
        raise RequestError(f"boxes must list at least 2 frames: {_clip(obj)}")
    boxes = []
    for t, entry in enumerate(raw_boxes):
        if not (
            isinstance(entry, list)
            and len(entry) == 4
            and all(_is_number(v) and math.isfinite(v) for v in entry)
        ):
            raise RequestError(f"frame {t}: box must be 4 finite numbers: {_clip(entry)}")
        x0, y0, x1, y1 = (float(v) for v in entry)
        if not (x0 < x1 and y0 < y1):
            raise RequestError(f"frame {t}: degenerate box {entry}")
        if x0 < 0 or y0 < 0 or x1 > width or y1 > height:
            raise RequestError(
                f"frame {t}: box {entry} lies outside the {width}x{height} frame"
            )
        boxes.append((x0, y0, x1, y1))

    return Task(
        request_id=obj["id"],
        frame_width=float(width),
        frame_height=float(height),
        boxes=tuple(boxes),
        seed=obj["seed"],
        track_points=points,
        image_ref=obj["image_ref"],
    )


def parse_request_line(line: str) -> Task:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RequestError(f"request is not valid JSON ({exc.msg}): {_clip(line)}") from exc
    return parse_request(obj)


def salvage_id(line: str) -> str:
    """Best-effort request id for error responses to unparseable requests."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return ""
    if isinstance(obj, dict) and isinstance(obj.get("id"), str):
        return obj["id"]
    return ""


def normalize_tracks(tracks, expected_frames: int) -> list:
    """Validate adapter output into response-ready nested lists.

    Anything that is not a finite (expected_frames, K>=1, 2) array is
    rejected with ValueError; the server turns that into an error response
    instead of forwarding bad tracks to the client.
    """
    try:
        arr = np.asarray(tracks, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"tracks are not a rectangular numeric array: {exc}") from exc
    if arr.ndim != 3 or arr.shape[1] < 1 or arr.shape[2] != 2:
        raise ValueError(f"tracks must have shape (frames, points, 2), got {arr.shape}")
    if arr.shape[0] != expected_frames:
        raise ValueError(
            f"callback returned {arr.shape[0]} frames for a "
            f"{expected_frames}-frame request"
        )
    if not np.isfinite(arr).all():
        raise ValueError("tracks contain non-finite values")
    return arr.tolist()


def encode_response(request_id: str, tracks: list) -> str:
    return json.dumps({"id": request_id, "tracks": tracks})


def encode_error(request_id: str, message: str) -> str:
    return json.dumps({"id": request_id, "error": str(message)})
