"""Bounding-box trajectory conditions, perturbation clamping, and file I/O.

Coordinates are pixels with x to the right and y downward. Displacement
vectors are (dx, dy) arrays matching that order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class TrajectoryFormatError(ValueError):
    """Raised when a trajectory file cannot be parsed or violates invariants."""


@dataclass(frozen=True)
class BoundingBox:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"bounding box field {name} is not a finite number")
            object.__setattr__(self, name, float(value))
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(
                f"degenerate bounding box ({self.x0}, {self.y0}, {self.x1}, {self.y1}): "
                "requires x0 < x1 and y0 < y1"
            )

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


@dataclass(frozen=True)
class TrajectoryCondition:
    """Per-frame bounding boxes plus frame dimensions; the conditioned control signal."""

    frame_width: float
    frame_height: float
    boxes: tuple[BoundingBox, ...]

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        for name in ("frame_width", "frame_height"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if len(self.boxes) < 2:
            raise ValueError(f"a trajectory needs at least 2 frames, got {len(self.boxes)}")
        for t, box in enumerate(self.boxes):
            if box.x0 < 0 or box.y0 < 0 or box.x1 > self.frame_width or box.y1 > self.frame_height:
                raise ValueError(
                    f"frame {t}: box ({box.x0}, {box.y0}, {box.x1}, {box.y1}) lies outside "
                    f"the {self.frame_width}x{self.frame_height} frame"
                )

    @property
    def frame_count(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True)
class PerturbationBudget:
    """Per-axis cap on the per-frame trajectory displacement, in pixels.

    eps_max = 0 is allowed as the degenerate no-perturbation budget.
    """

    eps_max: float

    def __post_init__(self):
        if not (math.isfinite(self.eps_max) and self.eps_max >= 0):
            raise ValueError(f"eps_max must be finite and >= 0, got {self.eps_max}")


def centers(traj: TrajectoryCondition) -> np.ndarray:
    """Per-frame box midpoints, shape (T, 2)."""
    return np.array([box.center for box in traj.boxes], dtype=float)


def reference_velocities(traj: TrajectoryCondition) -> np.ndarray:
    """Frame-to-frame center differences, shape (T-1, 2)."""
    c = centers(traj)
    return c[1:] - c[:-1]


def apply_delta(
    traj: TrajectoryCondition, displacements: np.ndarray, budget: PerturbationBudget
) -> TrajectoryCondition:
    """Translate each box by its clamped displacement, keeping it inside the frame.

    Each per-frame displacement is clamped componentwise to [-eps_max, eps_max],
    then clamped further so the translated box stays inside the frame. Box
    sizes are preserved.
    """
    displacements = np.asarray(displacements, dtype=float)
    if displacements.shape != (traj.frame_count, 2):
        raise ValueError(
            f"displacement track shape {displacements.shape} does not match "
            f"(frame_count, 2) = ({traj.frame_count}, 2)"
        )
    clamped = np.clip(displacements, -budget.eps_max, budget.eps_max)
    boxes = []
    for box, (dx, dy) in zip(traj.boxes, clamped):
        dx = min(max(dx, -box.x0), traj.frame_width - box.x1)
        dy = min(max(dy, -box.y0), traj.frame_height - box.y1)
        boxes.append(BoundingBox(box.x0 + dx, box.y0 + dy, box.x1 + dx, box.y1 + dy))
    return TrajectoryCondition(traj.frame_width, traj.frame_height, tuple(boxes))


def save_trajectory(traj: TrajectoryCondition, path: str | Path) -> None:
    doc = {
        "frame_width": traj.frame_width,
        "frame_height": traj.frame_height,
        "boxes": [[b.x0, b.y0, b.x1, b.y1] for b in traj.boxes],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_trajectory(path: str | Path) -> TrajectoryCondition:
    """Load a trajectory JSON file, validating schema and invariants."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TrajectoryFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise TrajectoryFormatError(f"{path}: expected a JSON object, got {type(doc).__name__}")
    missing = {"frame_width", "frame_height", "boxes"} - doc.keys()
    if missing:
        raise TrajectoryFormatError(f"{path}: missing fields {sorted(missing)}")
    unknown = doc.keys() - {"frame_width", "frame_height", "boxes"}
    if unknown:
        raise TrajectoryFormatError(f"{path}: unknown fields {sorted(unknown)}")
    raw_boxes = doc["boxes"]
    if not isinstance(raw_boxes, list):
        raise TrajectoryFormatError(f"{path}: 'boxes' must be a list")
    boxes = []
    for t, entry in enumerate(raw_boxes):
        if not (isinstance(entry, list) and len(entry) == 4):
            raise TrajectoryFormatError(f"{path}: frame {t}: box must be a list of 4 numbers")
        try:
            boxes.append(BoundingBox(*[float(v) for v in entry]))
        except (TypeError, ValueError) as exc:
            raise TrajectoryFormatError(f"{path}: frame {t}: {exc}") from exc
    try:
        return TrajectoryCondition(float(doc["frame_width"]), float(doc["frame_height"]), tuple(boxes))
    except (TypeError, ValueError) as exc:
        raise TrajectoryFormatError(f"{path}: {exc}") from exc


MOTION_FAMILIES = ("linear", "arc", "sinusoid")

_EDGE_MARGIN = 20.0  # room left between box and frame edge so perturbations are not frame-clamped
_MAX_STEP = 10.0


def generate_instances(
    count: int,
    frame_count: int,
    frame_width: float,
    frame_height: float,
    motion_family: str,
    seed: int,
    speed_range: tuple[float, float] = (1.0, 5.0),
) -> list[TrajectoryCondition]:
    """Procedurally generate valid trajectory instances, deterministic per seed.

    Per-frame center motion stays below 10 px and boxes keep a margin from the
    frame border so budgeted perturbations are not silently frame-clamped.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if motion_family not in MOTION_FAMILIES:
        raise ValueError(
            f"unknown motion family {motion_family!r}; expected one of {MOTION_FAMILIES}"
        )
    instances = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        instances.append(
            _generate_one(rng, frame_count, frame_width, frame_height, motion_family, speed_range)
        )
    return instances


def _generate_one(rng, frame_count, frame_width, frame_height, family, speed_range):
    half_w = rng.uniform(16.0, 28.0)
    half_h = rng.uniform(16.0, 28.0)
    t = np.arange(frame_count, dtype=float)
    for _ in range(64):
        speed = rng.uniform(*speed_range)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        direction = np.array([np.cos(angle), np.sin(angle)])
        if family == "linear":
            path = t[:, None] * speed * direction
        elif family == "arc":
            radius = rng.uniform(30.0, 90.0)
            omega = speed / radius
            phase = rng.uniform(0.0, 2.0 * np.pi)
            sweep = phase + omega * t
            path = radius * np.stack([np.cos(sweep), np.sin(sweep)], axis=1)
        else:  # sinusoid
            period = rng.uniform(6.0, float(frame_count))
            # cap transverse speed so total per-frame motion stays under _MAX_STEP
            amp_cap = (_MAX_STEP - speed) * period / (2.0 * np.pi)
            amplitude = rng.uniform(4.0, max(4.0 + 1e-6, min(18.0, amp_cap)))
            perp = np.array([-direction[1], direction[0]])
            path = (
                t[:, None] * speed * direction
                + amplitude * np.sin(2.0 * np.pi * t / period)[:, None] * perp
            )
        path = path - path[0]
        lo = path.min(axis=0)
        hi = path.max(axis=0)
        xmin = _EDGE_MARGIN + half_w - lo[0]
        xmax = frame_width - _EDGE_MARGIN - half_w - hi[0]
        ymin = _EDGE_MARGIN + half_h - lo[1]
        ymax = frame_height - _EDGE_MARGIN - half_h - hi[1]
        if xmin > xmax or ymin > ymax:
            continue  # path does not fit; redraw motion parameters
        start = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        c = start + path
        boxes = tuple(
            BoundingBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h) for cx, cy in c
        )
        return TrajectoryCondition(frame_width, frame_height, boxes)
    raise RuntimeError(
        f"could not fit a {family} path in a {frame_width}x{frame_height} frame "
        f"after 64 attempts"
    )
