"""Built-in adapter callbacks and the CLI's callback loader."""

from __future__ import annotations

import importlib

from .protocol import Task


def echo_callback(task: Task) -> list:
    """The perfectly obedient generator: tracks pinned to the box centers.

    Matches the toolkit's in-process faithful victim with zero jitter, which
    makes it the reference point for transport conformance checks.
    """
    frames = []
    for x0, y0, x1, y1 in task.boxes:
        point = [(x0 + x1) / 2.0, (y0 + y1) / 2.0]
        frames.append([list(point) for _ in range(task.track_points)])
    return frames


def load_callback(spec: str):
    """Resolve a callback name: 'echo' or 'package.module:function'."""
    if spec == "echo":
        return echo_callback
    module_name, sep, attr = spec.partition(":")
    if not sep or not module_name or not attr:
        raise ValueError(f"callback must be 'echo' or 'module:function', got {spec!r}")
    module = importlib.import_module(module_name)
    try:
        callback = getattr(module, attr)
    except AttributeError as exc:
        raise ValueError(f"module {module_name!r} has no attribute {attr!r}") from exc
    if not callable(callback):
        raise ValueError(f"{spec!r} is not callable")
    return callback
