"""Dependency-free point tracking fallback.

Real adapters should plug in a proper point tracker; this module keeps the
bridge testable without one. It follows a single moving object through a
grayscale frame stack: each frame is differenced against the per-pixel
temporal median (a cheap background estimate), thresholded, and the object
position is the centroid of the changed pixels inside a search window that
trails the object. The requested number of points is the centroid
replicated, so consumers always see a (frames, points, 2) array.

Coordinates are pixel centers: the pixel at column x, row y sits at (x, y).
"""

from __future__ import annotations

import numpy as np


class TrackingError(RuntimeError):
    """The object could not be located in some frame."""


def track_from_video(frames, roi, points: int = 1, threshold=None, search_radius=None):
    """Track the object starting inside `roi` through `frames`.

    frames: (T, H, W) array-like of grayscale intensities.
    roi: (x0, y0, x1, y1) hint locating the object in the first frame.
    points: tracked points returned per frame (centroid copies).
    threshold: difference magnitude that counts as the object; defaults to
        half the peak difference across the stack.
    search_radius: how far past the roi extent the per-frame window reaches;
        defaults to half the larger roi side. Motion faster than this loses
        the track.

    A stack with no differences anywhere is treated as a static scene and
    yields the roi center in every frame. The background estimate needs the
    object to dwell on any one pixel for less than half the clip; footage of
    a slow object corrupts it. Returns float array (T, points, 2).
    """
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 3:
        raise ValueError(f"frames must be a (T, H, W) grayscale stack, got {frames.shape}")
    if points < 1:
        raise ValueError(f"points must be >= 1, got {points}")
    x0, y0, x1, y1 = (float(v) for v in roi)
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"roi needs positive extent, got {roi}")

    frame_count, height, width = frames.shape
    center = np.array([(x0 + x1) / 2.0, (y0 + y1) / 2.0])
    if search_radius is None:
        search_radius = max(x1 - x0, y1 - y0) / 2.0
    half_w = (x1 - x0) / 2.0 + search_radius
    half_h = (y1 - y0) / 2.0 + search_radius

    background = np.median(frames, axis=0)
    diff = np.abs(frames - background)
    peak = float(diff.max())
    if peak <= 1e-12:
        return np.tile(center, (frame_count, points, 1))
    if threshold is None:
        threshold = 0.5 * peak

    cols = np.arange(width)[None, :]
    rows = np.arange(height)[:, None]
    out = np.empty((frame_count, points, 2))
    for t in range(frame_count):
        window = (
            (diff[t] > threshold)
            & (np.abs(cols - center[0]) <= half_w)
            & (np.abs(rows - center[1]) <= half_h)
        )
        if not window.any():
            raise TrackingError(
                f"frame {t}: no changed pixels within {half_w:.1f}x{half_h:.1f} "
                f"of ({center[0]:.1f}, {center[1]:.1f})"
            )
        ys, xs = np.nonzero(window)
        center = np.array([xs.mean(), ys.mean()])
        out[t] = center
    return out
