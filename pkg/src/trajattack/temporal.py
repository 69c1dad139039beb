"""Temporal structure of the attack: DCT basis, control codes, integration.

Velocity and displacement tracks are plain float64 arrays of shape (T, d),
frame index along axis 0. Frame t's displacement is the running sum of
velocities up to and including t, accumulated in ascending frame order so
results are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TemporalBasis:
    """Orthonormal DCT-II basis over `frame_count` frames, first `mode_count` modes.

    `matrix` has shape (frame_count, mode_count); column j is mode j. Column 0
    is the constant vector 1/sqrt(T).
    """

    frame_count: int
    mode_count: int
    matrix: np.ndarray


@dataclass(frozen=True)
class ControlCoefficients:
    """Per-mode coefficients mapping basis modes to per-frame control codes.

    `values` has shape (axis_count, mode_count), in pixels/frame per unit
    basis value.
    """

    axis_count: int
    mode_count: int
    values: np.ndarray

    @classmethod
    def from_values(cls, values: np.ndarray) -> "ControlCoefficients":
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"coefficient values must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficient values must be finite")
        return cls(axis_count=values.shape[0], mode_count=values.shape[1], values=values)


def build_dct_basis(frame_count: int, mode_count: int) -> TemporalBasis:
    """Build the orthonormal DCT-II temporal basis.

    Entry (t, j) = w_j * cos(pi * (2t+1) * j / (2T)) with w_0 = 1/sqrt(T) and
    w_j = sqrt(2/T) for j >= 1.
    """
    if frame_count < 1:
        raise ValueError(f"frame_count must be positive, got {frame_count}")
    if not 1 <= mode_count <= frame_count:
        raise ValueError(
            f"mode_count must satisfy 1 <= mode_count <= frame_count, "
            f"got mode_count={mode_count}, frame_count={frame_count}"
        )
    t = np.arange(frame_count)
    j = np.arange(mode_count)
    matrix = np.cos(np.pi * np.outer(2 * t + 1, j) / (2.0 * frame_count))
    weights = np.full(mode_count, np.sqrt(2.0 / frame_count))
    weights[0] = np.sqrt(1.0 / frame_count)
    matrix *= weights
    return TemporalBasis(frame_count=frame_count, mode_count=mode_count, matrix=matrix)


def evaluate_codes(coeffs: ControlCoefficients, basis: TemporalBasis) -> np.ndarray:
    """Evaluate per-frame control codes: frame t's code is coeffs.values @ basis row t.

    Returns a (frame_count, axis_count) velocity track.
    """
    if coeffs.mode_count != basis.mode_count:
        raise ValueError(
            f"mode count mismatch: coefficients have {coeffs.mode_count}, "
            f"basis has {basis.mode_count}"
        )
    return basis.matrix @ coeffs.values.T


def integrate(velocities: np.ndarray) -> np.ndarray:
    """Accumulate a velocity track into a displacement track (ascending frame order)."""
    velocities = np.asarray(velocities, dtype=float)
    if velocities.size == 0:
        raise ValueError("cannot integrate an empty track")
    return np.cumsum(velocities, axis=0)


def differentiate(displacements: np.ndarray) -> np.ndarray:
    """First temporal difference; exact inverse of `integrate` up to float rounding.

    Frame 0's velocity equals frame 0's displacement.
    """
    displacements = np.asarray(displacements, dtype=float)
    if displacements.size == 0:
        raise ValueError("cannot differentiate an empty track")
    out = displacements.copy()
    out[1:] = displacements[1:] - displacements[:-1]
    return out
