"""Motion objectives and evaluation metrics over generated point tracks.

Two distinct quantities share the "object motion" idea and must not be
confused: objmc_objective is the velocity-deviation scalar the attacks
maximize, while objmc_metric is the position-error scalar campaigns report
and the success ratio compares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trajectory import TrajectoryCondition, centers


@dataclass(frozen=True)
class MotionEstimate:
    """Per-frame mean position (T, 2) and per-step velocity (T - 1, 2)."""

    positions: np.ndarray
    velocities: np.ndarray


def estimate_motion(tracks: np.ndarray) -> MotionEstimate:
    tracks = np.asarray(tracks, dtype=float)
    if tracks.ndim != 3 or tracks.shape[2] != 2:
        raise ValueError(f"tracks must have shape (T, K, 2), got {tracks.shape}")
    if tracks.shape[0] < 2:
        raise ValueError(f"need at least 2 frames, got {tracks.shape[0]}")
    positions = tracks.mean(axis=1)
    velocities = np.diff(positions, axis=0)
    return MotionEstimate(positions=positions, velocities=velocities)


def objmc_objective(estimate: MotionEstimate, reference_velocities: np.ndarray) -> float:
    """Mean Euclidean distance between estimated and reference velocities.

    Larger means the generated motion strays further from the conditioned
    motion; attacks maximize this.
    """
    reference = np.asarray(reference_velocities, dtype=float)
    if estimate.velocities.shape != reference.shape:
        raise ValueError(
            f"velocity shapes differ: {estimate.velocities.shape} vs {reference.shape}"
        )
    return float(np.linalg.norm(estimate.velocities - reference, axis=1).mean())


def objmc_metric(tracks: np.ndarray, reference: TrajectoryCondition) -> float:
    """Mean Euclidean distance between tracked positions and the reference
    box centers. This is the reported evaluation metric; campaigns compare
    it between clean and attacked runs."""
    estimate = estimate_motion(tracks)
    target = centers(reference)
    if estimate.positions.shape != target.shape:
        raise ValueError(
            f"position shapes differ: {estimate.positions.shape} vs {target.shape}"
        )
    return float(np.linalg.norm(estimate.positions - target, axis=1).mean())


@dataclass(frozen=True)
class EvalRecord:
    """Clean/attacked comparison for one instance under paired seeds.

    objmc_clean and objmc_attack are position metrics against the clean
    trajectory's centers. budget_used is the largest per-frame per-axis box
    displacement actually applied. incomplete marks attacks aborted by
    victim failures; such records are excluded from success-rate denominators.
    """

    instance: int
    objmc_clean: float
    objmc_attack: float
    queries_used: int
    budget_used: float
    incomplete: bool = False

    @property
    def success(self) -> bool:
        return self.objmc_attack > self.objmc_clean


def compute_asr(records: list[EvalRecord]) -> float:
    """Fraction of records whose attacked metric strictly exceeds clean.

    The strict inequality settles the zero edge cases: clean = 0 with
    attack > 0 succeeds, 0 vs 0 fails.
    """
    if not records:
        raise ValueError("no records to aggregate")
    return sum(1 for r in records if r.success) / len(records)
