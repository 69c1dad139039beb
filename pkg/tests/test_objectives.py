"""Objective and metric arithmetic on hand-computable cases."""

import numpy as np
import pytest

from conftest import condition_from_centers, straight_condition
from trajattack.objectives import (
    EvalRecord,
    MotionEstimate,
    compute_asr,
    estimate_motion,
    objmc_metric,
    objmc_objective,
)
from trajattack.trajectory import centers, reference_velocities


def tracks_from_positions(positions, track_points=3):
    return np.repeat(np.asarray(positions, dtype=float)[:, None, :], track_points, axis=1)


def test_estimate_motion_shapes(line_condition):
    tracks = tracks_from_positions(centers(line_condition))
    estimate = estimate_motion(tracks)
    assert isinstance(estimate, MotionEstimate)
    assert estimate.positions.shape == (8, 2)
    assert estimate.velocities.shape == (7, 2)
    assert np.allclose(estimate.velocities, [[3.0, 2.0]] * 7)


def test_estimate_motion_validation():
    with pytest.raises(ValueError, match=r"\(T, K, 2\)"):
        estimate_motion(np.zeros((8, 2)))
    with pytest.raises(ValueError, match="at least 2 frames"):
        estimate_motion(np.zeros((1, 4, 2)))


def test_velocity_objective_hand_value(line_condition):
    # every step is off by (3, 4): mean deviation is exactly 5
    positions = centers(line_condition) + np.arange(8)[:, None] * np.array([3.0, 4.0])
    estimate = estimate_motion(tracks_from_positions(positions))
    assert objmc_objective(estimate, reference_velocities(line_condition)) == pytest.approx(5.0)
    on_track = estimate_motion(tracks_from_positions(centers(line_condition)))
    assert objmc_objective(on_track, reference_velocities(line_condition)) == 0.0


def test_position_metric_hand_value(line_condition):
    # constant (3, 4) offset from every center: mean distance is exactly 5
    tracks = tracks_from_positions(centers(line_condition) + np.array([3.0, 4.0]))
    assert objmc_metric(tracks, line_condition) == pytest.approx(5.0)
    assert objmc_metric(tracks_from_positions(centers(line_condition)), line_condition) == 0.0


def test_metric_frame_count_mismatch(line_condition):
    tracks = tracks_from_positions(centers(line_condition))[:5]
    with pytest.raises(ValueError, match="position shapes differ"):
        objmc_metric(tracks, line_condition)


def test_success_is_strict():
    condition = straight_condition(frame_count=4)
    base = dict(instance=0, queries_used=10, budget_used=2.0)
    assert EvalRecord(objmc_clean=1.0, objmc_attack=1.5, **base).success
    assert not EvalRecord(objmc_clean=1.0, objmc_attack=1.0, **base).success
    assert not EvalRecord(objmc_clean=0.0, objmc_attack=0.0, **base).success
    assert not EvalRecord(objmc_clean=2.0, objmc_attack=1.0, **base).success
    del condition


def test_compute_asr():
    def record(clean, attack, incomplete=False):
        return EvalRecord(
            instance=0,
            objmc_clean=clean,
            objmc_attack=attack,
            queries_used=1,
            budget_used=0.0,
            incomplete=incomplete,
        )

    records = [record(1.0, 2.0), record(1.0, 0.5), record(0.5, 3.0), record(2.0, 2.0)]
    assert compute_asr(records) == pytest.approx(0.5)
    with pytest.raises(ValueError, match="no records"):
        compute_asr([])


def test_zero_offset_centered_tracks_cancel():
    condition = condition_from_centers([(50.0, 50.0), (60.0, 50.0), (70.0, 50.0)])
    positions = centers(condition)
    # two points placed symmetrically about each center average out exactly
    tracks = np.stack([positions + [0.0, 2.0], positions - [0.0, 2.0]], axis=1)
    assert objmc_metric(tracks, condition) == 0.0
