import numpy as np
import pytest

from trajattack.trajectory import BoundingBox, TrajectoryCondition


def condition_from_centers(points, half=10.0, frame_width=256.0, frame_height=256.0):
    """TrajectoryCondition with a square box of the given half-size centered
    on each point."""
    boxes = tuple(
        BoundingBox(cx - half, cy - half, cx + half, cy + half) for cx, cy in points
    )
    return TrajectoryCondition(frame_width, frame_height, boxes)


def straight_condition(frame_count=8, start=(60.0, 60.0), step=(3.0, 2.0), half=10.0):
    """Constant-velocity condition, handy when a test needs known reference
    velocities."""
    points = [
        (start[0] + t * step[0], start[1] + t * step[1]) for t in range(frame_count)
    ]
    return condition_from_centers(points, half=half)


@pytest.fixture
def line_condition():
    return straight_condition()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
