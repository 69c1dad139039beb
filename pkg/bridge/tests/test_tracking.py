import numpy as np
import pytest

from victim_bridge.tracking import TrackingError, track_from_video

SIDE = 9


def render_square(positions, height=64, width=64, value=1.0):
    """White SIDE x SIDE square on black, top-left corner rounded per frame."""
    frames = np.zeros((len(positions), height, width))
    for t, (px, py) in enumerate(positions):
        x, y = int(round(px)), int(round(py))
        frames[t, y : y + SIDE, x : x + SIDE] = value
    return frames


def square_roi(px, py):
    return (px, py, px + SIDE, py + SIDE)


def true_centers(positions):
    # pixel-center convention: a square whose lit pixels span x..x+SIDE-1
    # has its centroid at x + (SIDE - 1) / 2
    return np.array([(px + (SIDE - 1) / 2, py + (SIDE - 1) / 2) for px, py in positions])


def test_moving_square_tracked_within_one_pixel():
    # steps large enough that no pixel is covered half the clip (the
    # background median must stay clean), fractional so rounding bites
    positions = [(10.0 + 4.3 * t, 14.0 + 3.4 * t) for t in range(8)]
    frames = render_square(positions)
    tracks = track_from_video(frames, square_roi(*positions[0]), points=4)
    assert tracks.shape == (8, 4, 2)
    errors = np.linalg.norm(tracks[:, 0, :] - true_centers(positions), axis=1)
    assert errors.max() <= 1.0


def test_static_video_reports_zero_motion():
    frames = render_square([(20.0, 20.0)] * 6)
    tracks = track_from_video(frames, square_roi(20.0, 20.0), points=2)
    assert np.ptp(tracks, axis=0).max() == 0.0
    center = (20.0 + SIDE / 2.0, 20.0 + SIDE / 2.0)
    assert np.array_equal(tracks[0, 0], np.array(center))


def test_points_are_centroid_copies():
    positions = [(10.0 + 9.0 * t, 12.0) for t in range(5)]
    frames = render_square(positions)
    single = track_from_video(frames, square_roi(*positions[0]), points=1, search_radius=14.0)
    many = track_from_video(frames, square_roi(*positions[0]), points=7, search_radius=14.0)
    assert single.shape == (5, 1, 2)
    assert many.shape == (5, 7, 2)
    assert np.array_equal(many, np.repeat(single, 7, axis=1))


def test_teleporting_object_loses_the_track():
    positions = [(8.0, 8.0), (10.0, 9.0), (48.0, 44.0), (50.0, 45.0)]
    frames = render_square(positions)
    with pytest.raises(TrackingError, match="frame 2"):
        track_from_video(frames, square_roi(8.0, 8.0))


def test_explicit_threshold_and_search_radius():
    positions = [(10.0 + 5.0 * t, 10.0) for t in range(6)]
    frames = render_square(positions, value=0.2)
    tracks = track_from_video(
        frames, square_roi(*positions[0]), threshold=0.05, search_radius=12.0
    )
    errors = np.linalg.norm(tracks[:, 0, :] - true_centers(positions), axis=1)
    assert errors.max() <= 1.0


@pytest.mark.parametrize(
    "kwargs, fragment",
    [
        ({"frames": np.zeros((4, 8)), "roi": (0, 0, 2, 2)}, "grayscale stack"),
        ({"frames": np.zeros((4, 8, 8)), "roi": (3, 3, 3, 5)}, "positive extent"),
        ({"frames": np.zeros((4, 8, 8)), "roi": (0, 0, 2, 2), "points": 0}, ">= 1"),
    ],
)
def test_argument_validation(kwargs, fragment):
    with pytest.raises(ValueError, match=fragment):
        track_from_video(**kwargs)
