"""Trajectory-conditioned victim generators.

Every victim consumes a GenerationRequest and returns point tracks of shape
(T, K, 2) in pixel coordinates. Stochastic victims draw all randomness from
streams derived only from the request seed and array shapes, never from box
coordinates, so paired clean/attacked requests with equal seeds see identical
noise.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .deformation import grid_sample, grid_sample_jacobian, make_roi_grid
from .trajectory import TrajectoryCondition, centers
from .wire import (
    ProtocolError,
    TransportError,
    VictimTimeoutError,
    build_request,
    parse_response,
    parse_response_line,
)


@dataclass(frozen=True)
class GenerationRequest:
    """One victim invocation: a trajectory condition plus sampling controls."""

    trajectory: TrajectoryCondition
    seed: int
    track_points: int = 8
    image_ref: str | None = None

    def __post_init__(self) -> None:
        if self.track_points < 1:
            raise ValueError(f"track_points must be >= 1, got {self.track_points}")


VictimFn = Callable[[GenerationRequest], np.ndarray]


def _victim_streams(seed: int, count: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def faithful_follower(request: GenerationRequest, jitter_sigma: float = 0.0) -> np.ndarray:
    """Tracks centered on the conditioned box centers plus isotropic jitter."""
    rng = _victim_streams(request.seed, 1)[0]
    track_centers = centers(request.trajectory)
    jitter = rng.standard_normal(
        (request.trajectory.frame_count, request.track_points, 2)
    )
    return track_centers[:, None, :] + jitter_sigma * jitter


@dataclass(frozen=True)
class InertialParams:
    """Second-order follower dynamics.

    stiffness pulls the tracked point toward the current box center, damping
    bleeds off velocity, and speed_limit caps per-frame motion (Euclidean
    norm).
    """

    stiffness: float = 0.3
    damping: float = 0.2
    speed_limit: float = 4.0
    jitter_sigma: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.stiffness <= 1.0:
            raise ValueError(f"stiffness must be in (0, 1], got {self.stiffness}")
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError(f"damping must be in [0, 1], got {self.damping}")
        if self.speed_limit <= 0.0:
            raise ValueError(f"speed_limit must be > 0, got {self.speed_limit}")
        if self.jitter_sigma < 0.0:
            raise ValueError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")


def inertial_follower(
    request: GenerationRequest, params: InertialParams = InertialParams()
) -> np.ndarray:
    """Follower with momentum: starts at rest on the first center, then
    integrates a stiffness/damping update with the per-frame speed cap.
    """
    rng = _victim_streams(request.seed, 1)[0]
    frame_count = request.trajectory.frame_count
    jitter = rng.standard_normal((frame_count, request.track_points, 2))

    track_centers = centers(request.trajectory)
    positions = np.empty((frame_count, 2))
    positions[0] = track_centers[0]
    velocity = np.zeros(2)
    for t in range(frame_count - 1):
        pull = params.stiffness * (track_centers[t] - positions[t])
        velocity = velocity + pull - params.damping * velocity
        speed = float(np.linalg.norm(velocity))
        if speed > params.speed_limit:
            velocity = velocity * (params.speed_limit / speed)
        positions[t + 1] = positions[t] + velocity
    return positions[:, None, :] + params.jitter_sigma * jitter


def make_faithful_victim(jitter_sigma: float = 0.0) -> VictimFn:
    def victim(request: GenerationRequest) -> np.ndarray:
        return faithful_follower(request, jitter_sigma)

    return victim


def make_inertial_victim(params: InertialParams = InertialParams()) -> VictimFn:
    def victim(request: GenerationRequest) -> np.ndarray:
        return inertial_follower(request, params)

    return victim


# --- coordinate-field victim -------------------------------------------------
#
# A differentiable stand-in for a real generator. Frame features store their
# own pixel coordinates in channels 0..1 (plus optional noise), so sampling a
# warped grid recovers the warped coordinates and the tracked position is the
# grid-mean of the sampled values.


def coordfield_build(
    trajectory: TrajectoryCondition,
    seed: int,
    height: int,
    width: int,
    channels: int = 2,
    noise_sigma: float = 0.0,
) -> np.ndarray:
    """Per-frame feature volumes of shape (T, height, width, channels)."""
    if height < 2 or width < 2:
        raise ValueError(f"field must be at least 2x2, got {height}x{width}")
    if channels < 2:
        raise ValueError(f"need >= 2 channels for coordinates, got {channels}")
    field_rng = _victim_streams(seed, 2)[0]
    frame_count = trajectory.frame_count
    features = np.zeros((frame_count, height, width, channels))
    xs = np.arange(width, dtype=float)
    ys = np.arange(height, dtype=float)
    features[..., 0] = xs[None, None, :]
    features[..., 1] = ys[None, :, None]
    if noise_sigma > 0.0:
        features += noise_sigma * field_rng.standard_normal(features.shape)
    return features


def _frame_coords(
    trajectory: TrajectoryCondition,
    frame: int,
    grid_shape: tuple[int, int],
    offsets: np.ndarray | None,
    fields: np.ndarray | None,
) -> np.ndarray:
    coords = make_roi_grid(trajectory.boxes[frame], grid_shape[0], grid_shape[1])
    if offsets is not None:
        coords = coords + np.asarray(offsets, dtype=float)[frame]
    if fields is not None:
        coords = coords + np.asarray(fields, dtype=float)[frame]
    return coords


def coordfield_positions(
    features: np.ndarray,
    trajectory: TrajectoryCondition,
    offsets: np.ndarray | None = None,
    fields: np.ndarray | None = None,
    grid_shape: tuple[int, int] = (4, 4),
) -> np.ndarray:
    """Tracked position per frame: grid-mean of sampled coordinate channels."""
    frame_count = trajectory.frame_count
    positions = np.empty((frame_count, 2))
    for t in range(frame_count):
        coords = _frame_coords(trajectory, t, grid_shape, offsets, fields)
        sampled = grid_sample(features[t], coords)[..., :2]
        positions[t] = sampled.reshape(-1, 2).mean(axis=0)
    return positions


def coordfield_position_gradient(
    features: np.ndarray,
    trajectory: TrajectoryCondition,
    offsets: np.ndarray | None = None,
    fields: np.ndarray | None = None,
    grid_shape: tuple[int, int] = (4, 4),
) -> np.ndarray:
    """d position / d per-point displacement, shape (T, gh, gw, 2, 2).

    Entry [t, i, j, c, a] is the derivative of position channel c at frame t
    with respect to coordinate axis a of the displacement applied at grid
    point (i, j).
    """
    frame_count = trajectory.frame_count
    grid_height, grid_width = grid_shape
    out = np.empty((frame_count, grid_height, grid_width, 2, 2))
    scale = 1.0 / (grid_height * grid_width)
    for t in range(frame_count):
        coords = _frame_coords(trajectory, t, grid_shape, offsets, fields)
        jac = grid_sample_jacobian(features[t], coords)[:, :, :2, :]
        out[t] = jac * scale
    return out


def coordfield_align(
    features: np.ndarray,
    trajectory: TrajectoryCondition,
    grid_shape: tuple[int, int] = (4, 4),
    iterations: int = 50,
    step: float = 0.25,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Per-frame offsets minimizing squared distance between tracked position
    and box center, by gradient descent. Frames are independent."""
    frame_count = trajectory.frame_count
    if init is None:
        offsets = np.zeros((frame_count, 2))
    else:
        offsets = np.array(init, dtype=float)
        if offsets.shape != (frame_count, 2):
            raise ValueError(
                f"init must have shape ({frame_count}, 2), got {offsets.shape}"
            )
    target = centers(trajectory)
    for _ in range(iterations):
        positions = coordfield_positions(
            features, trajectory, offsets=offsets, grid_shape=grid_shape
        )
        grads = coordfield_position_gradient(
            features, trajectory, offsets=offsets, grid_shape=grid_shape
        )
        residual = positions - target
        # d L_t / d o_t = 2 r_t . (sum_ij d p_t / d u_t[i,j])
        frame_grad = 2.0 * np.einsum("tc,tijca->ta", residual, grads)
        offsets = offsets - step * frame_grad
    return offsets


def coordfield_generate(
    features: np.ndarray,
    trajectory: TrajectoryCondition,
    request: GenerationRequest,
    offsets: np.ndarray | None = None,
    fields: np.ndarray | None = None,
    grid_shape: tuple[int, int] = (4, 4),
    point_spread: float = 0.0,
) -> np.ndarray:
    positions = coordfield_positions(
        features, trajectory, offsets=offsets, fields=fields, grid_shape=grid_shape
    )
    spread_rng = _victim_streams(request.seed, 2)[1]
    spread = spread_rng.standard_normal(
        (trajectory.frame_count, request.track_points, 2)
    )
    return positions[:, None, :] + point_spread * spread


def make_coordfield_victim(
    height: int | None = None,
    width: int | None = None,
    channels: int = 2,
    noise_sigma: float = 0.0,
    grid_shape: tuple[int, int] = (4, 4),
    align_iterations: int = 50,
    align_step: float = 0.25,
    point_spread: float = 0.0,
) -> VictimFn:
    """Two-stage victim: align offsets against the conditioned trajectory,
    then emit tracks from the aligned field.

    Field dimensions default to the request's frame size; the coordinate
    channels hold pixel indices, so the field has to cover the frame or
    boxes near the far edges would sample clamped values.
    """

    def victim(request: GenerationRequest) -> np.ndarray:
        h = int(round(request.trajectory.frame_height)) if height is None else height
        w = int(round(request.trajectory.frame_width)) if width is None else width
        features = coordfield_build(
            request.trajectory, request.seed, h, w, channels, noise_sigma
        )
        offsets = coordfield_align(
            features,
            request.trajectory,
            grid_shape=grid_shape,
            iterations=align_iterations,
            step=align_step,
        )
        return coordfield_generate(
            features,
            request.trajectory,
            request,
            offsets=offsets,
            grid_shape=grid_shape,
            point_spread=point_spread,
        )

    return victim


# --- external victim over the wire protocol ----------------------------------


class ExternalVictim:
    """Client for a victim reachable over HTTP or a subprocess's stdio.

    Exactly one of url/command must be given. generate() counts one query per
    call regardless of transport retries. Transport failures are retried up
    to `retries` times (stdio restarts the subprocess); timeouts and protocol
    violations are not retried.
    """

    def __init__(
        self,
        url: str | None = None,
        command: str | None = None,
        timeout: float = 120.0,
        retries: int = 2,
    ) -> None:
        if (url is None) == (command is None):
            raise ValueError("give exactly one of url or command")
        if url:
            base = url.rstrip("/")
            if not base.endswith("/generate"):
                base = base + "/generate"
            self.url = base
        else:
            self.url = None
        self.command = command
        self.timeout = timeout
        self.retries = retries
        self.queries_used = 0
        self._counter = 0
        self._proc: subprocess.Popen | None = None
        self._reader: threading.Thread | None = None
        self._cond = threading.Condition()
        self._responses: dict[str, object] = {}
        self._bad_lines: list[str] = []
        self._eof = False

    def __enter__(self) -> "ExternalVictim":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        self._stop_process()

    def generate(self, request: GenerationRequest) -> np.ndarray:
        self.queries_used += 1
        last_error: TransportError | None = None
        for _ in range(self.retries + 1):
            try:
                return self._generate_once(request)
            except VictimTimeoutError:
                raise
            except TransportError as exc:
                last_error = exc
                if self.command is not None:
                    self._stop_process()
        assert last_error is not None
        raise last_error

    def _generate_once(self, request: GenerationRequest) -> np.ndarray:
        self._counter += 1
        request_id = f"q{self._counter}"
        payload = build_request(
            request_id,
            request.trajectory,
            request.seed,
            request.track_points,
            request.image_ref,
        )
        expected = request.trajectory.frame_count
        if self.url is not None:
            return self._http_round_trip(payload, request_id, expected)
        return self._stdio_round_trip(payload, request_id, expected)

    def _http_round_trip(self, payload: dict, request_id: str, expected: int) -> np.ndarray:
        data = json.dumps(payload).encode()
        http_request = urllib.request.Request(
            self.url, data=data, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(http_request, timeout=self.timeout) as resp:
                body = resp.read().decode()
        except urllib.error.HTTPError as exc:
            raise TransportError(f"victim returned HTTP {exc.code}") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                raise VictimTimeoutError(
                    f"no response within {self.timeout}s"
                ) from exc
            raise TransportError(f"victim unreachable: {exc.reason}") from exc
        except (socket.timeout, TimeoutError) as exc:
            raise VictimTimeoutError(f"no response within {self.timeout}s") from exc
        got_id, tracks = parse_response_line(body, expected)
        if got_id != request_id:
            raise ProtocolError(f"response id {got_id!r} does not match {request_id!r}")
        return tracks

    # stdio transport

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is not None and self._proc.poll() is None:
            return self._proc
        self._stop_process()
        self._proc = subprocess.Popen(
            shlex.split(self.command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._eof = False
        self._responses.clear()
        self._bad_lines.clear()
        self._reader = threading.Thread(
            target=self._read_loop, args=(self._proc,), daemon=True
        )
        self._reader.start()
        return self._proc

    def _stop_process(self) -> None:
        proc, self._proc = self._proc, None
        if proc is not None:
            try:
                proc.terminate()
                proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                proc.kill()
        if self._reader is not None:
            self._reader.join(timeout=5)
            self._reader = None

    def _read_loop(self, proc: subprocess.Popen) -> None:
        for line in proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                obj = None
            with self._cond:
                if isinstance(obj, dict) and isinstance(obj.get("id"), str):
                    self._responses[obj["id"]] = obj
                else:
                    self._bad_lines.append(line)
                self._cond.notify_all()
        with self._cond:
            self._eof = True
            self._cond.notify_all()

    def _stdio_round_trip(self, payload: dict, request_id: str, expected: int) -> np.ndarray:
        proc = self._ensure_process()
        line = json.dumps(payload) + "\n"
        try:
            proc.stdin.write(line)
            proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise TransportError(f"victim process rejected input: {exc}") from exc
        deadline = time.monotonic() + self.timeout
        with self._cond:
            while True:
                if request_id in self._responses:
                    obj = self._responses.pop(request_id)
                    break
                if self._bad_lines:
                    raise ProtocolError(
                        f"victim wrote a non-protocol line: {self._bad_lines.pop(0)[:200]}"
                    )
                if self._eof:
                    raise TransportError("victim process closed its output")
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise VictimTimeoutError(f"no response within {self.timeout}s")
                self._cond.wait(remaining)
        _, tracks = parse_response(obj, expected)
        return tracks


def make_external_victim(client: ExternalVictim) -> VictimFn:
    def victim(request: GenerationRequest) -> np.ndarray:
        return client.generate(request)

    return victim
