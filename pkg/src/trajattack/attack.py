"""Trajectory perturbation attacks.

Both attacks search for per-frame box displacements that pull the victim's
generated motion away from the conditioned motion, maximizing the velocity
objective in `objectives`. The white-box attack differentiates through a
coordinate-field victim; the black-box attack estimates gradients from paired
victim queries.

Parameterizations share three ablation modes:

* ``full``: coefficients weight a low-frequency cosine basis over time,
  producing velocities that integrate into displacements.
* ``no_temporal_coupling``: one free displacement vector per frame, no basis
  and no integration.
* ``no_temporal_integration``: basis coefficients are used directly as
  displacements, skipping the integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .deformation import (
    SpatialProjection,
    build_projection,
    upsample_adjoint,
    upsample_to_roi,
)
from .objectives import estimate_motion, objmc_objective
from .temporal import (
    ControlCoefficients,
    TemporalBasis,
    build_dct_basis,
    evaluate_codes,
    integrate,
)
from .trajectory import (
    PerturbationBudget,
    TrajectoryCondition,
    apply_delta,
    reference_velocities,
)
from .victims import (
    GenerationRequest,
    VictimFn,
    coordfield_align,
    coordfield_build,
    coordfield_position_gradient,
    coordfield_positions,
)
from .wire import ProtocolError, TransportError

ABLATION_MODES = ("full", "no_temporal_coupling", "no_temporal_integration")

_RESIDUAL_FLOOR = 1e-12


def _check_mode(mode: str) -> None:
    if mode not in ABLATION_MODES:
        raise ValueError(f"unknown ablation mode {mode!r}, expected one of {ABLATION_MODES}")


@dataclass(frozen=True)
class WhiteBoxConfig:
    """Gradient attack settings against the coordinate-field victim."""

    mode_count: int = 6
    code_dim: int = 8
    grid_side: int = 4
    step_size: float = 0.5
    iterations: int = 60
    stage1_iterations: int = 50
    stage1_step: float = 0.25
    eps_max: float = 16.0
    seed: int = 0
    ablation: str = "full"
    noise_sigma: float = 0.1
    field_channels: int = 2
    grid_shape: tuple[int, int] = (4, 4)
    # Ascent cannot leave an exactly-aligned start (the velocity residuals
    # sit on the objective's kink, whose chosen subgradient is zero), so the
    # coefficients start at a small seeded draw instead of zero.
    init_scale: float = 0.01

    def __post_init__(self) -> None:
        _check_mode(self.ablation)
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.step_size <= 0.0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if self.init_scale <= 0.0:
            raise ValueError(f"init_scale must be > 0, got {self.init_scale}")


@dataclass(frozen=True)
class BlackBoxConfig:
    """Query-based attack settings (natural evolution strategy)."""

    mode_count: int = 6
    population: int = 16
    sigma: float = 0.1
    learning_rate: float = 0.5
    query_budget: int = 300
    antithetic: bool = True
    eps_max: float = 16.0
    seed: int = 0
    ablation: str = "full"
    track_points: int = 8

    def __post_init__(self) -> None:
        _check_mode(self.ablation)
        if self.population < 2:
            raise ValueError(f"population must be >= 2, got {self.population}")
        if self.antithetic and self.population % 2 != 0:
            raise ValueError(
                f"antithetic sampling needs an even population, got {self.population}"
            )
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.query_budget < self.population:
            raise ValueError(
                f"query_budget ({self.query_budget}) must cover at least one "
                f"population of {self.population}"
            )


@dataclass(frozen=True)
class AttackResult:
    """Outcome of one attack run.

    objective_history: white-box stores the objective at every iterate
    (length iterations + 1); black-box stores best-so-far after each update.
    requested_displacement is the per-frame displacement before budget and
    frame clamping; perturbed_trajectory reflects the clamped result.
    incomplete marks black-box runs aborted by victim failures.
    """

    ablation: str
    coefficients: np.ndarray
    objective: float
    objective_history: tuple[float, ...]
    requested_displacement: np.ndarray
    perturbed_trajectory: TrajectoryCondition
    queries_used: int
    incomplete: bool
    displacement_fields: np.ndarray | None = None
    align_offsets: np.ndarray | None = None


def realized_displacement(
    clean: TrajectoryCondition, perturbed: TrajectoryCondition
) -> np.ndarray:
    """Per-frame box translation (T, 2) actually applied after clamping."""
    return np.array(
        [[pb.x0 - b.x0, pb.y0 - b.y0] for b, pb in zip(clean.boxes, perturbed.boxes)]
    )


def _velocity_objective_gradient(
    positions: np.ndarray, reference: np.ndarray
) -> tuple[float, np.ndarray]:
    """Objective value and its gradient with respect to positions."""
    steps = positions.shape[0] - 1
    residual = np.diff(positions, axis=0) - reference
    norms = np.linalg.norm(residual, axis=1)
    value = float(norms.mean())
    units = np.zeros_like(residual)
    mask = norms > _RESIDUAL_FLOOR
    units[mask] = residual[mask] / norms[mask, None]
    grad = np.zeros_like(positions)
    grad[1:] += units / steps
    grad[:-1] -= units / steps
    return value, grad


def coefficient_shape(
    ablation: str, code_dim: int, mode_count: int, frame_count: int
) -> tuple[int, int]:
    """Parameter matrix shape for the white-box attack."""
    _check_mode(ablation)
    if ablation == "no_temporal_coupling":
        return (code_dim, frame_count)
    return (code_dim, mode_count)


def whitebox_forward(
    coefficients: np.ndarray,
    basis: TemporalBasis | None,
    projection: SpatialProjection,
    grid_shape: tuple[int, int],
    ablation: str,
) -> np.ndarray:
    """Displacement fields (T, gh, gw, 2) from a coefficient matrix."""
    _check_mode(ablation)
    if ablation == "no_temporal_coupling":
        codes = np.asarray(coefficients, dtype=float).T
    else:
        packed = ControlCoefficients.from_values(np.asarray(coefficients, dtype=float))
        codes = evaluate_codes(packed, basis)
    flat = codes @ projection.matrix
    side = projection.grid_side
    fields = flat.reshape(codes.shape[0], side, side, 2)
    if ablation == "full":
        fields = integrate(fields)
    grid_height, grid_width = grid_shape
    out = np.empty((fields.shape[0], grid_height, grid_width, 2))
    for t in range(fields.shape[0]):
        out[t] = upsample_to_roi(fields[t], grid_height, grid_width)
    return out


def _whitebox_backward(
    grad_fields: np.ndarray,
    basis: TemporalBasis | None,
    projection: SpatialProjection,
    ablation: str,
) -> np.ndarray:
    """Adjoint of whitebox_forward: gradient with respect to coefficients."""
    side = projection.grid_side
    frame_count = grad_fields.shape[0]
    grad_low = np.empty((frame_count, side, side, 2))
    for t in range(frame_count):
        grad_low[t] = upsample_adjoint(grad_fields[t], side, side)
    if ablation == "full":
        grad_low = np.cumsum(grad_low[::-1], axis=0)[::-1]
    grad_flat = grad_low.reshape(frame_count, -1)
    grad_codes = grad_flat @ projection.matrix.T
    if ablation == "no_temporal_coupling":
        return grad_codes.T
    return grad_codes.T @ basis.matrix


def whitebox_objective_and_gradient(
    coefficients: np.ndarray,
    features: np.ndarray,
    trajectory: TrajectoryCondition,
    offsets: np.ndarray,
    basis: TemporalBasis | None,
    projection: SpatialProjection,
    grid_shape: tuple[int, int],
    ablation: str,
    reference: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Velocity objective, its coefficient gradient, and the displacement
    fields at this iterate."""
    fields = whitebox_forward(coefficients, basis, projection, grid_shape, ablation)
    positions = coordfield_positions(
        features, trajectory, offsets=offsets, fields=fields, grid_shape=grid_shape
    )
    value, grad_positions = _velocity_objective_gradient(positions, reference)
    point_grads = coordfield_position_gradient(
        features, trajectory, offsets=offsets, fields=fields, grid_shape=grid_shape
    )
    grad_fields = np.einsum("tc,tijca->tija", grad_positions, point_grads)
    grad_coeffs = _whitebox_backward(grad_fields, basis, projection, ablation)
    return value, grad_coeffs, fields


def _mean_displacement(fields: np.ndarray) -> np.ndarray:
    return fields.mean(axis=(1, 2))


def whitebox_attack(
    trajectory: TrajectoryCondition, seed: int, config: WhiteBoxConfig
) -> AttackResult:
    """Two-stage gradient attack.

    Stage one aligns the victim's sampling offsets against the clean
    trajectory with the controls off. Stage two ascends the velocity
    objective over displacement coefficients, rescaling them whenever the
    requested per-frame mean displacement leaves the budget box. Returns the
    best iterate by objective value.
    """
    frame_count = trajectory.frame_count
    basis = None
    if config.ablation != "no_temporal_coupling":
        basis = build_dct_basis(frame_count, config.mode_count)
    projection = build_projection(config.code_dim, config.grid_side, config.seed)
    height = int(round(trajectory.frame_height))
    width = int(round(trajectory.frame_width))
    features = coordfield_build(
        trajectory,
        seed,
        height,
        width,
        channels=config.field_channels,
        noise_sigma=config.noise_sigma,
    )
    offsets = coordfield_align(
        features,
        trajectory,
        grid_shape=config.grid_shape,
        iterations=config.stage1_iterations,
        step=config.stage1_step,
    )
    reference = reference_velocities(trajectory)
    budget = PerturbationBudget(config.eps_max)

    shape = coefficient_shape(
        config.ablation, config.code_dim, config.mode_count, frame_count
    )
    if config.iterations == 0:
        coeffs = np.zeros(shape)
    else:
        init_rng = np.random.default_rng(
            np.random.SeedSequence((config.seed, seed, 3))
        )
        coeffs = config.init_scale * init_rng.standard_normal(shape)
        init_fields = whitebox_forward(
            coeffs, basis, projection, config.grid_shape, config.ablation
        )
        init_peak = float(np.abs(_mean_displacement(init_fields)).max())
        if init_peak > config.eps_max and init_peak > 0.0:
            coeffs = coeffs * (config.eps_max / init_peak)
    history: list[float] = []
    best_value = -np.inf
    best_coeffs = coeffs.copy()
    for iteration in range(config.iterations):
        value, grad, _ = whitebox_objective_and_gradient(
            coeffs,
            features,
            trajectory,
            offsets,
            basis,
            projection,
            config.grid_shape,
            config.ablation,
            reference,
        )
        if not np.all(np.isfinite(grad)):
            raise RuntimeError(
                f"non-finite coefficient gradient at iteration {iteration}"
            )
        history.append(value)
        if value > best_value:
            best_value = value
            best_coeffs = coeffs.copy()
        coeffs = coeffs + config.step_size * grad
        fields = whitebox_forward(
            coeffs, basis, projection, config.grid_shape, config.ablation
        )
        peak = float(np.abs(_mean_displacement(fields)).max())
        if peak > config.eps_max and peak > 0.0:
            coeffs = coeffs * (config.eps_max / peak)

    final_value, _, _ = whitebox_objective_and_gradient(
        coeffs,
        features,
        trajectory,
        offsets,
        basis,
        projection,
        config.grid_shape,
        config.ablation,
        reference,
    )
    history.append(final_value)
    if final_value > best_value:
        best_value = final_value
        best_coeffs = coeffs.copy()

    best_fields = whitebox_forward(
        best_coeffs, basis, projection, config.grid_shape, config.ablation
    )
    requested = _mean_displacement(best_fields)
    perturbed = apply_delta(trajectory, requested, budget)
    return AttackResult(
        ablation=config.ablation,
        coefficients=best_coeffs,
        objective=best_value,
        objective_history=tuple(history),
        requested_displacement=requested,
        perturbed_trajectory=perturbed,
        queries_used=0,
        incomplete=False,
        displacement_fields=best_fields,
        align_offsets=offsets,
    )


# --- black-box ----------------------------------------------------------------


def theta_dim(ablation: str, mode_count: int, frame_count: int) -> int:
    _check_mode(ablation)
    if ablation == "no_temporal_coupling":
        return 2 * frame_count
    return 2 * mode_count


def blackbox_displacement(
    theta: np.ndarray,
    basis: TemporalBasis | None,
    frame_count: int,
    ablation: str,
) -> np.ndarray:
    """Per-frame displacement (T, 2) requested by a flat parameter vector."""
    _check_mode(ablation)
    theta = np.asarray(theta, dtype=float)
    if ablation == "no_temporal_coupling":
        return theta.reshape(frame_count, 2)
    per_frame = basis.matrix @ theta.reshape(2, -1).T
    if ablation == "no_temporal_integration":
        return per_frame
    return integrate(per_frame)


def nes_step(
    theta: np.ndarray,
    evaluate,
    rng: np.random.Generator,
    population: int,
    sigma: float,
    learning_rate: float,
    antithetic: bool = True,
) -> tuple[np.ndarray, int]:
    """One natural-evolution-strategy ascent update.

    Calls evaluate() exactly `population` times; with antithetic sampling the
    candidates are interleaved pairs theta +/- sigma * eps. Objective values
    are standardized before the update; a constant batch leaves theta bitwise
    unchanged. Returns (new theta, evaluations used).
    """
    if population < 2:
        raise ValueError(f"population must be >= 2, got {population}")
    theta = np.asarray(theta, dtype=float)
    if antithetic:
        if population % 2 != 0:
            raise ValueError(
                f"antithetic sampling needs an even population, got {population}"
            )
        noise = rng.standard_normal((population // 2, theta.size))
        directions = np.empty((population, theta.size))
        directions[0::2] = noise
        directions[1::2] = -noise
    else:
        directions = rng.standard_normal((population, theta.size))
    values = np.empty(population)
    for idx in range(population):
        candidate = theta + sigma * directions[idx].reshape(theta.shape)
        values[idx] = float(evaluate(candidate))
    std = float(values.std())
    if std < 1e-12:
        return theta, population
    scores = (values - values.mean()) / std
    gradient = (scores @ directions).reshape(theta.shape) / (population * sigma)
    return theta + learning_rate * gradient, population


def blackbox_attack(
    trajectory: TrajectoryCondition,
    seed: int,
    victim: VictimFn,
    config: BlackBoxConfig,
) -> AttackResult:
    """Query-based attack: NES over displacement parameters, evaluating each
    candidate with the paired seed so clean and attacked runs share victim
    noise. Returns the best candidate ever evaluated. Updates run until the
    next would exceed the query budget; victim failures abort with the best
    so far, flagged incomplete.
    """
    frame_count = trajectory.frame_count
    basis = None
    if config.ablation != "no_temporal_coupling":
        basis = build_dct_basis(frame_count, config.mode_count)
    reference = reference_velocities(trajectory)
    budget = PerturbationBudget(config.eps_max)
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, seed)))

    state = {"queries": 0, "best": -np.inf, "best_theta": None}

    def evaluate(theta: np.ndarray) -> float:
        delta = blackbox_displacement(theta, basis, frame_count, config.ablation)
        candidate = apply_delta(trajectory, delta, budget)
        tracks = victim(
            GenerationRequest(
                trajectory=candidate, seed=seed, track_points=config.track_points
            )
        )
        value = objmc_objective(estimate_motion(tracks), reference)
        state["queries"] += 1
        if value > state["best"]:
            state["best"] = value
            state["best_theta"] = np.array(theta, dtype=float)
        return value

    dim = theta_dim(config.ablation, config.mode_count, frame_count)
    theta = np.zeros(dim)
    iterations = config.query_budget // config.population
    history: list[float] = []
    incomplete = False
    for _ in range(iterations):
        try:
            theta, _ = nes_step(
                theta,
                evaluate,
                rng,
                config.population,
                config.sigma,
                config.learning_rate,
                config.antithetic,
            )
        except (TransportError, ProtocolError):
            incomplete = True
            break
        history.append(state["best"])

    if state["best_theta"] is None:
        best_theta = np.zeros(dim)
        objective = 0.0
    else:
        best_theta = state["best_theta"]
        objective = float(state["best"])
    requested = blackbox_displacement(best_theta, basis, frame_count, config.ablation)
    perturbed = apply_delta(trajectory, requested, budget)
    return AttackResult(
        ablation=config.ablation,
        coefficients=best_theta,
        objective=objective,
        objective_history=tuple(history),
        requested_displacement=requested,
        perturbed_trajectory=perturbed,
        queries_used=state["queries"],
        incomplete=incomplete,
    )
