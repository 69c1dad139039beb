"""Trajectory-control attacks against motion-conditioned video generators.

The package splits into a numeric core (temporal basis, spatial deformation,
trajectory handling), victims that turn trajectory conditions into point
tracks, white-box and black-box attacks over those victims, and a campaign
harness with CSV/JSON/SVG reporting.
"""

from .attack import (
    ABLATION_MODES,
    AttackResult,
    BlackBoxConfig,
    WhiteBoxConfig,
    blackbox_attack,
    blackbox_displacement,
    nes_step,
    realized_displacement,
    whitebox_attack,
)
from .deformation import (
    SpatialProjection,
    build_projection,
    grid_sample,
    grid_sample_jacobian,
    make_roi_grid,
    modulate_grid,
    project_code,
    upsample_to_roi,
)
from .harness import (
    AttackSpec,
    CampaignResult,
    ConfigError,
    ExperimentConfig,
    InstanceOutcome,
    InstanceSpec,
    SweepResult,
    VictimSpec,
    config_fingerprint,
    evaluate_instance,
    load_config,
    pairing_seed,
    parse_config,
    run_campaign,
    run_sweep,
    set_by_path,
)
from .objectives import (
    EvalRecord,
    MotionEstimate,
    compute_asr,
    estimate_motion,
    objmc_metric,
    objmc_objective,
)
from .temporal import (
    ControlCoefficients,
    TemporalBasis,
    build_dct_basis,
    differentiate,
    evaluate_codes,
    integrate,
)
from .trajectory import (
    BoundingBox,
    MOTION_FAMILIES,
    PerturbationBudget,
    TrajectoryCondition,
    TrajectoryFormatError,
    apply_delta,
    centers,
    generate_instances,
    load_trajectory,
    reference_velocities,
    save_trajectory,
)
from .victims import (
    ExternalVictim,
    GenerationRequest,
    InertialParams,
    coordfield_align,
    coordfield_build,
    coordfield_generate,
    coordfield_positions,
    faithful_follower,
    inertial_follower,
    make_coordfield_victim,
    make_external_victim,
    make_faithful_victim,
    make_inertial_victim,
)
from .wire import ProtocolError, TransportError, VictimTimeoutError

__version__ = "0.1.0"

__all__ = [
    "ABLATION_MODES",
    "AttackResult",
    "AttackSpec",
    "BlackBoxConfig",
    "BoundingBox",
    "CampaignResult",
    "ConfigError",
    "ControlCoefficients",
    "EvalRecord",
    "ExperimentConfig",
    "ExternalVictim",
    "GenerationRequest",
    "InertialParams",
    "InstanceOutcome",
    "InstanceSpec",
    "MOTION_FAMILIES",
    "MotionEstimate",
    "PerturbationBudget",
    "ProtocolError",
    "SpatialProjection",
    "SweepResult",
    "TemporalBasis",
    "TrajectoryCondition",
    "TrajectoryFormatError",
    "TransportError",
    "VictimSpec",
    "VictimTimeoutError",
    "WhiteBoxConfig",
    "apply_delta",
    "blackbox_attack",
    "blackbox_displacement",
    "build_dct_basis",
    "build_projection",
    "centers",
    "compute_asr",
    "config_fingerprint",
    "coordfield_align",
    "coordfield_build",
    "coordfield_generate",
    "coordfield_positions",
    "differentiate",
    "estimate_motion",
    "evaluate_codes",
    "evaluate_instance",
    "faithful_follower",
    "generate_instances",
    "grid_sample",
    "grid_sample_jacobian",
    "inertial_follower",
    "integrate",
    "load_config",
    "load_trajectory",
    "make_coordfield_victim",
    "make_external_victim",
    "make_faithful_victim",
    "make_inertial_victim",
    "make_roi_grid",
    "modulate_grid",
    "nes_step",
    "objmc_metric",
    "objmc_objective",
    "pairing_seed",
    "parse_config",
    "project_code",
    "realized_displacement",
    "reference_velocities",
    "run_campaign",
    "run_sweep",
    "save_trajectory",
    "set_by_path",
    "upsample_to_roi",
    "whitebox_attack",
]
