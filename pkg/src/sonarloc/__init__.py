"""Sonar-based global localization for inspection AUVs.

A particle filter over SE(2) fused with two emulated sonar frontends (an
oriented-box asset detector and a per-asset region classifier), plus the
mission simulator and experiment harness used to study localization and
tracking behavior around sparse underwater assets.
"""

from .geometry import (
    PixelCoord,
    Point3,
    SonarParams,
    Spherical,
    cartesian_to_spherical,
    in_image,
    normalize_angle,
    project_point,
    scale_factor,
    spherical_to_cartesian,
)
from .world import (
    AssetPose,
    MapError,
    Pose2,
    RegionId,
    WorldMap,
    asset_obb_in_image,
    default_plant_map,
    load_map,
    region_of,
    relative_pose,
)
from .frontends import (
    DetectorNoise,
    ObbDetection,
    RegionObservation,
    SensorFrame,
    detection_stream,
    emulate_prec,
    emulate_sad,
)
from .pf import (
    ControlInput,
    Estimate,
    FilterConfig,
    ParticleSet,
    effective_sample_size,
    estimate,
    init_uniform_disc,
    predict,
    resample,
    update_prec,
    update_sad,
)
from .mission import GroundTruthState, MissionSpec, Waypoint, build_mission, step_truth
from .harness import (
    AggregateReport,
    ExperimentConfig,
    RunMetrics,
    aggregate,
    config_from_json,
    default_config,
    emit_outputs,
    run_experiment,
    run_single,
)

__version__ = "0.1.0"
