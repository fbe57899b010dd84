"""Experiment harness: config loading, seeded runs, metrics, and outputs.

A single ExperimentConfig describes one experiment (mode, mission, frontend
set, filter and noise settings) and a list of seeds. Each seed is an
independent run: the simulator advances the true vehicle, the filter
consumes noisy odometry and emulated detections, and the estimate is scored
against the truth every traveled meter. Aggregation produces success-rate
and accuracy statistics plus per-meter error envelopes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .frontends import DetectorNoise, emulate_prec, emulate_sad
from .geometry import SonarParams, normalize_angle
from .mission import GroundTruthState, MissionSpec, Waypoint, build_mission, step_truth
from .pf import (
    ControlInput,
    FilterConfig,
    ParticleSet,
    effective_sample_size,
    estimate,
    init_uniform_disc,
    particles_to_csv,
    predict,
    resample,
    update_prec,
    update_sad,
)
from .world import Pose2, WorldMap, default_plant_map, load_map, parse_map

MODES = ("localization", "tracking")
FRONTEND_SETS = ("sad", "sad+prec")


class ConfigError(ValueError):
    """Raised for inconsistent or malformed experiment configuration."""


@dataclass
class MissionParams:
    """Mission shape and timing; waypoints may override the built-in paths."""

    standoff: float = 10.0
    speed: float = 0.5
    control_rate_hz: float = 5.0
    sonar_rate_hz: float = 2.0
    waypoints: list[dict] | None = None


@dataclass
class OdometryNoise:
    """Gaussian noise added to the control handed to the filter (not the truth)."""

    velocity_sigma: float = 0.05
    yaw_rate_sigma: float = 0.01


@dataclass
class ExperimentConfig:
    mode: str = "localization"
    mission_id: int = 3
    frontends: str = "sad+prec"
    num_particles: int = 3000
    init_radius: float = 100.0
    seeds: tuple[int, ...] = tuple(range(40))
    success_position_m: float = 3.0
    success_yaw_rad: float = 0.35
    tracking_yaw_spread: float = math.pi / 20.0
    sonar: SonarParams = field(default_factory=SonarParams)
    detector_noise: DetectorNoise = field(default_factory=DetectorNoise)
    filter: FilterConfig = field(default_factory=FilterConfig)
    mission: MissionParams = field(default_factory=MissionParams)
    odometry: OdometryNoise = field(default_factory=OdometryNoise)
    map_data: dict | None = None
    map_path: str | None = None
    snapshots: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mission_id not in (1, 2, 3):
            raise ConfigError(f"mission_id must be 1, 2, or 3, got {self.mission_id}")
        if self.frontends not in FRONTEND_SETS:
            raise ConfigError(f"frontends must be one of {FRONTEND_SETS}, got {self.frontends!r}")
        if self.num_particles <= 0:
            raise ConfigError(f"num_particles must be > 0, got {self.num_particles}")
        if self.init_radius <= 0.0:
            raise ConfigError(f"init_radius must be > 0, got {self.init_radius}")
        if len(self.seeds) < 1:
            raise ConfigError("need at least one seed")
        if self.success_position_m <= 0.0 or self.success_yaw_rad <= 0.0:
            raise ConfigError("success thresholds must be > 0")
        if self.tracking_yaw_spread <= 0.0:
            raise ConfigError("tracking_yaw_spread must be > 0")
        if self.mission.standoff >= self.sonar.r_max:
            raise ConfigError(
                f"standoff {self.mission.standoff} m must stay below sonar range "
                f"{self.sonar.r_max} m or the asset leaves the image"
            )
        if self.mission.speed <= 0.0:
            raise ConfigError("mission speed must be > 0")
        if self.mission.control_rate_hz <= 0.0 or self.mission.sonar_rate_hz <= 0.0:
            raise ConfigError("rates must be > 0")
        if self.mission.sonar_rate_hz > self.mission.control_rate_hz:
            raise ConfigError("sonar_rate_hz cannot exceed control_rate_hz")
        if self.map_data is not None and self.map_path is not None:
            raise ConfigError("give either map (inline) or map_path, not both")

    def world(self) -> WorldMap:
        if self.map_data is not None:
            return parse_map(self.map_data)
        if self.map_path is not None:
            return load_map(self.map_path)
        return default_plant_map()

    def mission_spec(self, world: WorldMap) -> MissionSpec:
        if self.mission.waypoints is not None:
            waypoints = []
            for entry in self.mission.waypoints:
                face = entry.get("face")
                waypoints.append(
                    Waypoint(
                        float(entry["x"]),
                        float(entry["y"]),
                        face=None if face is None else (float(face[0]), float(face[1])),
                    )
                )
            return MissionSpec(
                mission_id=self.mission_id,
                waypoints=tuple(waypoints),
                standoff=self.mission.standoff,
                speed=self.mission.speed,
            )
        return build_mission(
            self.mission_id, world, standoff=self.mission.standoff, speed=self.mission.speed
        )


def _take_section(doc: dict, key: str, cls, current):
    section = doc.pop(key, None)
    if section is None:
        return current
    if not isinstance(section, dict):
        raise ConfigError(f"config section {key!r} must be an object")
    known = {f: getattr(current, f) for f in current.__dataclass_fields__}
    unknown = set(section) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in config section {key!r}: {sorted(unknown)}")
    known.update(section)
    try:
        return cls(**known)
    except ValueError as exc:
        raise ConfigError(f"bad values in config section {key!r}: {exc}") from exc


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed JSON document.

    Unknown keys are rejected so typos fail before any run starts. The sonar
    field of view is given in degrees as fov_deg.
    """
    doc = dict(doc)
    cfg = ExperimentConfig()

    sonar_doc = doc.pop("sonar", None)
    if sonar_doc is not None:
        sonar_doc = dict(sonar_doc)
        unknown = set(sonar_doc) - {"r_max_m", "fov_deg", "width_px", "height_px"}
        if unknown:
            raise ConfigError(f"unknown keys in config section 'sonar': {sorted(unknown)}")
        try:
            sonar = SonarParams(
                r_max=float(sonar_doc.get("r_max_m", cfg.sonar.r_max)),
                fov=math.radians(float(sonar_doc.get("fov_deg", math.degrees(cfg.sonar.fov)))),
                width=int(sonar_doc.get("width_px", cfg.sonar.width)),
                height=int(sonar_doc.get("height_px", cfg.sonar.height)),
            )
        except ValueError as exc:
            raise ConfigError(f"bad values in config section 'sonar': {exc}") from exc
        cfg = replace(cfg, sonar=sonar)

    cfg = replace(
        cfg,
        detector_noise=_take_section(doc, "detector_noise", DetectorNoise, cfg.detector_noise),
        filter=_take_section(doc, "filter", FilterConfig, cfg.filter),
        mission=_take_section(doc, "mission", MissionParams, cfg.mission),
        odometry=_take_section(doc, "odometry", OdometryNoise, cfg.odometry),
    )

    scalars = {
        "mode": str,
        "mission_id": int,
        "frontends": str,
        "num_particles": int,
        "init_radius_m": float,
        "seeds": lambda v: tuple(int(s) for s in v),
        "success_position_m": float,
        "success_yaw_rad": float,
        "tracking_yaw_spread_rad": float,
        "map": dict,
        "map_path": str,
        "snapshots": bool,
    }
    renames = {
        "init_radius_m": "init_radius",
        "tracking_yaw_spread_rad": "tracking_yaw_spread",
        "map": "map_data",
    }
    updates = {}
    for key, conv in scalars.items():
        if key in doc:
            value = doc.pop(key)
            if value is not None:
                try:
                    value = conv(value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad config value for {key!r}: {exc}") from exc
            updates[renames.get(key, key)] = value
    if doc:
        raise ConfigError(f"unknown top-level config keys: {sorted(doc)}")
    cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg


def config_from_json(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Inverse of config_from_dict, suitable for json.dump."""
    return {
        "mode": cfg.mode,
        "mission_id": cfg.mission_id,
        "frontends": cfg.frontends,
        "num_particles": cfg.num_particles,
        "init_radius_m": cfg.init_radius,
        "seeds": list(cfg.seeds),
        "success_position_m": cfg.success_position_m,
        "success_yaw_rad": cfg.success_yaw_rad,
        "tracking_yaw_spread_rad": cfg.tracking_yaw_spread,
        "sonar": {
            "r_max_m": cfg.sonar.r_max,
            "fov_deg": math.degrees(cfg.sonar.fov),
            "width_px": cfg.sonar.width,
            "height_px": cfg.sonar.height,
        },
        "detector_noise": asdict(cfg.detector_noise),
        "filter": asdict(cfg.filter),
        "mission": asdict(cfg.mission),
        "odometry": asdict(cfg.odometry),
        "map": cfg.map_data,
        "map_path": cfg.map_path,
        "snapshots": cfg.snapshots,
    }


def default_config(
    mode: str = "localization",
    mission_id: int = 3,
    frontends: str = "sad+prec",
    seeds: tuple[int, ...] | None = None,
) -> ExperimentConfig:
    """Protocol defaults: 3000 particles in a 100 m disc for localization,
    1500 in a 1 m disc with a small heading perturbation for tracking."""
    if mode == "tracking":
        cfg = ExperimentConfig(
            mode="tracking",
            mission_id=mission_id,
            frontends=frontends,
            num_particles=1500,
            init_radius=1.0,
        )
    else:
        cfg = ExperimentConfig(mode=mode, mission_id=mission_id, frontends=frontends)
    if seeds is not None:
        cfg = replace(cfg, seeds=tuple(seeds))
    cfg.validate()
    return cfg


@dataclass(frozen=True)
class MeterSample:
    """Estimate-vs-truth scorecard taken each traveled meter."""

    meter: int
    t: float
    truth: tuple[float, float, float]
    est: tuple[float, float, float]
    position_error: float
    yaw_error: float
    ess: float


@dataclass
class RunMetrics:
    seed: int
    samples: list[MeterSample]
    converged: bool
    final_position_error: float
    final_yaw_error: float
    wall_time_s: float
    snapshots: list[tuple[int, np.ndarray, np.ndarray]] = field(default_factory=list)


@dataclass
class AggregateReport:
    runs: int
    successes: int
    success_rate_pct: float
    acc_success_mean_m: float
    acc_success_std_m: float
    acc_all_mean_m: float
    acc_all_std_m: float
    yaw_success_mean_rad: float
    yaw_success_std_rad: float
    envelope: list[tuple]  # meter, n, pos min/mean/max, yaw min/mean/max


def _perturb_control(
    control: ControlInput, odo: OdometryNoise, rng: np.random.Generator
) -> ControlInput:
    return ControlInput(
        vx=control.vx + rng.normal(0.0, odo.velocity_sigma),
        vy=control.vy + rng.normal(0.0, odo.velocity_sigma),
        yaw_rate=control.yaw_rate + rng.normal(0.0, odo.yaw_rate_sigma),
        dt=control.dt,
    )


def run_single(cfg: ExperimentConfig, seed: int) -> RunMetrics:
    """Execute one seeded run of the configured experiment."""
    t_start = time.perf_counter()
    world = cfg.world()
    spec = cfg.mission_spec(world)
    filter_rng, detector_rng, odometry_rng = (
        np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(3)
    )

    state = GroundTruthState(pose=spec.start_pose())
    if cfg.mode == "tracking":
        yaw_range = (
            state.pose.yaw - cfg.tracking_yaw_spread,
            state.pose.yaw + cfg.tracking_yaw_spread,
        )
    else:
        yaw_range = (-math.pi, math.pi)
    pset = init_uniform_disc(
        center=state.pose,
        radius=cfg.init_radius,
        n=cfg.num_particles,
        yaw_range=yaw_range,
        rng=filter_rng,
    )

    dt = 1.0 / cfg.mission.control_rate_hz
    frame_dt = 1.0 / cfg.mission.sonar_rate_hz
    use_prec = cfg.frontends == "sad+prec"
    next_frame = frame_dt
    next_meter = 1.0
    samples: list[MeterSample] = []
    snapshots: list[tuple[int, np.ndarray, np.ndarray]] = []
    max_steps = int(math.ceil(spec.total_length() / (cfg.mission.speed * dt))) + 16

    for _ in range(max_steps):
        if state.done:
            break
        state, control = step_truth(state, spec, dt)
        predict(pset, _perturb_control(control, cfg.odometry, odometry_rng), cfg.filter, filter_rng)

        if state.time + 1e-9 >= next_frame:
            detection = emulate_sad(
                state.pose, world, cfg.sonar, cfg.detector_noise, detector_rng, t=state.time
            )
            observation = emulate_prec(
                state.pose, world, cfg.sonar, cfg.detector_noise, detector_rng, t=state.time
            )
            if detection is not None:
                update_sad(pset, detection, world, cfg.sonar, cfg.filter)
            if use_prec:
                update_prec(pset, observation, world, cfg.sonar, cfg.filter)
            if effective_sample_size(pset) < cfg.filter.resample_threshold * pset.n:
                resample(pset, filter_rng)
            next_frame += frame_dt

        while state.distance + 1e-9 >= next_meter:
            est = estimate(pset)
            pos_err = math.hypot(est.pose.x - state.pose.x, est.pose.y - state.pose.y)
            yaw_err = abs(normalize_angle(est.pose.yaw - state.pose.yaw))
            samples.append(
                MeterSample(
                    meter=int(next_meter),
                    t=state.time,
                    truth=(state.pose.x, state.pose.y, state.pose.yaw),
                    est=(est.pose.x, est.pose.y, est.pose.yaw),
                    position_error=pos_err,
                    yaw_error=yaw_err,
                    ess=effective_sample_size(pset),
                )
            )
            if cfg.snapshots:
                snapshots.append((int(next_meter), pset.poses.copy(), pset.weights.copy()))
            next_meter += 1.0

    final = estimate(pset)
    final_pos_err = math.hypot(final.pose.x - state.pose.x, final.pose.y - state.pose.y)
    final_yaw_err = abs(normalize_angle(final.pose.yaw - state.pose.yaw))
    converged = (
        bool(samples)
        and final_pos_err < cfg.success_position_m
        and final_yaw_err < cfg.success_yaw_rad
    )
    return RunMetrics(
        seed=seed,
        samples=samples,
        converged=converged,
        final_position_error=final_pos_err,
        final_yaw_error=final_yaw_err,
        wall_time_s=time.perf_counter() - t_start,
        snapshots=snapshots,
    )


def _run_seed_job(args: tuple[ExperimentConfig, int]) -> RunMetrics:
    return run_single(*args)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[RunMetrics]:
    """Run every configured seed; results are ordered by the seed list.

    Seeds are independent, so workers > 1 fans them out over processes
    without changing any result.
    """
    cfg.validate()
    cfg.world()  # fail fast on bad maps
    if workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_seed_job, [(cfg, s) for s in cfg.seeds]))
    return [run_single(cfg, seed) for seed in cfg.seeds]


def _mean_std(values: list[float]) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    arr = np.asarray(values)
    return float(arr.mean()), float(arr.std())


def aggregate(runs: list[RunMetrics]) -> AggregateReport:
    """Success rate over all runs; accuracy over successful runs (plus the
    all-runs figure for reference); per-meter min/mean/max error envelopes."""
    if not runs:
        raise ValueError("aggregate needs at least one run")
    successes = [r for r in runs if r.converged]
    acc_s = _mean_std([r.final_position_error for r in successes])
    acc_a = _mean_std([r.final_position_error for r in runs])
    yaw_s = _mean_std([r.final_yaw_error for r in successes])

    envelope = []
    max_meters = max((len(r.samples) for r in runs), default=0)
    for i in range(max_meters):
        pos = [r.samples[i].position_error for r in runs if len(r.samples) > i]
        yaw = [r.samples[i].yaw_error for r in runs if len(r.samples) > i]
        envelope.append(
            (
                i + 1,
                len(pos),
                min(pos),
                float(np.mean(pos)),
                max(pos),
                min(yaw),
                float(np.mean(yaw)),
                max(yaw),
            )
        )
    return AggregateReport(
        runs=len(runs),
        successes=len(successes),
        success_rate_pct=100.0 * len(successes) / len(runs),
        acc_success_mean_m=acc_s[0],
        acc_success_std_m=acc_s[1],
        acc_all_mean_m=acc_a[0],
        acc_all_std_m=acc_a[1],
        yaw_success_mean_rad=yaw_s[0],
        yaw_success_std_rad=yaw_s[1],
        envelope=envelope,
    )


REPORT_FIELDS = (
    "mode",
    "mission_id",
    "frontends",
    "num_particles",
    "runs",
    "successes",
    "success_rate_pct",
    "acc_success_mean_m",
    "acc_success_std_m",
    "acc_all_mean_m",
    "acc_all_std_m",
    "yaw_success_mean_rad",
    "yaw_success_std_rad",
)


def render_report_csv(report: AggregateReport, cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    writer.writerow(
        [
            cfg.mode,
            cfg.mission_id,
            cfg.frontends,
            cfg.num_particles,
            report.runs,
            report.successes,
            f"{report.success_rate_pct:.6f}",
            f"{report.acc_success_mean_m:.6f}",
            f"{report.acc_success_std_m:.6f}",
            f"{report.acc_all_mean_m:.6f}",
            f"{report.acc_all_std_m:.6f}",
            f"{report.yaw_success_mean_rad:.6f}",
            f"{report.yaw_success_std_rad:.6f}",
        ]
    )
    return buf.getvalue()


def emit_outputs(
    report: AggregateReport,
    runs: list[RunMetrics],
    cfg: ExperimentConfig,
    out_dir: str | Path,
) -> list[Path]:
    """Write report.csv, one trace per seed, envelope.dat, and optional
    particle snapshots. Returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []

        report_path = out / "report.csv"
        report_path.write_text(render_report_csv(report, cfg))
        written.append(report_path)

        for run in runs:
            trace_path = out / f"trace_{run.seed}.csv"
            with open(trace_path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(
                    [
                        "meter", "t", "truth_x", "truth_y", "truth_yaw",
                        "est_x", "est_y", "est_yaw", "pos_err", "yaw_err", "ess",
                    ]
                )
                for s in run.samples:
                    writer.writerow(
                        [s.meter]
                        + [f"{v:.6f}" for v in (s.t, *s.truth, *s.est)]
                        + [f"{s.position_error:.6f}", f"{s.yaw_error:.6f}", f"{s.ess:.3f}"]
                    )
            written.append(trace_path)
            for step, poses, weights in run.snapshots:
                snap_path = out / f"particles_{run.seed}_{step}.csv"
                particles_to_csv(ParticleSet(poses, weights), snap_path)
                written.append(snap_path)

        env_path = out / "envelope.dat"
        with open(env_path, "w") as fh:
            fh.write("# meter n pos_min pos_mean pos_max yaw_min yaw_mean yaw_max\n")
            for row in report.envelope:
                meter, n, *stats = row
                fh.write(f"{meter} {n} " + " ".join(f"{v:.6f}" for v in stats) + "\n")
        written.append(env_path)
        return written
    except OSError as exc:
        raise RuntimeError(f"failed writing outputs under {out}: {exc}") from exc
