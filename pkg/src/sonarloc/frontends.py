"""Emulated sonar detection frontends.

Stands in for the two learned models: the asset detector reports the
oriented-box center, rotation, and class of the nearest visible asset; the
place classifier reports which asset quadrant the vehicle is in, or nothing
when no asset is visible. Both are driven by ground-truth geometry plus a
configurable error model, so recorded real detections can replace them by
producing the same dataclasses.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import SonarParams, normalize_angle
from .world import AssetPose, Pose2, RegionId, WorldMap, asset_obb_in_image, region_of


@dataclass(frozen=True)
class ObbDetection:
    """One oriented-box detection: image-plane center, rotation, asset class."""

    asset_id: int
    u: float
    v: float
    delta: float
    t: float = 0.0


@dataclass(frozen=True)
class RegionObservation:
    """One place-recognition outcome; region is None when nothing is seen."""

    region: RegionId | None
    t: float = 0.0


@dataclass(frozen=True)
class SensorFrame:
    """Paired frontend outputs decoded from one simulated sonar frame."""

    t: float
    detection: ObbDetection | None
    region: RegionObservation


@dataclass
class DetectorNoise:
    """Error model separating the emulators from perfect geometry.

    flip_rate applies only to symmetric assets and reports the box rotated
    by pi, reproducing the two-opposing-views ambiguity. miss_rate drops
    detections entirely; there are no false positives.
    """

    pixel_sigma: float = 5.0
    rotation_sigma: float = 0.05
    miss_rate: float = 0.1
    flip_rate: float = 0.5
    region_confusion_rate: float = 0.05

    def __post_init__(self):
        for name in ("miss_rate", "flip_rate", "region_confusion_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be a probability, got {value}")
        if self.pixel_sigma < 0.0 or self.rotation_sigma < 0.0:
            raise ValueError("noise sigmas must be >= 0")


def nearest_visible_asset(
    pose: Pose2, world: WorldMap, params: SonarParams
) -> tuple[AssetPose, tuple, float] | None:
    """Closest asset whose box center projects inside the sensor frustum."""
    best = None
    best_range = math.inf
    for asset in world.assets:
        hit = asset_obb_in_image(pose, asset, params)
        if hit is None:
            continue
        rng = math.hypot(asset.pose.x - pose.x, asset.pose.y - pose.y)
        if rng < best_range:
            best = (asset, hit, rng)
            best_range = rng
    return best


def emulate_sad(
    pose: Pose2,
    world: WorldMap,
    params: SonarParams,
    noise: DetectorNoise,
    rng: np.random.Generator,
    t: float = 0.0,
) -> ObbDetection | None:
    """Emulate the asset detector for one frame at the true sensor pose.

    Picks the nearest in-frustum asset, drops it with probability miss_rate,
    then perturbs the projected center and rotation with Gaussian noise. For
    symmetric assets the reported rotation is flipped by pi with probability
    flip_rate. Returns None when nothing is detected.
    """
    visible = nearest_visible_asset(pose, world, params)
    if visible is None:
        return None
    asset, (center, delta), _ = visible
    if rng.random() < noise.miss_rate:
        return None
    u = float(center.u + rng.normal(0.0, noise.pixel_sigma))
    v = float(center.v + rng.normal(0.0, noise.pixel_sigma))
    delta = float(delta + rng.normal(0.0, noise.rotation_sigma))
    if asset.symmetric and rng.random() < noise.flip_rate:
        delta += math.pi
    return ObbDetection(asset_id=asset.asset_id, u=u, v=v, delta=normalize_angle(delta), t=t)


def emulate_prec(
    pose: Pose2,
    world: WorldMap,
    params: SonarParams,
    noise: DetectorNoise,
    rng: np.random.Generator,
    t: float = 0.0,
) -> RegionObservation:
    """Emulate the place classifier for one frame at the true sensor pose.

    Reports the quadrant of the nearest in-frustum asset, swapped for an
    adjacent quadrant with probability region_confusion_rate, or None when
    no asset is visible (the "observing nothing" class).
    """
    visible = nearest_visible_asset(pose, world, params)
    if visible is None:
        return RegionObservation(region=None, t=t)
    asset = visible[0]
    region = region_of(pose, asset)
    if rng.random() < noise.region_confusion_rate:
        step = 1 if rng.random() < 0.5 else -1
        region = RegionId(asset_id=region.asset_id, quadrant=(region.quadrant + step) % 4)
    return RegionObservation(region=region, t=t)


def _pose_at(trajectory: list[tuple[float, Pose2]], t: float) -> Pose2:
    """Piecewise-linear interpolation of a time-stamped pose list."""
    if t <= trajectory[0][0]:
        return trajectory[0][1]
    for (t0, p0), (t1, p1) in zip(trajectory, trajectory[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            return Pose2(
                x=p0.x + f * (p1.x - p0.x),
                y=p0.y + f * (p1.y - p0.y),
                yaw=p0.yaw + f * normalize_angle(p1.yaw - p0.yaw),
            )
    return trajectory[-1][1]


def detection_stream(
    trajectory: list[tuple[float, Pose2]],
    rate_hz: float,
    world: WorldMap,
    params: SonarParams,
    noise: DetectorNoise,
    rng: np.random.Generator,
) -> list[SensorFrame]:
    """Run both frontends at a fixed rate along a time-stamped trajectory.

    Each frame evaluates the detector and the place classifier on the same
    interpolated pose. Frame k is stamped (k+1)/rate_hz; a trajectory that
    spans no time yields an empty stream.
    """
    if rate_hz <= 0.0:
        raise ValueError(f"rate_hz must be > 0, got {rate_hz}")
    if len(trajectory) < 2:
        return []
    duration = trajectory[-1][0] - trajectory[0][0]
    n_frames = int(math.floor(duration * rate_hz + 1e-9))
    frames = []
    for k in range(n_frames):
        t = trajectory[0][0] + (k + 1) / rate_hz
        pose = _pose_at(trajectory, t)
        det = emulate_sad(pose, world, params, noise, rng, t=t)
        obs = emulate_prec(pose, world, params, noise, rng, t=t)
        frames.append(SensorFrame(t=t, detection=det, region=obs))
    return frames


STREAM_FIELDS = ("t", "j", "u", "v", "delta", "region_asset", "region_quadrant")


def stream_to_csv(frames: list[SensorFrame], path: str | Path) -> None:
    """Serialize a detection stream for replay; absent values stay blank."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STREAM_FIELDS)
        for frame in frames:
            det = frame.detection
            reg = frame.region.region
            writer.writerow(
                [
                    repr(frame.t),
                    det.asset_id if det else "",
                    repr(det.u) if det else "",
                    repr(det.v) if det else "",
                    repr(det.delta) if det else "",
                    reg.asset_id if reg else "",
                    reg.quadrant if reg else "",
                ]
            )


def stream_from_csv(path: str | Path) -> list[SensorFrame]:
    """Load a stream written by stream_to_csv."""
    frames = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != STREAM_FIELDS:
            raise ValueError(f"unexpected stream columns in {path}: {reader.fieldnames}")
        for row in reader:
            t = float(row["t"])
            det = None
            if row["j"] != "":
                det = ObbDetection(
                    asset_id=int(row["j"]),
                    u=float(row["u"]),
                    v=float(row["v"]),
                    delta=float(row["delta"]),
                    t=t,
                )
            region = None
            if row["region_asset"] != "":
                region = RegionId(
                    asset_id=int(row["region_asset"]), quadrant=int(row["region_quadrant"])
                )
            frames.append(SensorFrame(t=t, detection=det, region=RegionObservation(region, t=t)))
    return frames


def inspection_pose_grid(
    asset: AssetPose,
    spacing: float,
    extent: float,
    clearance: float = 1.0,
    view_offsets: tuple[float, ...] = (-math.pi / 12.0, 0.0, math.pi / 12.0),
) -> list[Pose2]:
    """Grid of asset-facing viewpoints around one asset.

    Samples a square grid of side 2*extent in the asset frame, drops points
    that collide with the footprint (inflated by clearance), and emits one
    pose per view offset at each remaining point, each aimed at the asset
    center plus the offset. Used to sweep emulator coverage.
    """
    if spacing <= 0.0 or extent <= 0.0:
        raise ValueError("spacing and extent must be positive")
    ticks = np.arange(-extent, extent + spacing / 2.0, spacing)
    poses = []
    for gx in ticks:
        for gy in ticks:
            if (
                abs(gx) <= asset.half_length + clearance
                and abs(gy) <= asset.half_width + clearance
            ):
                continue  # colliding with (or scraping) the asset
            point = asset.pose.compose(Pose2(float(gx), float(gy), 0.0))
            heading = math.atan2(asset.pose.y - point.y, asset.pose.x - point.x)
            for offset in view_offsets:
                poses.append(Pose2(point.x, point.y, heading + offset))
    return poses
