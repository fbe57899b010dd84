"""Sparse plant world model: asset map, frames, and region partition.

The map holds K assets, each a planar pose plus a rectangular footprint and
a flag marking whether its sonar signature is 180-degree symmetric. The
space around every asset is split into four quadrants in the asset frame;
quadrant 0 is centered on the asset's +x axis and boundaries are half-open,
so quadrant q covers bearings [q*pi/2 - pi/4, q*pi/2 + pi/4).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import (
    PixelCoord,
    Point3,
    SonarParams,
    in_image,
    normalize_angle,
    normalize_angles,
    project_point,
)

QUADRANT_SPAN = math.pi / 2.0


class MapError(ValueError):
    """Raised when a map file fails to parse or validate."""


@dataclass(frozen=True)
class Pose2:
    """SE(2) pose: position in meters, yaw wrapped to (-pi, pi]."""

    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    def compose(self, other: "Pose2") -> "Pose2":
        """Group composition self * other (other expressed in this frame)."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(
            x=self.x + c * other.x - s * other.y,
            y=self.y + s * other.x + c * other.y,
            yaw=self.yaw + other.yaw,
        )

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(
            x=-(c * self.x + s * self.y),
            y=-(-s * self.x + c * self.y),
            yaw=-self.yaw,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw])


@dataclass(frozen=True)
class AssetPose:
    """Planar placement of one asset plus its footprint half-extents."""

    asset_id: int
    pose: Pose2
    half_length: float
    half_width: float
    symmetric: bool = False

    def __post_init__(self):
        if self.half_length <= 0.0 or self.half_width <= 0.0:
            raise ValueError(
                f"footprint extents must be positive, got {self.half_length}x{self.half_width}"
            )


@dataclass(frozen=True)
class RegionId:
    """One of the four quadrants surrounding an asset."""

    asset_id: int
    quadrant: int

    def __post_init__(self):
        if self.quadrant not in (0, 1, 2, 3):
            raise ValueError(f"quadrant must be in 0..3, got {self.quadrant}")


@dataclass(frozen=True)
class WorldMap:
    """Immutable asset map with an axis-aligned bounding rectangle."""

    assets: tuple[AssetPose, ...]
    world_bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax

    @property
    def num_assets(self) -> int:
        return len(self.assets)

    def asset(self, asset_id: int) -> AssetPose:
        for a in self.assets:
            if a.asset_id == asset_id:
                return a
        raise KeyError(f"no asset with id {asset_id}")


def relative_pose(sensor: Pose2, asset: AssetPose) -> Pose2:
    """Asset pose expressed in the sensor frame: inverse(sensor) * asset."""
    return sensor.inverse().compose(asset.pose)


def region_of(sensor: Pose2, asset: AssetPose) -> RegionId:
    """Quadrant of the asset frame the sensor currently occupies.

    Uses the planar bearing of the sensor position seen from the asset.
    Raises ValueError when the sensor sits exactly on the asset center.
    """
    in_asset = asset.pose.inverse().compose(sensor)
    if in_asset.x == 0.0 and in_asset.y == 0.0:
        raise ValueError("sensor coincident with asset center: region undefined")
    theta_star = math.atan2(in_asset.y, in_asset.x)
    quadrant = int(math.floor((theta_star + QUADRANT_SPAN / 2.0) / QUADRANT_SPAN)) % 4
    return RegionId(asset_id=asset.asset_id, quadrant=quadrant)


def asset_obb_in_image(
    sensor: Pose2, asset: AssetPose, params: SonarParams
) -> tuple[PixelCoord, float] | None:
    """Project an asset's oriented box into the sensor's image.

    Returns the box center pixel and its rotation (the asset yaw relative to
    the sensor), or None when the center falls outside the image frame or
    outside the horizontal field of view.
    """
    rel = relative_pose(sensor, asset)
    if rel.x == 0.0 and rel.y == 0.0:
        return None
    bearing = math.atan2(rel.y, rel.x)
    center = project_point(Point3(rel.x, rel.y, 0.0), params)
    if not in_image(center, params) or abs(bearing) > params.fov / 2.0:
        return None
    return center, rel.yaw


def project_asset_batch(
    poses: np.ndarray, asset: AssetPose, params: SonarParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized asset_obb_in_image over an (N, 3) array of [x, y, yaw] rows.

    Returns (u, v, delta, visible). u/v/delta are computed for every row even
    when not visible, mirroring the scalar function before its frustum gate.
    """
    dx = asset.pose.x - poses[:, 0]
    dy = asset.pose.y - poses[:, 1]
    cy = np.cos(poses[:, 2])
    sy = np.sin(poses[:, 2])
    rx = cy * dx + sy * dy
    ry = -sy * dx + cy * dy
    u = params.beta * ry + params.width / 2.0
    v = params.beta * (params.r_max - rx)
    delta = normalize_angles(asset.pose.yaw - poses[:, 2])
    bearing = np.arctan2(ry, rx)
    visible = (
        (u >= 0.0)
        & (u < params.width)
        & (v >= 0.0)
        & (v < params.height)
        & (np.abs(bearing) <= params.fov / 2.0)
        & ((rx != 0.0) | (ry != 0.0))
    )
    return u, v, delta, visible


def quadrant_batch(poses: np.ndarray, asset: AssetPose) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized region_of over an (N, 3) pose array.

    Returns (quadrant, range_to_asset). A pose exactly on the asset center
    gets quadrant 0 rather than an error; callers gate on range if needed.
    """
    dx = poses[:, 0] - asset.pose.x
    dy = poses[:, 1] - asset.pose.y
    ca, sa = math.cos(asset.pose.yaw), math.sin(asset.pose.yaw)
    px = ca * dx + sa * dy
    py = -sa * dx + ca * dy
    theta_star = np.arctan2(py, px)
    quadrant = np.floor((theta_star + QUADRANT_SPAN / 2.0) / QUADRANT_SPAN).astype(int) % 4
    return quadrant, np.hypot(dx, dy)


def parse_map(doc: dict) -> WorldMap:
    """Build and validate a WorldMap from a parsed map document."""
    try:
        bounds = tuple(float(b) for b in doc["world_bounds"])
        raw_assets = doc["assets"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MapError(f"map document missing or malformed field: {exc}") from exc
    if len(bounds) != 4 or bounds[0] >= bounds[2] or bounds[1] >= bounds[3]:
        raise MapError(f"world_bounds must be [xmin, ymin, xmax, ymax], got {bounds}")
    if not raw_assets:
        raise MapError("map must contain at least one asset")

    assets = []
    seen = set()
    k = len(raw_assets)
    for entry in raw_assets:
        try:
            asset_id = int(entry["id"])
            asset = AssetPose(
                asset_id=asset_id,
                pose=Pose2(float(entry["x"]), float(entry["y"]), float(entry["yaw"])),
                half_length=float(entry["length"]) / 2.0,
                half_width=float(entry["width"]) / 2.0,
                symmetric=bool(entry["symmetric"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MapError(f"bad asset entry {entry!r}: {exc}") from exc
        if asset_id in seen:
            raise MapError(f"duplicate asset id {asset_id}")
        if not 0 <= asset_id < k:
            raise MapError(f"asset id {asset_id} outside [0, {k})")
        xmin, ymin, xmax, ymax = bounds
        if not (xmin <= asset.pose.x <= xmax and ymin <= asset.pose.y <= ymax):
            raise MapError(f"asset {asset_id} at ({asset.pose.x}, {asset.pose.y}) outside bounds")
        seen.add(asset_id)
        assets.append(asset)

    assets.sort(key=lambda a: a.asset_id)
    return WorldMap(assets=tuple(assets), world_bounds=bounds)


def load_map(path: str | Path) -> WorldMap:
    """Load a map from a JSON file. Raises MapError on any parse/validation failure."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise MapError(f"cannot read map file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MapError(f"map file {path} is not valid JSON: {exc}") from exc
    return parse_map(doc)


def default_plant_map() -> WorldMap:
    """Four-asset inspection site: a close pair plus two isolated assets.

    Assets 0 and 1 sit about 19 m apart; assets 2 and 3 are roughly 100 m or
    more from everything else. Asset 2 is non-symmetric, assets 1 and 3 carry
    symmetric sonar signatures.
    """
    return parse_map(
        {
            "world_bounds": [-60.0, -60.0, 160.0, 160.0],
            "assets": [
                {"id": 0, "x": 0.0, "y": 0.0, "yaw": 0.4, "length": 8.0, "width": 3.0,
                 "symmetric": False},
                {"id": 1, "x": 18.0, "y": 6.0, "yaw": -0.9, "length": 6.0, "width": 2.0,
                 "symmetric": True},
                {"id": 2, "x": 95.0, "y": 90.0, "yaw": 1.1, "length": 10.0, "width": 4.0,
                 "symmetric": False},
                {"id": 3, "x": -40.0, "y": 95.0, "yaw": -2.2, "length": 9.0, "width": 3.0,
                 "symmetric": True},
            ],
        }
    )
