"""Forward-looking sonar projection geometry.

Conventions: the sonar frame has +x forward (boresight), +y to starboard,
+z up. Bearing is measured in the x-y plane from +x toward +y; elevation
from the x-y plane toward +z. Pixel u grows to starboard, v grows with
decreasing forward range (v = 0 at max range).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]. In-range values pass through unchanged."""
    if -math.pi < angle <= math.pi:
        return angle
    return math.pi - (math.pi - angle) % TWO_PI


def normalize_angles(angles: np.ndarray) -> np.ndarray:
    """Vectorized normalize_angle. Returns a new array."""
    out = np.array(angles, dtype=float, copy=True)
    mask = (out <= -math.pi) | (out > math.pi)
    out[mask] = math.pi - (math.pi - out[mask]) % TWO_PI
    return out


@dataclass(frozen=True)
class Point3:
    """Point in the sonar cartesian frame, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(map(math.isfinite, (self.x, self.y, self.z))):
            raise ValueError(f"point components must be finite, got {self}")

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class Spherical:
    """Range (m), bearing and elevation (rad) in the sonar frame."""

    r: float
    bearing: float
    elevation: float

    def __post_init__(self):
        if not self.r >= 0.0:
            raise ValueError(f"range must be >= 0, got {self.r}")
        if not -math.pi < self.bearing <= math.pi:
            raise ValueError(f"bearing must lie in (-pi, pi], got {self.bearing}")
        if not -math.pi / 2 < self.elevation < math.pi / 2:
            raise ValueError(
                f"elevation must lie strictly inside (-pi/2, pi/2), got {self.elevation}"
            )


@dataclass(frozen=True)
class PixelCoord:
    """Continuous image-plane coordinate; may fall outside the frame."""

    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError(f"pixel coordinates must be finite, got {self}")


@dataclass(frozen=True)
class SonarParams:
    """Imaging sonar intrinsics.

    Defaults match a Tritech Gemini 720i style unit: 20 m range,
    120 degree horizontal field of view, 440x512 px images.
    """

    r_max: float = 20.0
    fov: float = 2.0 * math.pi / 3.0
    width: int = 440
    height: int = 512

    def __post_init__(self):
        if not self.r_max > 0.0:
            raise ValueError(f"r_max must be > 0, got {self.r_max}")
        if not 0.0 < self.fov < math.pi:
            raise ValueError(f"fov must lie in (0, pi), got {self.fov}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")

    @property
    def beta(self) -> float:
        """Pixels-per-meter scale of the image plane."""
        return scale_factor(self)


def scale_factor(params: SonarParams) -> float:
    """Scale (px/m) relating physical and image space: W / (2 R_max sin(FoV/2))."""
    return params.width / (2.0 * params.r_max * math.sin(params.fov / 2.0))


def cartesian_to_spherical(p: Point3) -> Spherical:
    """Convert a sonar-frame point to (range, bearing, elevation).

    Raises ValueError for points on the vertical axis (bearing undefined),
    including the origin.
    """
    planar = math.hypot(p.x, p.y)
    if planar == 0.0:
        if p.z == 0.0:
            raise ValueError("zero-norm point has no bearing or elevation")
        raise ValueError("point on the vertical axis has undefined bearing")
    return Spherical(
        r=p.norm(),
        bearing=math.atan2(p.y, p.x),
        elevation=math.atan2(p.z, planar),
    )


def spherical_to_cartesian(s: Spherical) -> Point3:
    """Inverse of cartesian_to_spherical."""
    cos_el = math.cos(s.elevation)
    return Point3(
        x=s.r * math.cos(s.bearing) * cos_el,
        y=s.r * math.sin(s.bearing) * cos_el,
        z=s.r * math.sin(s.elevation),
    )


def project_point(p: Point3, params: SonarParams) -> PixelCoord:
    """Project a sonar-frame point onto the image plane.

    u = beta * y / cos(elevation) + W/2, v = beta * (R_max - x / cos(elevation)).
    Elevation is collapsed: all points on the same (range, bearing) arc map to
    the same pixel. The result may fall outside the frame; use in_image to test
    visibility. Raises ValueError for points on the vertical axis.
    """
    s = cartesian_to_spherical(p)
    cos_el = math.cos(s.elevation)
    return PixelCoord(
        u=params.beta * p.y / cos_el + params.width / 2.0,
        v=params.beta * (params.r_max - p.x / cos_el),
    )


def in_image(c: PixelCoord, params: SonarParams) -> bool:
    """True iff the pixel lies inside the image frame."""
    return 0.0 <= c.u < params.width and 0.0 <= c.v < params.height
