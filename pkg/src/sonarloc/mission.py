"""Inspection mission simulator.

Builds waypoint paths for the three canonical missions, advances the true
vehicle state along them at constant speed, and reports the body-frame
control actually realized each step. During inspection legs the vehicle
keeps its heading locked on the asset center; transit legs face the
direction of travel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import normalize_angle
from .pf import ControlInput
from .world import AssetPose, Pose2, WorldMap


@dataclass(frozen=True)
class Waypoint:
    """Path vertex; face is the point to keep heading toward while moving
    to this waypoint, or None to face along the travel direction."""

    x: float
    y: float
    face: tuple[float, float] | None = None


@dataclass(frozen=True)
class MissionSpec:
    """One mission: an ordered waypoint path traversed at constant speed."""

    mission_id: int
    waypoints: tuple[Waypoint, ...]
    standoff: float
    speed: float

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("mission needs at least two waypoints")
        if self.speed <= 0.0:
            raise ValueError(f"speed must be > 0, got {self.speed}")

    def total_length(self) -> float:
        return sum(
            math.hypot(b.x - a.x, b.y - a.y)
            for a, b in zip(self.waypoints, self.waypoints[1:])
        )

    def start_pose(self) -> Pose2:
        w0 = self.waypoints[0]
        return Pose2(w0.x, w0.y, _segment_heading(w0.x, w0.y, 0, self.waypoints))


@dataclass(frozen=True)
class GroundTruthState:
    """True vehicle state plus odometer; distance never decreases."""

    pose: Pose2
    time: float = 0.0
    distance: float = 0.0
    segment: int = 0
    done: bool = False


def _segment_heading(x: float, y: float, segment: int, waypoints: tuple[Waypoint, ...]) -> float:
    target = waypoints[segment + 1]
    if target.face is not None:
        fx, fy = target.face
        if fx == x and fy == y:
            raise ValueError("vehicle coincident with its facing point")
        return math.atan2(fy - y, fx - x)
    prev = waypoints[segment]
    return math.atan2(target.y - prev.y, target.x - prev.x)


def inspection_loop(asset: AssetPose, standoff: float) -> list[Waypoint]:
    """Closed square loop around an asset at the given standoff.

    Eight corner/edge-midpoint vertices starting and ending at the west edge
    midpoint, traversed counterclockwise, all facing the asset center.
    """
    if standoff <= 0.0:
        raise ValueError(f"standoff must be > 0, got {standoff}")
    ax, ay = asset.pose.x, asset.pose.y
    s = standoff
    corners = [
        (-s, 0.0), (-s, s), (0.0, s), (s, s), (s, 0.0), (s, -s), (0.0, -s), (-s, -s), (-s, 0.0),
    ]
    return [Waypoint(ax + dx, ay + dy, face=(ax, ay)) for dx, dy in corners]


def _closest_pair(world: WorldMap) -> tuple[AssetPose, AssetPose]:
    best = None
    best_dist = math.inf
    for i, a in enumerate(world.assets):
        for b in world.assets[i + 1 :]:
            d = math.hypot(b.pose.x - a.pose.x, b.pose.y - a.pose.y)
            if d < best_dist:
                best, best_dist = (a, b), d
    if best is None:
        raise ValueError("mission 1 requires at least two assets")
    return best


def _isolation(asset: AssetPose, world: WorldMap) -> float:
    others = [
        math.hypot(a.pose.x - asset.pose.x, a.pose.y - asset.pose.y)
        for a in world.assets
        if a.asset_id != asset.asset_id
    ]
    return min(others) if others else math.inf


def build_mission(
    mission_id: int, world: WorldMap, standoff: float = 10.0, speed: float = 0.5
) -> MissionSpec:
    """Assemble the waypoint path for one of the three mission types.

    Mission 1 inspects the two closest assets with a transit leg between
    their loops; mission 2 a single isolated non-symmetric asset; mission 3
    a single isolated symmetric asset. Raises ValueError when the map lacks
    the assets a mission calls for.
    """
    if mission_id == 1:
        first, second = _closest_pair(world)
        loop_a = inspection_loop(first, standoff)
        loop_b = inspection_loop(second, standoff)
        transit = Waypoint(loop_b[0].x, loop_b[0].y, face=None)
        waypoints = loop_a + [transit] + loop_b[1:]
    elif mission_id in (2, 3):
        want_symmetric = mission_id == 3
        candidates = [a for a in world.assets if a.symmetric == want_symmetric]
        if not candidates:
            kind = "symmetric" if want_symmetric else "non-symmetric"
            raise ValueError(f"mission {mission_id} requires a {kind} asset")
        target = max(candidates, key=lambda a: _isolation(a, world))
        waypoints = inspection_loop(target, standoff)
    else:
        raise ValueError(f"mission_id must be 1, 2, or 3, got {mission_id}")
    return MissionSpec(
        mission_id=mission_id, waypoints=tuple(waypoints), standoff=standoff, speed=speed
    )


def step_truth(
    state: GroundTruthState, spec: MissionSpec, dt: float
) -> tuple[GroundTruthState, ControlInput]:
    """Advance the true state by dt and report the realized control.

    Moves along the waypoint path at cruise speed, carrying leftover travel
    across corners so arrival is exact. Once the final waypoint is reached
    the pose freezes and the control is zero.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    waypoints = spec.waypoints
    x, y = state.pose.x, state.pose.y
    segment = state.segment
    budget = spec.speed * dt
    moved = 0.0
    while budget > 1e-12 and segment < len(waypoints) - 1:
        target = waypoints[segment + 1]
        remaining = math.hypot(target.x - x, target.y - y)
        if remaining <= budget:
            x, y = target.x, target.y
            moved += remaining
            budget -= remaining
            segment += 1
        else:
            f = budget / remaining
            x += f * (target.x - x)
            y += f * (target.y - y)
            moved += budget
            budget = 0.0
    done = segment >= len(waypoints) - 1
    heading_segment = min(segment, len(waypoints) - 2)
    pose = Pose2(x, y, _segment_heading(x, y, heading_segment, waypoints))

    vx_map = (pose.x - state.pose.x) / dt
    vy_map = (pose.y - state.pose.y) / dt
    c, s = math.cos(state.pose.yaw), math.sin(state.pose.yaw)
    control = ControlInput(
        vx=c * vx_map + s * vy_map,
        vy=-s * vx_map + c * vy_map,
        yaw_rate=normalize_angle(pose.yaw - state.pose.yaw) / dt,
        dt=dt,
    )
    new_state = replace(
        state,
        pose=pose,
        time=state.time + dt,
        distance=state.distance + moved,
        segment=segment,
        done=done,
    )
    return new_state, control
