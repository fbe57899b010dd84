"""Monte Carlo localization back-end.

Particles live in an (N, 3) float64 array of [x, y, yaw] rows with a
parallel weight vector; every per-particle operation is vectorized. The two
observation updates mirror the detector and place-recognition frontends:
the first reweights by a squared-pixel plus |sin| rotation distance, the
second multiplicatively boosts particles inside the observed asset quadrant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frontends import ObbDetection, RegionObservation
from .geometry import SonarParams, normalize_angles
from .world import Pose2, WorldMap, project_asset_batch, quadrant_batch

WEIGHT_TOL = 1e-9


@dataclass
class FilterConfig:
    """Tunables of the localization filter.

    eta balances squared pixel error against the [0, 1] rotation term in the
    detector distance. max_dist caps that distance, bounding the per-frame
    likelihood ratio: no particle is zeroed out, and a lone lucky match
    cannot wipe out the rest of the cloud in a single update. alpha is the
    multiplicative boost for particles inside an observed region; it should
    be comparable to exp(max_dist) so region evidence can hold its own
    against the detector term. Motion noise is applied per predict call;
    the yaw sigma is yaw_noise plus yaw_rate_noise times the commanded yaw
    displacement of the step (odometry-style heading noise that grows with
    turning but stays small on straight legs).

    mirror_fraction is the trickle of particles moved to their
    rotation-ambiguous twin pose on each detector update, each keeping
    mirror_weight of its weight (0 disables). The trickle runs only while
    the heading posterior is still ambiguous: once the circular yaw
    variance of the set drops below mirror_gate, the filter is committed
    and hypothesis transfer stops.
    """

    eta: float = 0.01
    alpha: float = 12.0
    position_noise: float = 0.12
    yaw_noise: float = 0.015
    yaw_rate_noise: float = 1.0
    resample_threshold: float = 0.5
    max_dist: float = 2.5
    mirror_fraction: float = 1e-3
    mirror_weight: float = 0.15
    mirror_gate: float = 0.08

    def __post_init__(self):
        if not self.eta > 0.0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")
        if not 0.0 < self.resample_threshold <= 1.0:
            raise ValueError(f"resample_threshold must be in (0, 1], got {self.resample_threshold}")
        if self.position_noise < 0.0 or self.yaw_noise < 0.0 or self.yaw_rate_noise < 0.0:
            raise ValueError("motion noise sigmas must be >= 0")
        if not self.max_dist > 0.0:
            raise ValueError(f"max_dist must be > 0, got {self.max_dist}")
        if not 0.0 <= self.mirror_fraction < 1.0:
            raise ValueError(f"mirror_fraction must be in [0, 1), got {self.mirror_fraction}")
        if not 0.0 < self.mirror_weight <= 1.0:
            raise ValueError(f"mirror_weight must be in (0, 1], got {self.mirror_weight}")
        if not 0.0 <= self.mirror_gate <= 1.0:
            raise ValueError(f"mirror_gate must be in [0, 1], got {self.mirror_gate}")


@dataclass(frozen=True)
class ControlInput:
    """Body-frame velocity command integrated over one step."""

    vx: float
    vy: float
    yaw_rate: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not all(map(math.isfinite, (self.vx, self.vy, self.yaw_rate, self.dt))):
            raise ValueError("control input must be finite")


@dataclass
class ParticleSet:
    """Weighted pose hypotheses; generation counts resampling events.

    mirror_debt and mirror_cursor carry the deterministic state of the
    antipodal-twin trickle between detector updates.
    """

    poses: np.ndarray  # (N, 3) columns x, y, yaw
    weights: np.ndarray  # (N,)
    generation: int = 0
    mirror_debt: float = 0.0
    mirror_cursor: int = 0

    def __post_init__(self):
        self.poses = np.asarray(self.poses, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.poses.ndim != 2 or self.poses.shape[1] != 3 or self.poses.shape[0] < 1:
            raise ValueError(f"poses must be (N, 3) with N >= 1, got {self.poses.shape}")
        if self.weights.shape != (self.poses.shape[0],):
            raise ValueError("weights must match particle count")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0.0):
            raise ValueError("weights must be finite and nonnegative")

    @property
    def n(self) -> int:
        return self.poses.shape[0]

    def copy(self) -> "ParticleSet":
        return ParticleSet(
            self.poses.copy(),
            self.weights.copy(),
            self.generation,
            self.mirror_debt,
            self.mirror_cursor,
        )


@dataclass(frozen=True)
class Estimate:
    """Weighted-mean pose with a spread summary.

    position_cov is the 2x2 weighted covariance of (x, y); yaw_spread is the
    circular variance 1 - |mean resultant| in [0, 1], where 0 means all yaws
    agree. A near-symmetric bimodal set shows up as a large position_cov.
    """

    pose: Pose2
    position_cov: np.ndarray
    yaw_spread: float


def _renormalize(weights: np.ndarray) -> None:
    total = weights.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise ValueError("particle weights collapsed: observation model degenerate")
    weights /= total


def init_uniform_disc(
    center: Pose2,
    radius: float,
    n: int,
    yaw_range: tuple[float, float],
    rng: np.random.Generator,
) -> ParticleSet:
    """Spread n particles area-uniformly over a disc.

    Yaw is drawn uniformly from yaw_range (absolute bounds, then wrapped);
    pass (-pi, pi) for a fully unknown heading. Weights start at 1/n.
    """
    if radius <= 0.0:
        raise ValueError(f"radius must be > 0, got {radius}")
    if n < 1:
        raise ValueError(f"need at least one particle, got {n}")
    r = radius * np.sqrt(rng.random(n))
    angle = rng.uniform(0.0, 2.0 * math.pi, n)
    poses = np.empty((n, 3))
    poses[:, 0] = center.x + r * np.cos(angle)
    poses[:, 1] = center.y + r * np.sin(angle)
    poses[:, 2] = normalize_angles(rng.uniform(yaw_range[0], yaw_range[1], n))
    return ParticleSet(poses=poses, weights=np.full(n, 1.0 / n))


def predict(
    pset: ParticleSet,
    control: ControlInput,
    config: FilterConfig,
    rng: np.random.Generator,
) -> ParticleSet:
    """Propagate every particle by the body-frame control plus Gaussian noise.

    The displacement (vx*dt, vy*dt) is rotated by each particle's own yaw
    into the map frame; weights are untouched. The yaw turn contribution to
    the noise sigma saturates at 0.05 rad per step so an instantaneous
    heading slew in the commanded path cannot blow up the heading spread.
    """
    n = pset.n
    dx_body = control.vx * control.dt
    dy_body = control.vy * control.dt
    dyaw = control.yaw_rate * control.dt
    yaw_sigma = config.yaw_noise + config.yaw_rate_noise * min(abs(dyaw), 0.05)
    c = np.cos(pset.poses[:, 2])
    s = np.sin(pset.poses[:, 2])
    pset.poses[:, 0] += c * dx_body - s * dy_body + rng.normal(0.0, config.position_noise, n)
    pset.poses[:, 1] += s * dx_body + c * dy_body + rng.normal(0.0, config.position_noise, n)
    pset.poses[:, 2] = normalize_angles(
        pset.poses[:, 2] + dyaw + rng.normal(0.0, yaw_sigma, n)
    )
    return pset


def detection_distances(
    poses: np.ndarray,
    detection: ObbDetection,
    world: WorldMap,
    params: SonarParams,
    config: FilterConfig,
) -> np.ndarray:
    """Detector observation distance for each pose row.

    dist = eta * |c_hat - c_obs|^2 + |sin(delta_hat - delta_obs)|, capped at
    config.max_dist; poses that cannot see the asset get exactly the cap.
    The |sin| term treats delta and delta + pi as equally valid, so the
    mirrored hypothesis of a symmetric asset is never penalized.
    """
    asset = world.asset(detection.asset_id)
    u, v, delta, visible = project_asset_batch(poses, asset, params)
    du = u - detection.u
    dv = v - detection.v
    dist = config.eta * (du * du + dv * dv) + np.abs(np.sin(delta - detection.delta))
    return np.where(visible, np.minimum(dist, config.max_dist), config.max_dist)


def _yaw_ambiguity(pset: ParticleSet) -> float:
    """Circular variance of the weighted yaws: ~0 when committed, ~1 when
    the heading posterior is diffuse or split between opposing modes."""
    sin_sum = float(np.dot(pset.weights, np.sin(pset.poses[:, 2])))
    cos_sum = float(np.dot(pset.weights, np.cos(pset.poses[:, 2])))
    return 1.0 - math.hypot(sin_sum, cos_sum)


def _mirror_twins(pset: ParticleSet, asset_pose, fraction: float, weight_scale: float) -> None:
    """Move a trickle of particles to their antipodal twin pose.

    The twin of a pose (reflected through the asset center, yaw turned by
    pi) produces the identical box projection up to the pi-ambiguous
    rotation, so the detector distance cannot tell them apart: both
    interpretations of an ambiguous detection stay represented. Selection
    is a deterministic golden-ratio index walk. Moved particles keep
    weight_scale of their weight, so the transfer spends a small, fixed
    prior cost on the alternative interpretation instead of betting full
    mass on it.
    """
    pset.mirror_debt += fraction * pset.n
    count = int(pset.mirror_debt)
    if count <= 0:
        return
    pset.mirror_debt -= count
    step = max(1, int(0.6180339887 * pset.n))
    idx = (pset.mirror_cursor + (1 + np.arange(count)) * step) % pset.n
    pset.mirror_cursor = int(idx[-1])
    pset.poses[idx, 0] = 2.0 * asset_pose.x - pset.poses[idx, 0]
    pset.poses[idx, 1] = 2.0 * asset_pose.y - pset.poses[idx, 1]
    pset.poses[idx, 2] = normalize_angles(pset.poses[idx, 2] + math.pi)
    pset.weights[idx] *= weight_scale


def update_sad(
    pset: ParticleSet,
    detection: ObbDetection,
    world: WorldMap,
    params: SonarParams,
    config: FilterConfig,
) -> ParticleSet:
    """Reweight by the detector observation model and renormalize.

    Before weighting, a mirror_fraction trickle of particles is swapped to
    their antipodal twin so the second valid interpretation of the rotation
    ambiguity keeps a foothold in the set. Each weight is then multiplied
    by exp(-dist); distances are shifted by their minimum before
    exponentiation, which cancels in the renormalization. Raises KeyError
    for an unknown asset id.
    """
    asset = world.asset(detection.asset_id)
    if config.mirror_fraction > 0.0 and _yaw_ambiguity(pset) > config.mirror_gate:
        _mirror_twins(pset, asset.pose, config.mirror_fraction, config.mirror_weight)
    dist = detection_distances(pset.poses, detection, world, params, config)
    pset.weights *= np.exp(-(dist - dist.min()))
    _renormalize(pset.weights)
    return pset


def update_prec(
    pset: ParticleSet,
    observation: RegionObservation,
    world: WorldMap,
    params: SonarParams,
    config: FilterConfig,
) -> ParticleSet:
    """Boost particles inside the observed asset quadrant by alpha.

    A particle is in-region when its quadrant around the observed asset
    matches and the asset lies within sensing range r_max. An empty
    observation leaves the set untouched.
    """
    region = observation.region
    if region is None:
        return pset
    asset = world.asset(region.asset_id)
    quadrant, rng_to_asset = quadrant_batch(pset.poses, asset)
    in_region = (quadrant == region.quadrant) & (rng_to_asset <= params.r_max)
    pset.weights[in_region] *= config.alpha
    _renormalize(pset.weights)
    return pset


def effective_sample_size(pset: ParticleSet) -> float:
    """ESS = 1 / sum(w^2); equals N for uniform weights, 1 at full collapse."""
    return 1.0 / float(np.sum(pset.weights**2))


def resample(pset: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Systematic (low-variance) resampling back to uniform weights.

    Draws one uniform offset and N evenly spaced pointers, so the expected
    multiplicity of particle i is exactly N * w_i. Raises ValueError when the
    weights have collapsed to zero.
    """
    w = pset.weights
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise ValueError("cannot resample: all particle weights are zero")
    n = pset.n
    pointers = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(w / total)
    cumulative[-1] = 1.0  # guard against rounding just below 1
    indices = np.searchsorted(cumulative, pointers, side="right")
    pset.poses = pset.poses[indices]
    pset.weights = np.full(n, 1.0 / n)
    pset.generation += 1
    return pset


def estimate(pset: ParticleSet) -> Estimate:
    """Weighted mean pose: ordinary mean in x/y, circular mean in yaw."""
    w = pset.weights
    x = float(np.dot(w, pset.poses[:, 0]))
    y = float(np.dot(w, pset.poses[:, 1]))
    sin_sum = float(np.dot(w, np.sin(pset.poses[:, 2])))
    cos_sum = float(np.dot(w, np.cos(pset.poses[:, 2])))
    yaw = math.atan2(sin_sum, cos_sum)

    dx = pset.poses[:, 0] - x
    dy = pset.poses[:, 1] - y
    cov = np.array(
        [
            [float(np.dot(w, dx * dx)), float(np.dot(w, dx * dy))],
            [float(np.dot(w, dx * dy)), float(np.dot(w, dy * dy))],
        ]
    )
    yaw_spread = 1.0 - math.hypot(sin_sum, cos_sum)
    return Estimate(pose=Pose2(x, y, yaw), position_cov=cov, yaw_spread=yaw_spread)


def particles_to_csv(pset: ParticleSet, path: str | Path) -> None:
    """Dump the particle set for debugging or visualization."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "x", "y", "yaw", "w"])
        for i in range(pset.n):
            writer.writerow(
                [
                    i,
                    repr(float(pset.poses[i, 0])),
                    repr(float(pset.poses[i, 1])),
                    repr(float(pset.poses[i, 2])),
                    repr(float(pset.weights[i])),
                ]
            )
