"""Camera placement on the front upper hemisphere of an object."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import CameraIntrinsics, RigidTransform, normalize

MAX_ELEVATION = math.radians(75.0)
MAX_AZIMUTH = math.radians(75.0)
JITTER_FRACTION = 0.05
UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class CameraPose:
    """Extrinsics: ``world_to_camera`` maps object-frame points into the camera frame."""

    world_to_camera: RigidTransform
    position: np.ndarray
    target: np.ndarray
    elevation: float
    azimuth: float
    radius: float

    @property
    def forward(self) -> np.ndarray:
        return self.world_to_camera.R[2]

    def to_dict(self) -> dict:
        return {
            "rotation": self.world_to_camera.R.tolist(),
            "translation": self.world_to_camera.t.tolist(),
            "position": self.position.tolist(),
            "target": self.target.tolist(),
            "elevation": self.elevation,
            "azimuth": self.azimuth,
            "radius": self.radius,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPose":
        T = RigidTransform(np.array(d["rotation"], dtype=float), np.array(d["translation"], dtype=float))
        return cls(T, np.array(d["position"], dtype=float), np.array(d["target"], dtype=float),
                   float(d["elevation"]), float(d["azimuth"]), float(d["radius"]))


def look_at(position, target) -> RigidTransform:
    z = normalize(np.asarray(target, dtype=float) - position)
    x = normalize(np.cross(z, UP))
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return RigidTransform(R, -R @ position)


def fit_radius_range(lo: np.ndarray, hi: np.ndarray, k: CameraIntrinsics) -> tuple[float, float]:
    """Distances at which the object's bounding sphere roughly fills the view."""
    r = 0.5 * float(np.linalg.norm(hi - lo))
    half_fov = min(math.atan(k.width / (2 * k.fx)), math.atan(k.height / (2 * k.fy)))
    base = r / math.sin(half_fov)
    return max(0.3, 0.9 * base), max(0.4, 1.4 * base)


def sample_camera(obj, config, seed: int, joint_values=None) -> CameraPose:
    """Uniform position on the front upper hemisphere shell, aimed at the bbox center."""
    rng = np.random.default_rng(seed)
    lo, hi = obj.bounds(joint_values)
    center = (lo + hi) / 2
    extent = float(np.max(hi - lo))
    r_lo, r_hi = config.radius_range or fit_radius_range(lo, hi, config.intrinsics)
    radius = float(rng.uniform(r_lo, r_hi))
    # area-uniform on the spherical band: sin(elevation) is uniform
    elev = math.asin(rng.uniform(0.0, math.sin(MAX_ELEVATION)))
    azim = float(rng.uniform(-MAX_AZIMUTH, MAX_AZIMUTH))
    offset = radius * np.array([math.cos(elev) * math.sin(azim), math.cos(elev) * math.cos(azim), math.sin(elev)])
    position = center + offset
    jitter = rng.normal(size=3)
    jitter *= JITTER_FRACTION * extent * rng.uniform() ** (1 / 3) / np.linalg.norm(jitter)
    target = center + jitter
    return CameraPose(look_at(position, target), position, target, elev, azim, radius)
