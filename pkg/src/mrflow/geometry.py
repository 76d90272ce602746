"""Pinhole camera model and the 3D primitives used throughout the pipeline.

Camera frame: +X right, +Y down, +Z forward. Pixel ``(u, v)`` is column ``u``,
row ``v``; images are stored as ``(height, width[, channels])`` arrays.
Points are plain ``float64`` arrays of shape ``(3,)`` or ``(N, 3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCameraError,
    DegenerateGeometryError,
    InvalidDepthError,
    ParallelPlanesError,
)

ORIENT_TOL = 1e-9
PARALLEL_TOL = 1e-9
# lambda_mid / lambda_max below this means the points are (numerically) collinear
COLLINEAR_EIG_RATIO = 1e-12


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise DegenerateGeometryError(f"cannot normalize vector {v}")
    return v / n


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def default(cls) -> "CameraIntrinsics":
        """Kinect-style 640x480 sensor (about 63 x 49 degree field of view)."""
        return cls(fx=525.0, fy=525.0, cx=319.5, cy=239.5)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["width"]), int(d["height"]))


def deproject(pixel, depth: float, k: CameraIntrinsics) -> np.ndarray:
    u, v = pixel
    if not (0 <= u < k.width and 0 <= v < k.height):
        raise ValueError(f"pixel {pixel} outside {k.width}x{k.height} image")
    if not (np.isfinite(depth) and depth > 0):
        raise InvalidDepthError(f"depth must be positive and finite, got {depth}")
    return np.array([(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth], dtype=float)


def project(p, k: CameraIntrinsics) -> np.ndarray:
    x, y, z = np.asarray(p, dtype=float)
    if not z > 0:
        raise BehindCameraError(f"point {p} is not in front of the camera")
    return np.array([k.fx * x / z + k.cx, k.fy * y / z + k.cy])


def deproject_image(depth: np.ndarray, mask: np.ndarray, k: CameraIntrinsics):
    """Deproject every masked pixel with a valid (positive, finite) depth.

    Returns ``(points, rows, cols)``; points are ordered row-major.
    """
    valid = mask & np.isfinite(depth) & (depth > 0)
    rows, cols = np.nonzero(valid)
    z = depth[rows, cols].astype(float)
    pts = np.empty((rows.size, 3))
    pts[:, 0] = (cols - k.cx) * z / k.fx
    pts[:, 1] = (rows - k.cy) * z / k.fy
    pts[:, 2] = z
    return pts, rows, cols


def pixel_rays(k: CameraIntrinsics, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Rays through pixel centers, scaled so that their z component is 1."""
    r = np.empty(np.broadcast(rows, cols).shape + (3,))
    r[..., 0] = (cols - k.cx) / k.fx
    r[..., 1] = (rows - k.cy) / k.fy
    r[..., 2] = 1.0
    return r


def _orient_sign(vec: np.ndarray, tol: float) -> float:
    """+1 if the first component exceeding ``tol`` in magnitude is positive."""
    for c in vec:
        if c > tol:
            return 1.0
        if c < -tol:
            return -1.0
    return 1.0


@dataclass(frozen=True, eq=False)
class Plane:
    """The set ``{p : normal . p = offset}``."""

    normal: np.ndarray
    offset: float

    def canonical(self) -> "Plane":
        n = np.asarray(self.normal, dtype=float)
        # facing the camera means normal . (0, 0, -1) >= 0
        toward = -n[2]
        if toward > ORIENT_TOL:
            s = 1.0
        elif toward < -ORIENT_TOL:
            s = -1.0
        else:
            s = _orient_sign(n, ORIENT_TOL)
        return Plane(s * n, s * float(self.offset))

    def signed_distance(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.normal - self.offset

    def allclose(self, other: "Plane", atol: float = 1e-9) -> bool:
        a, b = self.canonical(), other.canonical()
        return bool(np.allclose(a.normal, b.normal, atol=atol) and abs(a.offset - b.offset) <= atol)

    def to_dict(self) -> dict:
        return {"normal": [float(c) for c in self.normal], "offset": float(self.offset)}


@dataclass(frozen=True, eq=False)
class Line3:
    """Infinite line ``point + t * direction``.

    The direction may carry an orientation (a joint's rotation sense); call
    :meth:`canonical` to obtain the orientation-free form.
    """

    point: np.ndarray
    direction: np.ndarray

    def canonical(self) -> "Line3":
        d = np.asarray(self.direction, dtype=float)
        return Line3(np.asarray(self.point, dtype=float), _orient_sign(d, ORIENT_TOL) * d)

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.point + t[..., None] * self.direction

    def closest_to_origin(self) -> "Line3":
        p = self.point - (self.point @ self.direction) * self.direction
        return Line3(p, self.direction)

    def allclose(self, other: "Line3", atol: float = 1e-9) -> bool:
        a = self.canonical().closest_to_origin()
        b = other.canonical().closest_to_origin()
        return bool(np.allclose(a.direction, b.direction, atol=atol)
                    and np.allclose(a.point, b.point, atol=atol))

    def to_dict(self) -> dict:
        return {"point": [float(c) for c in self.point], "direction": [float(c) for c in self.direction]}


def _sym3_eigvals(a: np.ndarray) -> tuple[float, float, float]:
    """Eigenvalues (descending) of a symmetric 3x3 matrix, trigonometric closed form."""
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    if p1 == 0.0:
        e = sorted((a[0, 0], a[1, 1], a[2, 2]), reverse=True)
        return float(e[0]), float(e[1]), float(e[2])
    q = np.trace(a) / 3.0
    p2 = (a[0, 0] - q) ** 2 + (a[1, 1] - q) ** 2 + (a[2, 2] - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    b = (a - q * np.eye(3)) / p
    r = np.linalg.det(b) / 2.0
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    e1 = q + 2.0 * p * math.cos(phi)
    e3 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    return float(e1), float(e2), float(e3)


def _null_vector(m: np.ndarray) -> np.ndarray:
    """Unit vector spanning the (near) null space of a rank-2 symmetric 3x3 matrix."""
    c = np.stack([np.cross(m[0], m[1]), np.cross(m[0], m[2]), np.cross(m[1], m[2])])
    norms = np.einsum("ij,ij->i", c, c)
    i = int(np.argmax(norms))
    if norms[i] == 0.0:
        raise DegenerateGeometryError("eigenvector is not unique")
    return c[i] / math.sqrt(norms[i])


def fit_plane_lsq(points) -> Plane:
    """Total-least-squares plane through ``points`` (N x 3, N >= 3)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
        raise DegenerateGeometryError("plane fit needs at least 3 points")
    centroid = pts.mean(axis=0)
    x = pts - centroid
    cov = (x.T @ x) / pts.shape[0]
    e1, e2, e3 = _sym3_eigvals(cov)
    if e1 <= 0.0 or e2 <= COLLINEAR_EIG_RATIO * e1:
        raise DegenerateGeometryError("points are coincident or collinear")
    n = _null_vector(cov - e3 * np.eye(3))
    return Plane(n, float(n @ centroid)).canonical()


def plane_intersection(a: Plane, b: Plane) -> Line3:
    n1 = np.asarray(a.normal, dtype=float)
    n2 = np.asarray(b.normal, dtype=float)
    c = float(n1 @ n2)
    if abs(c) >= 1.0 - PARALLEL_TOL:
        raise ParallelPlanesError("planes are parallel")
    d = normalize(np.cross(n1, n2))
    d1, d2 = float(a.offset), float(b.offset)
    det = 1.0 - c * c
    p = ((d1 - d2 * c) * n1 + (d2 - d1 * c) * n2) / det
    # one step of iterative refinement on the plane equations
    r1, r2 = d1 - n1 @ p, d2 - n2 @ p
    p = p + ((r1 - r2 * c) * n1 + (r2 - r1 * c) * n2) / det
    p = p - (p @ d) * d
    return Line3(p, d).canonical()


def axis_angle_matrix(direction, angle: float) -> np.ndarray:
    """Rotation matrix for ``angle`` radians about unit ``direction`` (right hand)."""
    k = np.asarray(direction, dtype=float)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    s, c = math.sin(angle), math.cos(angle)
    return np.eye(3) + s * kx + (1.0 - c) * (kx @ kx)


def rotate_about_axis(p, axis: Line3, angle: float) -> np.ndarray:
    """Rodrigues rotation of point(s) ``p`` about the line ``axis``."""
    p = np.asarray(p, dtype=float)
    k = np.asarray(axis.direction, dtype=float)
    v = p - axis.point
    c, s = math.cos(angle), math.sin(angle)
    kv = v @ k
    out = v * c + np.cross(k, v) * s + np.multiply.outer(kv * (1.0 - c), k)
    return axis.point + out


def point_to_line_distance(p, line: Line3):
    v = np.asarray(p, dtype=float) - line.point
    along = v @ line.direction
    perp = v - np.multiply.outer(along, line.direction)
    return np.linalg.norm(perp, axis=-1)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """``x -> R x + t``."""

    R: np.ndarray
    t: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def translation(cls, t) -> "RigidTransform":
        return cls(np.eye(3), np.asarray(t, dtype=float))

    @classmethod
    def about_line(cls, axis: Line3, angle: float) -> "RigidTransform":
        R = axis_angle_matrix(axis.direction, angle)
        return cls(R, axis.point - R @ axis.point)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(self.R @ other.R, self.R @ other.t + self.t)

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.R.T, -self.R.T @ self.t)

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.R.T + self.t

    def apply_vector(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.R.T

    def apply_line(self, line: Line3) -> Line3:
        return Line3(self.apply(line.point), self.apply_vector(line.direction))

    def apply_plane(self, plane: Plane) -> Plane:
        n = self.apply_vector(plane.normal)
        return Plane(n, float(plane.offset + n @ self.t))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.t
        return m
