"""Surface primitives: double-sided rectangles, disks and cylinder sides.

Each primitive can be rigidly transformed, ray-cast against a bundle of
camera rays (rays with z == 1, so the hit parameter is the depth), sampled on
a regular grid and queried for exact point-to-surface distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import RigidTransform, normalize

NEAR = 1e-3


def _perp_basis(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([1.0, 0.0, 0.0]) if abs(w[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = normalize(np.cross(w, a))
    return e1, np.cross(w, e1)


@dataclass(frozen=True, eq=False)
class Rect:
    center: np.ndarray
    u: np.ndarray
    v: np.ndarray
    half_u: float
    half_v: float

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.u, self.v)

    def transformed(self, T: RigidTransform) -> "Rect":
        return Rect(T.apply(self.center), T.apply_vector(self.u), T.apply_vector(self.v),
                    self.half_u, self.half_v)

    def hull(self) -> np.ndarray:
        su, sv = self.half_u * self.u, self.half_v * self.v
        return self.center + np.array([su + sv, su - sv, -su + sv, -su - sv])

    def intersect(self, rays: np.ndarray) -> np.ndarray:
        n = self.normal
        denom = rays @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.center @ n) / denom
        loc = rays * t[..., None] - self.center
        a, b = loc @ self.u, loc @ self.v
        hit = (t > NEAR) & (np.abs(a) <= self.half_u) & (np.abs(b) <= self.half_v)
        return np.where(hit, t, np.inf)

    def sample(self, spacing: float) -> np.ndarray:
        nu = max(2, int(math.ceil(2 * self.half_u / spacing)) + 1)
        nv = max(2, int(math.ceil(2 * self.half_v / spacing)) + 1)
        a, b = np.meshgrid(np.linspace(-self.half_u, self.half_u, nu),
                           np.linspace(-self.half_v, self.half_v, nv), indexing="ij")
        return self.center + a.reshape(-1, 1) * self.u + b.reshape(-1, 1) * self.v

    def distance(self, points: np.ndarray) -> np.ndarray:
        loc = np.asarray(points) - self.center
        a = np.clip(loc @ self.u, -self.half_u, self.half_u)
        b = np.clip(loc @ self.v, -self.half_v, self.half_v)
        closest = self.center + a[:, None] * self.u + b[:, None] * self.v
        return np.linalg.norm(points - closest, axis=1)


@dataclass(frozen=True, eq=False)
class Disk:
    center: np.ndarray
    normal: np.ndarray
    radius: float

    def transformed(self, T: RigidTransform) -> "Disk":
        return Disk(T.apply(self.center), T.apply_vector(self.normal), self.radius)

    def hull(self) -> np.ndarray:
        e1, e2 = _perp_basis(self.normal)
        r = self.radius
        return self.center + r * np.array([e1 + e2, e1 - e2, -e1 + e2, -e1 - e2])

    def intersect(self, rays: np.ndarray) -> np.ndarray:
        denom = rays @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.center @ self.normal) / denom
        loc = rays * t[..., None] - self.center
        hit = (t > NEAR) & (np.einsum("...i,...i->...", loc, loc) <= self.radius ** 2)
        return np.where(hit, t, np.inf)

    def sample(self, spacing: float) -> np.ndarray:
        e1, e2 = _perp_basis(self.normal)
        pts = [self.center[None]]
        rings = max(1, int(math.ceil(self.radius / spacing)))
        for i in range(1, rings + 1):
            r = self.radius * i / rings
            m = max(6, int(math.ceil(2 * math.pi * r / spacing)))
            ang = np.arange(m) * (2 * math.pi / m)
            pts.append(self.center + r * (np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2))
        return np.concatenate(pts)

    def distance(self, points: np.ndarray) -> np.ndarray:
        loc = np.asarray(points) - self.center
        h = loc @ self.normal
        radial = loc - h[:, None] * self.normal
        rn = np.linalg.norm(radial, axis=1)
        over = np.maximum(rn - self.radius, 0.0)
        return np.hypot(h, over)


@dataclass(frozen=True, eq=False)
class CylinderSide:
    center: np.ndarray
    axis: np.ndarray
    radius: float
    half_length: float

    def transformed(self, T: RigidTransform) -> "CylinderSide":
        return CylinderSide(T.apply(self.center), T.apply_vector(self.axis), self.radius, self.half_length)

    def hull(self) -> np.ndarray:
        e1, e2 = _perp_basis(self.axis)
        r, h = self.radius, self.half_length
        out = []
        for sh in (-h, h):
            for s1 in (-r, r):
                for s2 in (-r, r):
                    out.append(self.center + sh * self.axis + s1 * e1 + s2 * e2)
        return np.array(out)

    def intersect(self, rays: np.ndarray) -> np.ndarray:
        w, c = self.axis, self.center
        rw = rays @ w
        r_perp = rays - rw[..., None] * w
        c_perp = c - (c @ w) * w
        a = np.einsum("...i,...i->...", r_perp, r_perp)
        b = -2.0 * (r_perp @ c_perp)
        cc = c_perp @ c_perp - self.radius ** 2
        disc = b * b - 4.0 * a * cc
        ok = (disc >= 0) & (a > 1e-18)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-b - sq) / (2.0 * a)
            t2 = (-b + sq) / (2.0 * a)
        cw = c @ w
        in1 = ok & (t1 > NEAR) & (np.abs(t1 * rw - cw) <= self.half_length)
        in2 = ok & (t2 > NEAR) & (np.abs(t2 * rw - cw) <= self.half_length)
        return np.where(in1, t1, np.where(in2, t2, np.inf))

    def sample(self, spacing: float) -> np.ndarray:
        e1, e2 = _perp_basis(self.axis)
        m = max(8, int(math.ceil(2 * math.pi * self.radius / spacing)))
        k = max(2, int(math.ceil(2 * self.half_length / spacing)) + 1)
        ang = np.arange(m) * (2 * math.pi / m)
        ring = self.radius * (np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2)
        hs = np.linspace(-self.half_length, self.half_length, k)
        return (self.center + hs[:, None, None] * self.axis + ring[None]).reshape(-1, 3)

    def distance(self, points: np.ndarray) -> np.ndarray:
        loc = np.asarray(points) - self.center
        h = loc @ self.axis
        radial = np.linalg.norm(loc - h[:, None] * self.axis, axis=1)
        over = np.maximum(np.abs(h) - self.half_length, 0.0)
        return np.hypot(radial - self.radius, over)


def box(center, half_extents, rotation=None, open_faces: tuple[str, ...] = ()) -> list:
    """Six rectangles of a box; ``open_faces`` drops faces named '+x', '-y', ...."""
    c = np.asarray(center, dtype=float)
    R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    hx, hy, hz = half_extents
    ex, ey, ez = R[:, 0], R[:, 1], R[:, 2]
    spec = {
        "+x": (c + hx * ex, ey, ez, hy, hz),
        "-x": (c - hx * ex, ey, ez, hy, hz),
        "+y": (c + hy * ey, ex, ez, hx, hz),
        "-y": (c - hy * ey, ex, ez, hx, hz),
        "+z": (c + hz * ez, ex, ey, hx, hy),
        "-z": (c - hz * ez, ex, ey, hx, hy),
    }
    return [Rect(*v) for name, v in spec.items() if name not in open_faces]


def box_between(lo, hi, open_faces: tuple[str, ...] = ()) -> list:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    return box((lo + hi) / 2, (hi - lo) / 2, open_faces=open_faces)


def cylinder(center, axis, radius: float, half_length: float, caps: bool = True) -> list:
    c = np.asarray(center, dtype=float)
    w = normalize(axis)
    faces = [CylinderSide(c, w, radius, half_length)]
    if caps:
        faces += [Disk(c + half_length * w, w, radius), Disk(c - half_length * w, w, radius)]
    return faces


def sheet(center, u, v, half_u: float, half_v: float) -> Rect:
    return Rect(np.asarray(center, dtype=float), normalize(u), normalize(v), half_u, half_v)
