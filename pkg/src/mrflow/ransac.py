"""Robust plane estimation (RANSAC over minimal 3-point samples)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DegenerateGeometryError, InsufficientPointsError, NoConsensusError
from .geometry import Plane, fit_plane_lsq

COLLINEAR_SIN_TOL = 1e-9
# total draws allowed, relative to the hypothesis budget, before giving up on
# a point set whose samples keep coming out degenerate
MAX_DRAW_FACTOR = 20


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 1000
    inlier_threshold: float = 0.01
    min_inliers: int | None = None  # None: max(3, 10% of the points)
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be positive")
        if self.min_inliers is not None and self.min_inliers < 3:
            raise ValueError("min_inliers must be >= 3")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def resolved_min_inliers(self, n_points: int) -> int:
        if self.min_inliers is not None:
            return self.min_inliers
        return max(3, int(math.ceil(0.1 * n_points)))

    def scaled(self, s: float) -> "RansacParams":
        return RansacParams(self.iterations, self.inlier_threshold * s, self.min_inliers, self.seed)


@dataclass(frozen=True, eq=False)
class PlaneFit:
    plane: Plane
    inlier_indices: np.ndarray
    inlier_rmse: float
    num_points: int = 0
    hypothesis: int = -1  # index of the winning minimal sample

    @property
    def inlier_fraction(self) -> float:
        return self.inlier_indices.size / self.num_points if self.num_points else 0.0

    def to_dict(self) -> dict:
        d = self.plane.to_dict()
        d.update(inliers=int(self.inlier_indices.size), num_points=int(self.num_points),
                 inlier_rmse=float(self.inlier_rmse))
        return d


@numba.njit(cache=True)
def _score(points, normals, offsets, thr):
    h = normals.shape[0]
    n = points.shape[0]
    counts = np.zeros(h, np.int64)
    sq = np.zeros(h)
    for j in range(h):
        nx, ny, nz, o = normals[j, 0], normals[j, 1], normals[j, 2], offsets[j]
        c = 0
        s = 0.0
        for i in range(n):
            d = abs(points[i, 0] * nx + points[i, 1] * ny + points[i, 2] * nz - o)
            if d <= thr:
                c += 1
                s += d * d
        counts[j] = c
        sq[j] = s
    return counts, sq


def _draw_hypotheses(points: np.ndarray, iterations: int, seed: int):
    """First ``iterations`` non-degenerate 3-point samples of the seeded stream."""
    rng = np.random.default_rng(seed)
    n = points.shape[0]
    normals, offsets = [], []
    have, drawn = 0, 0
    budget = MAX_DRAW_FACTOR * iterations + 100
    while have < iterations and drawn < budget:
        idx = rng.integers(0, n, size=(iterations, 3))
        drawn += iterations
        a, b, c = points[idx[:, 0]], points[idx[:, 1]], points[idx[:, 2]]
        ab, ac = b - a, c - a
        cr = np.cross(ab, ac)
        cn = np.linalg.norm(cr, axis=1)
        scale = np.linalg.norm(ab, axis=1) * np.linalg.norm(ac, axis=1)
        ok = (cn > COLLINEAR_SIN_TOL * scale) & (scale > 0)
        ok &= (idx[:, 0] != idx[:, 1]) & (idx[:, 0] != idx[:, 2]) & (idx[:, 1] != idx[:, 2])
        take = np.nonzero(ok)[0][: iterations - have]
        nrm = cr[take] / cn[take, None]
        normals.append(nrm)
        offsets.append(np.einsum("ij,ij->i", nrm, a[take]))
        have += take.size
    if have == 0:
        return np.zeros((0, 3)), np.zeros(0)
    return np.concatenate(normals), np.concatenate(offsets)


def ransac_plane(points, params: RansacParams = RansacParams()) -> PlaneFit:
    pts = np.ascontiguousarray(points, dtype=float)
    n = pts.shape[0]
    min_inliers = params.resolved_min_inliers(n)
    if n < max(3, min_inliers):
        raise InsufficientPointsError(f"{n} points, need at least {max(3, min_inliers)}")

    normals, offsets = _draw_hypotheses(pts, params.iterations, params.seed)
    if normals.shape[0] == 0:
        raise NoConsensusError("every sampled triple was degenerate")
    counts, sq = _score(pts, normals, offsets, params.inlier_threshold)
    eligible = counts >= min_inliers
    if not eligible.any():
        raise NoConsensusError(f"no hypothesis reached {min_inliers} inliers")
    rmse = np.sqrt(sq / np.maximum(counts, 1))
    # max by (count, -rmse), ties to the lowest hypothesis index
    order = np.lexsort((np.arange(counts.size), rmse, -counts))
    best = int(order[0])

    nb, ob = normals[best], offsets[best]
    inliers = np.nonzero(np.abs(pts @ nb - ob) <= params.inlier_threshold)[0]
    try:
        plane = fit_plane_lsq(pts[inliers])
    except DegenerateGeometryError as exc:
        raise NoConsensusError(f"inliers of best hypothesis are degenerate: {exc}") from exc
    dist = np.abs(plane.signed_distance(pts))
    final = np.nonzero(dist <= params.inlier_threshold)[0]
    if final.size < min_inliers:
        raise NoConsensusError("refit plane lost consensus")
    return PlaneFit(
        plane=plane,
        inlier_indices=final,
        inlier_rmse=float(np.sqrt(np.mean(dist[final] ** 2))),
        num_points=n,
        hypothesis=best,
    )
