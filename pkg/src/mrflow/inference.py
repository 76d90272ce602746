"""Articulation type and parameters from depth, a part mask and a residual flow.

The decision procedure:

1. mean per-pixel flow norm over the mask below ``eps0``  -> fixed
2. fit planes to the part's point cloud before and after applying the flow
3. (camera-facing) normals agree to within ``eps1``       -> prismatic along
   the mean flow
4. otherwise                                              -> revolute about the
   intersection line of the two planes
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    IncompleteInputError,
    InsufficientObservationError,
    InvalidInputError,
    MissingPartError,
    NoConsensusError,
    NumericalError,
    ParallelPlanesError,
    PlaneFitFailedError,
)
from .geometry import CameraIntrinsics, Line3, deproject_image, plane_intersection
from .ransac import PlaneFit, RansacParams, ransac_plane

LOW_CONFIDENCE_FRACTION = 0.3
CONNECTED_THRESHOLD = 0.5


class ArticulationKind(str, Enum):
    FIXED = "fixed"
    PRISMATIC = "prismatic"
    REVOLUTE = "revolute"
    UNCONNECTED = "unconnected"


@dataclass(frozen=True)
class InferenceParams:
    eps0: float = 0.01  # metres, on the mean per-pixel flow norm
    eps1: float = 1.0 - math.cos(math.radians(5.0))
    ransac: RansacParams = field(default_factory=RansacParams)

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0 < self.eps1 < 1:
            raise ValueError("eps1 must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class ArticulationEstimate:
    kind: ArticulationKind
    axis: Line3 | None = None
    direction: np.ndarray | None = None
    mean_flow_norm: float | None = None
    pre: PlaneFit | None = None
    post: PlaneFit | None = None
    low_confidence: bool = False
    inlier_mean_direction: np.ndarray | None = None

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.axis is not None:
            out["axis_point"] = self.axis.point.tolist()
            out["axis_dir"] = self.axis.direction.tolist()
        if self.direction is not None:
            out["dir"] = self.direction.tolist()
        diag: dict = {}
        if self.mean_flow_norm is not None:
            diag["mean_flow_norm"] = self.mean_flow_norm
        if self.pre is not None:
            diag["pre_plane"] = self.pre.to_dict()
            diag["post_plane"] = self.post.to_dict()
            diag["low_confidence"] = self.low_confidence
        if self.inlier_mean_direction is not None:
            diag["inlier_mean_dir"] = self.inlier_mean_direction.tolist()
        if diag:
            out["diagnostics"] = diag
        return out


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if not n > 0:
        raise NumericalError("mean flow vanishes; no translation direction")
    return v / n


def articulation_from_points(points: np.ndarray, flows: np.ndarray, mean_flow: np.ndarray,
                             params: InferenceParams) -> ArticulationEstimate:
    """Plane-fitting stage on an already-deprojected point cloud and its flows.

    ``mean_flow`` is the mean flow over the whole mask (used for the prismatic
    direction); ``flows`` are the flows of the points with valid depth.
    """
    n = points.shape[0]
    need = max(3, params.ransac.resolved_min_inliers(n))
    if n < need:
        raise InsufficientObservationError(f"{n} valid pixels, need {need}")
    moved = points + flows
    try:
        pre = ransac_plane(points, params.ransac)
        post = ransac_plane(moved, params.ransac)
    except NoConsensusError as exc:
        raise PlaneFitFailedError(str(exc)) from exc
    low = min(pre.inlier_fraction, post.inlier_fraction) < LOW_CONFIDENCE_FRACTION
    mean_norm = float(np.linalg.norm(flows, axis=1).mean()) if n else 0.0
    if float(pre.plane.normal @ post.plane.normal) > 1.0 - params.eps1:
        inl = np.intersect1d(pre.inlier_indices, post.inlier_indices)
        inlier_dir = _unit(flows[inl].mean(axis=0)) if inl.size else None
        return ArticulationEstimate(ArticulationKind.PRISMATIC, direction=_unit(mean_flow),
                                    mean_flow_norm=mean_norm, pre=pre, post=post, low_confidence=low,
                                    inlier_mean_direction=inlier_dir)
    try:
        axis = plane_intersection(pre.plane, post.plane)
    except ParallelPlanesError as exc:
        raise PlaneFitFailedError(str(exc)) from exc
    return ArticulationEstimate(ArticulationKind.REVOLUTE, axis=axis, mean_flow_norm=mean_norm,
                                pre=pre, post=post, low_confidence=low)


def infer_articulation(depth: np.ndarray, mask: np.ndarray, flow, params: InferenceParams,
                       k: CameraIntrinsics) -> ArticulationEstimate:
    data = getattr(flow, "data", flow)
    data = np.asarray(data, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if data.shape[:2] != mask.shape or depth.shape != mask.shape:
        raise InvalidInputError("depth, mask and flow must share the image size")
    if not mask.any():
        raise InsufficientObservationError("empty mask")
    masked = data[mask]
    mean_norm = float(np.linalg.norm(masked, axis=1).mean())
    if mean_norm < params.eps0:
        return ArticulationEstimate(ArticulationKind.FIXED, mean_flow_norm=mean_norm)
    points, rows, cols = deproject_image(depth, mask, k)
    est = articulation_from_points(points, data[rows, cols], masked.mean(axis=0), params)
    # report the raw-mask statistic, the quantity the fixed test used
    return ArticulationEstimate(est.kind, est.axis, est.direction, mean_norm, est.pre, est.post,
                                est.low_confidence, est.inlier_mean_direction)


def is_connected(connectedness) -> bool:
    if isinstance(connectedness, (bool, np.bool_)):
        return bool(connectedness)
    return float(connectedness) >= CONNECTED_THRESHOLD


def infer_pair(depth, mask_a, mask_b, flow, connectedness, params: InferenceParams,
               k: CameraIntrinsics) -> ArticulationEstimate:
    if np.any(np.asarray(mask_a, dtype=bool) & np.asarray(mask_b, dtype=bool)):
        raise InvalidInputError("part masks overlap")
    if not is_connected(connectedness):
        return ArticulationEstimate(ArticulationKind.UNCONNECTED)
    return infer_articulation(depth, mask_b, flow, params, k)


@dataclass(frozen=True, eq=False)
class PairPrediction:
    a: int
    b: int
    connectedness: float | bool
    flow: object  # FlowImage or (H, W, 3) array; ignored when unconnected


@dataclass(eq=False)
class KinematicGraph:
    nodes: list[int]
    edges: list[tuple[int, int, ArticulationEstimate]]

    def edge(self, a: int, b: int) -> ArticulationEstimate | None:
        for x, y, e in self.edges:
            if {x, y} == {a, b}:
                return e
        return None

    def to_dict(self) -> dict:
        return {"nodes": list(self.nodes),
                "edges": [{"a": a, "b": b, **e.to_dict()} for a, b, e in self.edges]}


def recover_chain(depth: np.ndarray, seg: np.ndarray, predictions: list[PairPrediction],
                  params: InferenceParams, k: CameraIntrinsics) -> KinematicGraph:
    """Edges for every pair the predictor calls connected, from all-pairs queries."""
    nodes = sorted(int(i) for i in np.unique(seg) if i != 0)
    seen = set()
    for p in predictions:
        key = frozenset((p.a, p.b))
        if len(key) != 2:
            raise InvalidInputError(f"pair ({p.a}, {p.b}) is not a pair of distinct parts")
        if key in seen:
            raise InvalidInputError(f"duplicate prediction for pair ({p.a}, {p.b})")
        for pid in key:
            if pid not in nodes:
                raise MissingPartError(f"part {pid} not visible in segmentation")
        seen.add(key)
    missing = [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:] if frozenset((a, b)) not in seen]
    if missing:
        raise IncompleteInputError(f"no prediction for pairs {missing}")
    edges = []
    for p in predictions:
        if not is_connected(p.connectedness):
            continue
        est = infer_pair(depth, seg == p.a, seg == p.b, p.flow, True, params, k)
        edges.append((p.a, p.b, est))
    return KinematicGraph(nodes, edges)
