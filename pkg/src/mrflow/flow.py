"""Ground-truth motion residual flow and the weighted flow/connectedness loss.

The flow of a part pair (anchor, candidate) is the camera-frame displacement
each visible candidate point would undergo if the candidate moved a fixed
residual amount along its joint, with the anchor held still: 30 degrees for
revolute joints, 30% of the maximum travel for prismatic joints, nothing for
fixed joints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .geometry import Line3, deproject_image, rotate_about_axis
from .scene.objects import JointKind
from .scene.render import RenderedScene, SceneJoint

REVOLUTE_RESIDUAL = math.radians(30.0)
PRISMATIC_RESIDUAL_FRACTION = 0.3
W_SE = 0.6
W_CE = 0.4
PROB_CLAMP = 1e-12


@dataclass(frozen=True, eq=False)
class FlowImage:
    data: np.ndarray  # (H, W, 3) metres, camera frame
    support: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.data.shape[:2] != self.support.shape or self.data.shape[-1] != 3:
            raise ShapeError(f"flow {self.data.shape} incompatible with support {self.support.shape}")

    @classmethod
    def from_array(cls, data: np.ndarray) -> "FlowImage":
        """Wrap a raw flow array; the support is wherever the flow is non-zero."""
        data = np.asarray(data, dtype=float)
        return cls(data, np.any(data != 0, axis=-1))


@dataclass(frozen=True, eq=False)
class PairLabel:
    connected: bool
    kind: JointKind | None = None
    axis: Line3 | None = None
    direction: np.ndarray | None = None
    max_travel: float | None = None
    span: float | None = None

    @property
    def four_class(self) -> str:
        return self.kind.value if self.connected else "unconnected"

    @classmethod
    def from_joint(cls, joint: SceneJoint | None) -> "PairLabel":
        if joint is None:
            return cls(False)
        return cls(True, joint.kind, joint.axis, joint.direction, joint.max_travel, joint.span)


def residual_magnitude(kind: JointKind, limits) -> float:
    if kind is JointKind.REVOLUTE:
        return REVOLUTE_RESIDUAL
    if kind is JointKind.PRISMATIC:
        return PRISMATIC_RESIDUAL_FRACTION * (limits[1] - limits[0])
    return 0.0


def rotation_sign(joint, configuration: float, magnitude: float | None = None) -> int:
    """Direction of the residual motion: +1 toward the upper limit unless it does not fit."""
    lo, hi = joint.limits
    if magnitude is None:
        magnitude = residual_magnitude(joint.kind, joint.limits)
    if hi - configuration >= magnitude:
        return 1
    if configuration - lo >= magnitude:
        return -1
    return 1 if hi - configuration >= configuration - lo else -1


def residual_displacement(points: np.ndarray, joint: SceneJoint, candidate_is_child: bool = True) -> np.ndarray:
    """Displacement of camera-frame ``points`` rigidly attached to the moving side."""
    sense = rotation_sign(joint, joint.value) * (1 if candidate_is_child else -1)
    if joint.kind is JointKind.REVOLUTE:
        return rotate_about_axis(points, joint.axis, sense * REVOLUTE_RESIDUAL) - points
    if joint.kind is JointKind.PRISMATIC:
        step = sense * PRISMATIC_RESIDUAL_FRACTION * joint.max_travel * joint.direction
        return np.broadcast_to(step, points.shape).copy()
    return np.zeros_like(points)


def gt_flow(scene: RenderedScene, anchor: int, candidate: int) -> tuple[FlowImage, PairLabel]:
    scene.mask(anchor)  # raises for unknown ids
    support = scene.mask(candidate)
    data = np.zeros(support.shape + (3,))
    joint = scene.joint_between(anchor, candidate)
    label = PairLabel.from_joint(joint)
    if joint is not None and joint.kind is not JointKind.FIXED:
        pts, rows, cols = deproject_image(scene.depth, support, scene.intrinsics)
        data[rows, cols] = residual_displacement(pts, joint, candidate_is_child=joint.child == candidate)
    return FlowImage(data, support), label


@dataclass(frozen=True)
class LossTerms:
    se: float
    ce: float
    weighted: float
    clamped: bool = False


def flow_loss(gt: FlowImage, pred: FlowImage, gt_conn: bool, pred_conn_prob: float) -> LossTerms:
    """Squared error on flows (summed), binary cross-entropy on connectedness.

    The flow term only contributes when the pair is truly connected.
    """
    g = gt.data if isinstance(gt, FlowImage) else np.asarray(gt, dtype=float)
    p = pred.data if isinstance(pred, FlowImage) else np.asarray(pred, dtype=float)
    if g.shape != p.shape:
        raise ShapeError(f"flow shapes differ: {g.shape} vs {p.shape}")
    se = float(np.sum((g - p) ** 2))
    q = min(max(float(pred_conn_prob), PROB_CLAMP), 1.0 - PROB_CLAMP)
    clamped = q != float(pred_conn_prob)
    y = 1.0 if gt_conn else 0.0
    ce = -(y * math.log(q) + (1.0 - y) * math.log(1.0 - q))
    return LossTerms(se, ce, W_SE * y * se + W_CE * ce, clamped)


def batch_loss(terms: list[LossTerms]) -> float:
    """Mean of the per-sample weighted losses."""
    if not terms:
        raise ValueError("empty batch")
    return sum(t.weighted for t in terms) / len(terms)
