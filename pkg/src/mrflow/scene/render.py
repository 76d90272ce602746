"""Depth + part-segmentation rendering with a per-pixel z-buffer.

Every posed face is ray-cast over the pixels of its projected bounding box and
the nearest hit wins. Depths are exact ray/surface intersections, so a planar
part deprojects to an exactly planar point cloud.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingPartError
from ..geometry import CameraIntrinsics, Line3, RigidTransform, pixel_rays
from .camera import CameraPose
from .objects import ArticulatedObject, Category, JointKind, Part
from .primitives import NEAR


@dataclass(frozen=True, eq=False)
class SceneJoint:
    """Ground-truth joint expressed in the camera frame of one rendered scene.

    ``axis.direction`` keeps the joint's rotation sense; ``axis.point`` is the
    middle of the child's extent along the axis and ``span`` that extent.
    """

    parent: int
    child: int
    kind: JointKind
    limits: tuple[float, float]
    value: float = 0.0
    axis: Line3 | None = None
    direction: np.ndarray | None = None
    span: float | None = None

    @property
    def max_travel(self) -> float | None:
        return self.limits[1] - self.limits[0] if self.kind is JointKind.PRISMATIC else None

    def to_dict(self) -> dict:
        return {
            "parent": self.parent,
            "child": self.child,
            "kind": self.kind.value,
            "limits": [float(self.limits[0]), float(self.limits[1])],
            "value": float(self.value),
            "axis_point": None if self.axis is None else self.axis.point.tolist(),
            "axis_dir": None if self.axis is None else self.axis.direction.tolist(),
            "direction": None if self.direction is None else self.direction.tolist(),
            "max_travel": self.max_travel,
            "span": self.span,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneJoint":
        axis = None
        if d.get("axis_point") is not None:
            axis = Line3(np.array(d["axis_point"], dtype=float), np.array(d["axis_dir"], dtype=float))
        direction = None if d.get("direction") is None else np.array(d["direction"], dtype=float)
        return cls(int(d["parent"]), int(d["child"]), JointKind(d["kind"]),
                   (float(d["limits"][0]), float(d["limits"][1])), float(d["value"]),
                   axis, direction, d.get("span"))


@dataclass(frozen=True)
class PartInfo:
    id: int
    name: str
    source: str  # "object" or "distractor"


@dataclass(eq=False)
class RenderedScene:
    depth: np.ndarray  # (H, W) metres, 0 = no hit
    seg: np.ndarray  # (H, W) part ids, 0 = background
    intrinsics: CameraIntrinsics
    camera: CameraPose
    category: Category
    parts: dict[int, PartInfo]
    joints: list[SceneJoint]
    joint_values: dict[int, float] = field(default_factory=dict)

    def mask(self, pid: int) -> np.ndarray:
        if pid not in self.parts:
            raise MissingPartError(f"part {pid} not in scene")
        return self.seg == pid

    def pixel_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.seg[self.seg > 0], return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}

    def visible_parts(self) -> list[int]:
        return sorted(self.pixel_counts())

    def joint_between(self, a: int, b: int) -> SceneJoint | None:
        for j in self.joints:
            if {j.parent, j.child} == {a, b}:
                return j
        return None


def _pixel_bbox(hull_cam: np.ndarray, k: CameraIntrinsics):
    z = hull_cam[:, 2]
    if np.all(z <= NEAR):
        return None
    if np.any(z <= NEAR):
        return 0, k.height, 0, k.width
    u = k.fx * hull_cam[:, 0] / z + k.cx
    v = k.fy * hull_cam[:, 1] / z + k.cy
    c0 = max(0, int(np.floor(u.min())) - 1)
    c1 = min(k.width, int(np.ceil(u.max())) + 2)
    r0 = max(0, int(np.floor(v.min())) - 1)
    r1 = min(k.height, int(np.ceil(v.max())) + 2)
    if c0 >= c1 or r0 >= r1:
        return None
    return r0, r1, c0, c1


def raycast(faces_with_ids, k: CameraIntrinsics, depth=None, seg=None):
    """Z-buffer the camera-frame faces; returns ``(depth, seg)`` with inf for no hit."""
    if depth is None:
        depth = np.full(k.shape, np.inf)
        seg = np.zeros(k.shape, dtype=np.int32)
    for face, pid in faces_with_ids:
        box = _pixel_bbox(face.hull(), k)
        if box is None:
            continue
        r0, r1, c0, c1 = box
        rows, cols = np.mgrid[r0:r1, c0:c1]
        t = face.intersect(pixel_rays(k, rows, cols))
        dsub, ssub = depth[r0:r1, c0:c1], seg[r0:r1, c0:c1]
        closer = t < dsub
        dsub[closer] = t[closer]
        ssub[closer] = pid
    return depth, seg


def posed_faces(parts: list[Part], motions: dict[int, RigidTransform], world_to_camera: RigidTransform):
    out = []
    for p in parts:
        T = world_to_camera @ motions.get(p.id, RigidTransform.identity())
        out.extend((f, p.id) for f in p.posed_faces(T))
    return out


def camera_joints(obj: ArticulatedObject, values: dict[int, float], world_to_camera: RigidTransform):
    motions = obj.part_motions(values)
    out = []
    for parent, child, j in obj.joints:
        W = world_to_camera @ motions[parent]
        axis = direction = span = None
        if j.kind is JointKind.REVOLUTE:
            s0, s1 = obj.axis_extent(child, j.axis)
            mid = Line3(j.axis.point + 0.5 * (s0 + s1) * j.axis.direction, j.axis.direction)
            axis = W.apply_line(mid)
            span = s1 - s0
        elif j.kind is JointKind.PRISMATIC:
            direction = W.apply_vector(j.direction)
        out.append(SceneJoint(parent, child, j.kind, j.limits, values.get(child, 0.0), axis, direction, span))
    return out


def finalize(depth: np.ndarray, seg: np.ndarray):
    depth = np.where(np.isfinite(depth), depth, 0.0)
    seg = np.where(depth > 0, seg, 0).astype(np.int32)
    return depth, seg


def render(obj: ArticulatedObject, joint_values: dict[int, float], camera: CameraPose,
           intrinsics: CameraIntrinsics | None = None, distractors: list[Part] = ()) -> RenderedScene:
    k = intrinsics or CameraIntrinsics.default()
    motions = obj.part_motions(joint_values)
    faces = posed_faces(obj.parts, motions, camera.world_to_camera)
    faces += posed_faces(list(distractors), {}, camera.world_to_camera)
    depth, seg = finalize(*raycast(faces, k))
    parts = {p.id: PartInfo(p.id, p.name, "object") for p in obj.parts}
    parts.update({p.id: PartInfo(p.id, p.name, "distractor") for p in distractors})
    return RenderedScene(depth, seg, k, camera, obj.category, parts,
                         camera_joints(obj, joint_values, camera.world_to_camera), dict(joint_values))
