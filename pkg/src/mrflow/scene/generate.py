"""Randomized scene generation: object, joint state, camera and distractors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import CameraIntrinsics, RigidTransform, deproject_image, normalize
from .camera import CameraPose, sample_camera
from .objects import ArticulatedObject, Category, JointKind, Part, build_object
from .primitives import box, cylinder
from .render import (
    PartInfo,
    RenderedScene,
    SceneJoint,
    camera_joints,
    finalize,
    posed_faces,
    raycast,
)

MAX_OCCLUSION = 0.5


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 0
    category: str = "mixed"
    radius_range: tuple[float, float] | None = None  # metres; None fits the object to the view
    distractors: int = 1
    joint_policy: str = "uniform"
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics.default)
    # observability of every movable part; scenes failing these are re-drawn
    min_moving_pixels: int = 100
    min_moving_flow: float = 0.012
    min_moving_width: float = 0.01  # metres, second principal std of the visible points
    max_attempts: int = 60

    def __post_init__(self):
        if self.category != "mixed":
            Category(self.category)
        if self.radius_range is not None and not 0 < self.radius_range[0] <= self.radius_range[1]:
            raise ValueError("radius range must be positive and ordered")
        if self.distractors < 0:
            raise ValueError("distractor count must be >= 0")
        if self.joint_policy != "uniform":
            raise ValueError("only the uniform-in-limits joint policy is supported")


def derive_seed(*keys: int) -> int:
    """64-bit seed deterministically derived from a tuple of integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


def scene_seed(master_seed: int, index: int) -> int:
    return derive_seed(master_seed, index)


_STREAM_CATEGORY, _STREAM_OBJECT, _STREAM_JOINTS, _STREAM_CAMERA, _STREAM_DISTRACTOR = range(5)


@dataclass(eq=False)
class GeneratedScene:
    scene: RenderedScene
    obj: ArticulatedObject
    distractors: list[Part]
    seed: int


def _distractor(pid: int, rng: np.random.Generator, center: np.ndarray, size: float) -> Part:
    if rng.random() < 0.5:
        yaw = rng.uniform(0, math.pi)
        c, s = math.cos(yaw), math.sin(yaw)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        half = size * rng.uniform(0.4, 1.0, size=3)
        faces = box(np.zeros(3), half, rotation=R)
        name = "distractor_box"
    else:
        faces = cylinder(np.zeros(3), (0, 0, 1), size * rng.uniform(0.4, 0.8), size * rng.uniform(0.5, 1.0))
        name = "distractor_cylinder"
    return Part(pid, name, tuple(faces), RigidTransform.translation(center))


def _place_distractors(obj, cam: CameraPose, cfg: SceneConfig, depth, seg, rng):
    k = cfg.intrinsics
    base = dict(zip(*np.unique(seg[seg > 0], return_counts=True)))
    cam_to_world = cam.world_to_camera.inverse()
    lo, hi = obj.bounds()
    extent = float(np.max(hi - lo))
    placed: list[Part] = []
    next_id = max(p.id for p in obj.parts) + 1
    for _ in range(cfg.distractors):
        targets = sorted(base)
        if not targets:
            break
        for attempt in range(8):
            pid = targets[int(rng.integers(len(targets)))]
            pts, _, _ = deproject_image(depth, seg == pid, k)
            aim = pts[int(rng.integers(len(pts)))]
            frac = rng.uniform(0.35, 0.75)
            size = extent * rng.uniform(0.05, 0.15) * 0.7 ** attempt
            size = min(size, 0.4 * frac * float(np.linalg.norm(aim)))
            center = cam_to_world.apply(frac * aim)
            d = _distractor(next_id, rng, center, size)
            d2, s2 = raycast(posed_faces([d], {}, cam.world_to_camera), k, depth.copy(), seg.copy())
            counts = dict(zip(*np.unique(s2[np.isfinite(d2) & (s2 > 0)], return_counts=True)))
            if counts.get(next_id, 0) == 0:
                continue
            if all(counts.get(p, 0) >= (1 - MAX_OCCLUSION) * n for p, n in base.items()):
                placed.append(d)
                depth, seg = d2, s2
                next_id += 1
                break
    return placed, depth, seg


def _observable(scene: RenderedScene, obj: ArticulatedObject, cfg: SceneConfig) -> bool:
    from ..flow import residual_displacement

    counts = scene.pixel_counts()
    by_child = {j.child: j for j in scene.joints}
    for _, child, _ in obj.movable():
        if counts.get(child, 0) < cfg.min_moving_pixels:
            return False
        pts, _, _ = deproject_image(scene.depth, scene.seg == child, scene.intrinsics)
        centred = pts - pts.mean(axis=0)
        if np.sqrt(np.linalg.eigvalsh(centred.T @ centred / len(pts))[1]) < cfg.min_moving_width:
            return False  # a sliver: no plane is determined
        disp = residual_displacement(pts, by_child[child])
        if np.linalg.norm(disp, axis=1).mean() < cfg.min_moving_flow:
            return False
    return True


def generate_scene(config: SceneConfig, index: int = 0) -> GeneratedScene:
    """Scene ``index`` of the stream defined by ``config.seed``."""
    seed = scene_seed(config.seed, index)
    k = config.intrinsics
    if config.category == "mixed":
        cats = list(Category)
        cat = cats[int(np.random.default_rng(derive_seed(seed, _STREAM_CATEGORY)).integers(len(cats)))]
    else:
        cat = Category(config.category)
    attempt = 0
    for attempt in range(config.max_attempts):
        obj = build_object(cat, derive_seed(seed, _STREAM_OBJECT, attempt // 6))
        values = obj.sample_joint_values(np.random.default_rng(derive_seed(seed, _STREAM_JOINTS, attempt)))
        cam = sample_camera(obj, config, derive_seed(seed, _STREAM_CAMERA, attempt), values)
        motions = obj.part_motions(values)
        depth, seg = raycast(posed_faces(obj.parts, motions, cam.world_to_camera), k)
        drng = np.random.default_rng(derive_seed(seed, _STREAM_DISTRACTOR, attempt))
        distractors, depth, seg = _place_distractors(obj, cam, config, depth, seg, drng)
        depth, seg = finalize(depth, seg)
        parts = {p.id: PartInfo(p.id, p.name, "object") for p in obj.parts}
        parts.update({p.id: PartInfo(p.id, p.name, "distractor") for p in distractors})
        scene = RenderedScene(depth, seg, k, cam, cat, parts,
                              camera_joints(obj, values, cam.world_to_camera), values)
        if _observable(scene, obj, config):
            return GeneratedScene(scene, obj, distractors, seed)
    raise RuntimeError(f"scene {index}: no observable configuration after {attempt + 1} attempts")


@dataclass(frozen=True, eq=False)
class ScenePair:
    a: int
    b: int
    connected: bool
    joint: SceneJoint | None

    @property
    def kind(self) -> str:
        return self.joint.kind.value if self.connected else "unconnected"


def pairs(scene: RenderedScene) -> list[ScenePair]:
    """Every unordered pair of visible parts.

    Connected pairs are ordered (parent, child) so that the second part is the
    one that moves; other pairs are ordered by id.
    """
    vis = scene.visible_parts()
    out = []
    for i, a in enumerate(vis):
        for b in vis[i + 1:]:
            j = scene.joint_between(a, b)
            if j is None:
                out.append(ScenePair(a, b, False, None))
            else:
                out.append(ScenePair(j.parent, j.child, True, j))
    return out
