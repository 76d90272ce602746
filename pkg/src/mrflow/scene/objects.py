"""Procedural articulated objects and their joint kinematics.

Object frame: +X right, +Y out of the articulated face (the object's front),
+Z up, floor at z = 0. Every joint axis is expressed in the object frame at
the rest configuration (all joint values zero); a joint axis's direction is
oriented so that positive joint values rotate the child by the right-hand
rule about it.

Revolute leaves (doors, lids, faucet levers) are modeled as zero-thickness
sheets whose plane contains the hinge axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import InvalidInputError, JointLimitError, MissingPartError
from ..geometry import Line3, RigidTransform, normalize
from .primitives import box, box_between, cylinder, sheet


class Category(str, Enum):
    DOOR = "door"
    WINDOW = "window"
    FAUCET = "faucet"
    DISHWASHER = "dishwasher"
    FRIDGE = "fridge"
    CABINET = "cabinet"


# column order and labels of the accuracy table
TABLE_LABELS = {
    Category.DOOR: "Door",
    Category.WINDOW: "Window",
    Category.FAUCET: "Faucet",
    Category.DISHWASHER: "Dishw.",
    Category.FRIDGE: "Fridge",
    Category.CABINET: "Cab.",
}


class JointKind(str, Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"
    FIXED = "fixed"


@dataclass(frozen=True, eq=False)
class Joint:
    kind: JointKind
    axis: Line3 | None = None
    direction: np.ndarray | None = None
    limits: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        lo, hi = self.limits
        if lo > hi:
            raise InvalidInputError("joint limits must satisfy lo <= hi")
        if self.kind is JointKind.REVOLUTE and self.axis is None:
            raise InvalidInputError("revolute joint needs an axis")
        if self.kind is JointKind.PRISMATIC:
            if self.direction is None or not hi - lo > 0:
                raise InvalidInputError("prismatic joint needs a direction and positive travel")
        if self.kind is JointKind.FIXED and (self.axis is not None or self.direction is not None):
            raise InvalidInputError("fixed joints carry no parameters")

    @property
    def max_travel(self) -> float | None:
        if self.kind is JointKind.PRISMATIC:
            return self.limits[1] - self.limits[0]
        return None

    def motion(self, q: float) -> RigidTransform:
        if self.kind is JointKind.REVOLUTE:
            return RigidTransform.about_line(self.axis, q)
        if self.kind is JointKind.PRISMATIC:
            return RigidTransform.translation(q * self.direction)
        return RigidTransform.identity()

    def check(self, q: float):
        lo, hi = self.limits
        if not lo - 1e-12 <= q <= hi + 1e-12:
            raise JointLimitError(f"joint value {q} outside limits [{lo}, {hi}]")


@dataclass(eq=False)
class Part:
    id: int
    name: str
    faces: tuple
    frame: RigidTransform = field(default_factory=RigidTransform.identity)

    @classmethod
    def from_object_faces(cls, pid: int, name: str, faces, origin) -> "Part":
        """Build a part from faces given in object coordinates, frame at ``origin``."""
        frame = RigidTransform.translation(origin)
        inv = frame.inverse()
        return cls(pid, name, tuple(f.transformed(inv) for f in faces), frame)

    def sample_surface(self, spacing: float = 0.002):
        """Grid samples on every face (part frame) and the owning-face index of each."""
        pts, tags = [], []
        for i, f in enumerate(self.faces):
            s = f.sample(spacing)
            pts.append(s)
            tags.append(np.full(len(s), i))
        return np.concatenate(pts), np.concatenate(tags)

    def hull(self) -> np.ndarray:
        return np.concatenate([f.hull() for f in self.faces])

    def posed_faces(self, T: RigidTransform) -> list:
        full = T @ self.frame
        return [f.transformed(full) for f in self.faces]


@dataclass(eq=False)
class ArticulatedObject:
    parts: list[Part]
    joints: list[tuple[int, int, Joint]]
    category: Category
    scale: float = 1.0

    def __post_init__(self):
        ids = [p.id for p in self.parts]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("duplicate part ids")
        children = [c for _, c, _ in self.joints]
        if len(set(children)) != len(children):
            raise InvalidInputError("a part is the child of more than one joint")
        known = set(ids)
        if any(p not in known or c not in known for p, c, _ in self.joints):
            raise InvalidInputError("joint references unknown part")
        roots = known - set(children)
        if len(roots) != 1:
            raise InvalidInputError("joints must form a single tree")
        # every part must reach the root without revisiting
        parent = {c: p for p, c, _ in self.joints}
        for pid in ids:
            seen, cur = set(), pid
            while cur in parent:
                if cur in seen:
                    raise InvalidInputError("kinematic cycle")
                seen.add(cur)
                cur = parent[cur]
        if not 0.5 <= self.scale <= 2.0:
            raise InvalidInputError("scale must lie in [0.5, 2.0]")

    def part(self, pid: int) -> Part:
        for p in self.parts:
            if p.id == pid:
                return p
        raise MissingPartError(f"no part {pid}")

    @property
    def root(self) -> int:
        children = {c for _, c, _ in self.joints}
        return next(p.id for p in self.parts if p.id not in children)

    def parent_joint(self, pid: int):
        for p, c, j in self.joints:
            if c == pid:
                return p, j
        return None

    def movable(self) -> list[tuple[int, int, Joint]]:
        return [(p, c, j) for p, c, j in self.joints if j.kind is not JointKind.FIXED]

    def sample_joint_values(self, rng: np.random.Generator) -> dict[int, float]:
        return {c: float(rng.uniform(*j.limits)) for _, c, j in self.movable()}

    def part_motions(self, values: dict[int, float] | None = None) -> dict[int, RigidTransform]:
        """Rest-to-current object-frame motion of every part."""
        values = values or {}
        for _, c, j in self.movable():
            j.check(values.get(c, 0.0))
        out = {self.root: RigidTransform.identity()}
        pending = list(self.joints)
        while pending:
            rest = []
            for p, c, j in pending:
                if p in out:
                    out[c] = out[p] @ j.motion(values.get(c, 0.0))
                else:
                    rest.append((p, c, j))
            pending = rest
        return out

    def bounds(self, values: dict[int, float] | None = None) -> tuple[np.ndarray, np.ndarray]:
        motions = self.part_motions(values)
        pts = np.concatenate([(motions[p.id] @ p.frame).apply(p.hull()) for p in self.parts])
        return pts.min(axis=0), pts.max(axis=0)

    def axis_extent(self, child: int, axis: Line3) -> tuple[float, float]:
        """Range of the child's rest geometry projected on ``axis`` (relative to axis.point)."""
        p = self.part(child)
        s = (p.frame.apply(p.hull()) - axis.point) @ axis.direction
        return float(s.min()), float(s.max())


# ---------------------------------------------------------------------------
# procedural builders


class _Builder:
    def __init__(self, category: Category, scale: float):
        self.category = category
        self.scale = scale
        self.parts: list[Part] = []
        self.joints: list[tuple[int, int, Joint]] = []

    def part(self, name, faces, origin=(0.0, 0.0, 0.0)) -> int:
        pid = len(self.parts) + 1
        self.parts.append(Part.from_object_faces(pid, name, faces, np.asarray(origin, dtype=float)))
        return pid

    def joint(self, parent, child, joint):
        self.joints.append((parent, child, joint))

    def build(self) -> ArticulatedObject:
        return ArticulatedObject(self.parts, self.joints, self.category, self.scale)


def _revolute(point, direction, hi_deg_range, rng) -> Joint:
    hi = math.radians(rng.uniform(*hi_deg_range))
    return Joint(JointKind.REVOLUTE, Line3(np.asarray(point, dtype=float), normalize(direction)), limits=(0.0, hi))


def _prismatic(direction, extent, rng) -> Joint:
    travel = rng.uniform(0.3, 0.6) * extent
    return Joint(JointKind.PRISMATIC, direction=normalize(direction), limits=(0.0, travel))


FIXED = Joint(JointKind.FIXED)


def _vertical_leaf(b: _Builder, name, x0, x1, z0, z1, hinge_left: bool, rng, y=0.0,
                   limits=(90.0, 135.0)) -> tuple[int, Joint]:
    """Door-like sheet in the plane y = ``y``, hinged on a vertical edge."""
    faces = [sheet(((x0 + x1) / 2, y, (z0 + z1) / 2), (1, 0, 0), (0, 0, 1), (x1 - x0) / 2, (z1 - z0) / 2)]
    hx = x0 if hinge_left else x1
    leaf = b.part(name, faces, origin=(hx, y, z0))
    # hinge on the left opens toward +y about +z; on the right about -z
    return leaf, _revolute((hx, y, z0), (0, 0, 1) if hinge_left else (0, 0, -1), limits, rng)


def _bar_handle(b: _Builder, leaf: int, x, z, vertical: bool, y=0.0):
    """Small standoff handle on the front of a leaf, rigidly attached."""
    s = b.scale
    if vertical:
        half = (0.012 * s, 0.015 * s, 0.08 * s)
    else:
        half = (0.08 * s, 0.015 * s, 0.012 * s)
    c = (x, y + 0.02 * s + half[1], z)
    h = b.part(f"{b.parts[leaf - 1].name}_handle", box(c, half), origin=c)
    b.joint(leaf, h, FIXED)
    return h


def _door(rng, s) -> ArticulatedObject:
    b = _Builder(Category.DOOR, s)
    double = rng.random() < 0.4
    W = (rng.uniform(1.3, 1.7) if double else rng.uniform(0.8, 1.0)) * s
    H = rng.uniform(1.9, 2.1) * s
    f = rng.uniform(0.05, 0.1) * s
    d = rng.uniform(0.1, 0.2) * s
    frame = (box_between((-W / 2 - f, -d, 0), (-W / 2, 0, H + f))
             + box_between((W / 2, -d, 0), (W / 2 + f, 0, H + f))
             + box_between((-W / 2, -d, H), (W / 2, 0, H + f)))
    root = b.part("frame", frame, origin=(0, -d / 2, 0))
    if double:
        leaves = [(-W / 2, 0.0, True), (0.0, W / 2, False)]
    else:
        left = rng.random() < 0.5
        leaves = [(-W / 2, W / 2, left)]
    for i, (x0, x1, left) in enumerate(leaves):
        leaf, j = _vertical_leaf(b, f"panel{i}", x0, x1, 0.0, H, left, rng)
        b.joint(root, leaf, j)
        if rng.random() < 0.7:
            free = x1 - 0.08 * s if left else x0 + 0.08 * s
            _bar_handle(b, leaf, free, 0.48 * H, vertical=False)
    return b.build()


def _window(rng, s) -> ArticulatedObject:
    b = _Builder(Category.WINDOW, s)
    W = rng.uniform(0.8, 1.6) * s
    H = rng.uniform(0.8, 1.4) * s
    f = rng.uniform(0.04, 0.08) * s
    d = rng.uniform(0.08, 0.14) * s
    t = 0.03 * s
    ov = 0.02 * s
    frame = (box_between((-W / 2 - f, -d, -f), (-W / 2, 0, H + f))
             + box_between((W / 2, -d, -f), (W / 2 + f, 0, H + f))
             + box_between((-W / 2, -d, H), (W / 2, 0, H + f))
             + box_between((-W / 2, -d, -f), (W / 2, 0, 0)))
    root = b.part("frame", frame, origin=(0, -d / 2, 0))
    front = b.part("sash_front", box_between((-W / 2, -t, 0), (ov, 0, H)), origin=(-W / 4, -t / 2, H / 2))
    b.joint(root, front, _prismatic((1, 0, 0), W / 2, rng))
    back_lo, back_hi = (-ov, -2 * t - 0.004 * s, 0), (W / 2, -t - 0.004 * s, H)
    if rng.random() < 0.6:
        back = b.part("sash_back", box_between(back_lo, back_hi), origin=(W / 4, -1.5 * t, H / 2))
        b.joint(root, back, _prismatic((-1, 0, 0), W / 2, rng))
    else:
        back = b.part("pane", box_between(back_lo, back_hi), origin=(W / 4, -1.5 * t, H / 2))
        b.joint(root, back, FIXED)
    if rng.random() < 0.5:
        c = (-W / 2 + 0.05 * s, 0.015 * s, H / 2)
        h = b.part("sash_front_handle", box(c, (0.01 * s, 0.015 * s, 0.05 * s)), origin=c)
        b.joint(front, h, FIXED)
    return b.build()


def _faucet_lever(b: _Builder, x, z, r0, length, width, rng) -> tuple[int, Joint]:
    """Horizontal paddle pointing backward from a horizontal pivot; lifts upward."""
    faces = [sheet((x, -(r0 + length / 2), z), (1, 0, 0), (0, 1, 0), width / 2, length / 2)]
    lever = b.part(f"lever{len(b.parts)}", faces, origin=(x, 0, z))
    # rotating about -x raises the backward-pointing paddle
    return lever, _revolute((x, 0, z), (-1, 0, 0), (90.0, 180.0), rng)


def _faucet(rng, s) -> ArticulatedObject:
    b = _Builder(Category.FAUCET, s)
    rb = rng.uniform(0.025, 0.04) * s
    hb = rng.uniform(0.15, 0.3) * s
    ls = rng.uniform(0.12, 0.2) * s
    rs = 0.012 * s
    body = (cylinder((0, 0, hb / 2), (0, 0, 1), rb, hb / 2)
            + cylinder((0, 0, 0.005 * s), (0, 0, 1), 1.6 * rb, 0.005 * s)
            + cylinder((0, ls / 2, 0.85 * hb), (0, 1, 0), rs, ls / 2)
            + cylinder((0, ls, 0.85 * hb - 0.02 * s), (0, 0, 1), rs, 0.02 * s))
    r0 = 0.012 * s
    L = rng.uniform(0.1, 0.16) * s
    wp = rng.uniform(0.025, 0.04) * s
    levers = []
    if rng.random() < 0.5:
        levers.append((0.0, hb + 0.015 * s))
        body += cylinder((0, 0, hb + 0.0075 * s), (0, 0, 1), 0.006 * s, 0.0075 * s, caps=False)
    else:
        xo = rb + 0.05 * s
        zh = 0.55 * hb
        for sgn in (-1.0, 1.0):
            levers.append((sgn * xo, zh))
            # stub from the body to the pivot
            body += cylinder((sgn * (rb + xo - wp / 2) / 2, 0, zh), (1, 0, 0), 0.008 * s,
                             (xo - wp / 2 - rb) / 2 + 1e-4, caps=True)
    root = b.part("body", body, origin=(0, 0, 0))
    for x, z in levers:
        lever, j = _faucet_lever(b, x, z, r0, L, wp, rng)
        b.joint(root, lever, j)
    return b.build()


def _open_body(W, D, H, z0=0.0) -> list:
    """Cabinet-like carcass with the front face missing."""
    return box_between((-W / 2, -D, z0), (W / 2, 0, H), open_faces=("+y",))


def _dishwasher(rng, s) -> ArticulatedObject:
    b = _Builder(Category.DISHWASHER, s)
    W = rng.uniform(0.55, 0.65) * s
    D = rng.uniform(0.55, 0.65) * s
    H = rng.uniform(0.8, 0.9) * s
    zb = 0.1 * s
    body = _open_body(W, D, H) + [sheet((0, -0.05 * s, zb / 2), (1, 0, 0), (0, 0, 1), W / 2, zb / 2)]
    root = b.part("body", body, origin=(0, -D / 2, 0))
    faces = [sheet((0, 0, (zb + H) / 2), (1, 0, 0), (0, 0, 1), W / 2, (H - zb) / 2)]
    door = b.part("door", faces, origin=(0, 0, zb))
    # bottom hinge; rotating about -x tips the top of the door toward +y
    b.joint(root, door, _revolute((0, 0, zb), (-1, 0, 0), (90.0, 135.0), rng))
    if rng.random() < 0.7:
        _bar_handle(b, door, 0.0, H - 0.06 * s, vertical=False)
    return b.build()


def _fridge(rng, s) -> ArticulatedObject:
    b = _Builder(Category.FRIDGE, s)
    W = rng.uniform(0.6, 0.9) * s
    D = rng.uniform(0.6, 0.75) * s
    H = rng.uniform(1.6, 1.9) * s
    g = 0.005 * s
    root = b.part("body", _open_body(W, D, H), origin=(0, -D / 2, 0))
    layout = rng.choice(["single", "stacked", "side"])
    left = bool(rng.random() < 0.5)
    if layout == "single":
        leaves = [(-W / 2, W / 2, 0.0, H, left)]
    elif layout == "stacked":
        zs = rng.uniform(0.6, 0.72) * H
        leaves = [(-W / 2, W / 2, 0.0, zs - g, left), (-W / 2, W / 2, zs + g, H, left)]
    else:
        xs = rng.uniform(-0.1, 0.1) * W
        leaves = [(-W / 2, xs - g, 0.0, H, True), (xs + g, W / 2, 0.0, H, False)]
    for i, (x0, x1, z0, z1, hl) in enumerate(leaves):
        leaf, j = _vertical_leaf(b, f"door{i}", x0, x1, z0, z1, hl, rng)
        b.joint(root, leaf, j)
        if rng.random() < 0.8:
            free = x1 - 0.05 * s if hl else x0 + 0.05 * s
            _bar_handle(b, leaf, free, (z0 + z1) / 2, vertical=True)
    return b.build()


def _cabinet(rng, s) -> ArticulatedObject:
    b = _Builder(Category.CABINET, s)
    W = rng.uniform(0.6, 1.2) * s
    D = rng.uniform(0.4, 0.6) * s
    H = rng.uniform(0.7, 1.0) * s
    g = 0.003 * s
    root = b.part("body", _open_body(W, D, H), origin=(0, -D / 2, 0))
    n_drawers = int(rng.integers(1, 3))
    hd = rng.uniform(0.15, 0.22) * s
    depth = 0.85 * D
    top = H
    for i in range(n_drawers):
        z1, z0 = top - g, top - hd + g
        drawer = b.part(f"drawer{i}", box_between((-W / 2 + g, -depth, z0), (W / 2 - g, 0, z1)),
                        origin=(0, -depth / 2, (z0 + z1) / 2))
        b.joint(root, drawer, _prismatic((0, 1, 0), depth, rng))
        if rng.random() < 0.7:
            c = (0.0, 0.015 * s, (z0 + z1) / 2)
            h = b.part(f"drawer{i}_handle", box(c, (0.06 * s, 0.015 * s, 0.01 * s)), origin=c)
            b.joint(drawer, h, FIXED)
        top -= hd
    z_hi = top - g
    if W > 0.8 * s and rng.random() < 0.5:
        leaves = [(-W / 2, -g, True), (g, W / 2, False)]
    else:
        leaves = [(-W / 2, W / 2, bool(rng.random() < 0.5))]
    for i, (x0, x1, hl) in enumerate(leaves):
        leaf, j = _vertical_leaf(b, f"door{i}", x0, x1, 0.0, z_hi, hl, rng)
        b.joint(root, leaf, j)
        if rng.random() < 0.6:
            free = x1 - 0.04 * s if hl else x0 + 0.04 * s
            _bar_handle(b, leaf, free, 0.75 * z_hi, vertical=True)
    return b.build()


_BUILDERS = {
    Category.DOOR: _door,
    Category.WINDOW: _window,
    Category.FAUCET: _faucet,
    Category.DISHWASHER: _dishwasher,
    Category.FRIDGE: _fridge,
    Category.CABINET: _cabinet,
}


def build_object(category, seed: int) -> ArticulatedObject:
    """Deterministic procedural object of ``category``, scaled by U(0.5, 2.0)."""
    category = Category(category)
    rng = np.random.default_rng(seed)
    s = float(rng.uniform(0.5, 2.0))
    return _BUILDERS[category](rng, s)
