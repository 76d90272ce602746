import math

import numpy as np
import pytest

from oracles import kinematic_flow
from mrflow.errors import MissingPartError, ShapeError
from mrflow.flow import (
    FlowImage,
    batch_loss,
    flow_loss,
    gt_flow,
    residual_displacement,
    rotation_sign,
)
from mrflow.geometry import CameraIntrinsics, Line3, RigidTransform, deproject_image, point_to_line_distance
from mrflow.scene import Category, JointKind, PartInfo, RenderedScene, SceneJoint, pairs
from mrflow.scene.camera import CameraPose


def plate_scene(joint):
    k = CameraIntrinsics.default()
    depth = np.zeros(k.shape)
    seg = np.zeros(k.shape, np.int32)
    depth[100:200, 100:300] = 1.0
    seg[100:200, 100:200] = 1
    seg[100:200, 200:300] = 2
    cam = CameraPose(RigidTransform.identity(), np.zeros(3), np.array([0, 0, 1.0]), 0.0, 0.0, 1.0)
    parts = {1: PartInfo(1, "base", "object"), 2: PartInfo(2, "leaf", "object"), 3: PartInfo(3, "box", "distractor")}
    return RenderedScene(depth, seg, k, cam, Category.CABINET, parts, [joint] if joint else [], {})


def test_prismatic_example():
    j = SceneJoint(1, 2, JointKind.PRISMATIC, (0.0, 0.5), 0.1, direction=np.array([1.0, 0, 0]))
    flow, label = gt_flow(plate_scene(j), 1, 2)
    assert label.connected and label.kind is JointKind.PRISMATIC and label.max_travel == 0.5
    np.testing.assert_allclose(flow.data[flow.support], np.tile([0.15, 0, 0], (100 * 100, 1)), atol=1e-15)
    assert not flow.data[~flow.support].any()


def test_revolute_example():
    axis = Line3(np.zeros(3), np.array([0.0, 0, 1]))
    j = SceneJoint(1, 2, JointKind.REVOLUTE, (0.0, math.pi), 0.0, axis=axis, span=1.0)
    d = residual_displacement(np.array([[1.0, 0, 0.7]]), j)[0]
    assert d[0] == pytest.approx(math.cos(math.radians(30)) - 1, abs=1e-15)
    assert d[1] == pytest.approx(0.5, abs=1e-15)
    assert round(d[0], 4) == -0.1340 and d[2] == 0


def test_fixed_and_unconnected_are_zero():
    flow, label = gt_flow(plate_scene(SceneJoint(1, 2, JointKind.FIXED, (0.0, 0.0))), 1, 2)
    assert label.connected and not flow.data.any() and flow.support.sum() == 100 * 100
    flow, label = gt_flow(plate_scene(None), 1, 2)
    assert not label.connected and label.four_class == "unconnected" and not flow.data.any()


def test_unknown_part():
    with pytest.raises(MissingPartError):
        gt_flow(plate_scene(None), 1, 9)


def test_rotation_sign_examples():
    door = SceneJoint(1, 2, JointKind.REVOLUTE, (0.0, math.radians(90)), 0.0, axis=Line3(np.zeros(3), np.array([0, 0, 1.0])))
    assert rotation_sign(door, 0.0) == 1
    assert rotation_sign(door, math.radians(85)) == -1
    drawer = SceneJoint(1, 2, JointKind.PRISMATIC, (0.0, 0.4), 0.2, direction=np.array([0, 0, 1.0]))
    assert rotation_sign(drawer, 0.2) == 1
    tight = SceneJoint(1, 2, JointKind.REVOLUTE, (0.0, math.radians(40)), 0.0, axis=door.axis)
    assert rotation_sign(tight, math.radians(15)) == 1
    assert rotation_sign(tight, math.radians(25)) == -1


def test_support_and_magnitude_laws(category_scenes):
    for g in category_scenes:
        s = g.scene
        for p in pairs(s):
            flow, label = gt_flow(s, p.a, p.b)
            assert np.array_equal(flow.support, s.seg == p.b)
            assert not flow.data[~flow.support].any()
            f = flow.data[flow.support]
            if label.kind is JointKind.REVOLUTE:
                P, _, _ = deproject_image(s.depth, flow.support, s.intrinsics)
                r0 = point_to_line_distance(P, label.axis)
                r1 = point_to_line_distance(P + f, label.axis)
                assert np.abs(r0 - r1).max() < 1e-9
            elif label.kind is JointKind.PRISMATIC:
                assert np.abs(f - f[0]).max() < 1e-9
                assert np.linalg.norm(f[0]) == pytest.approx(0.3 * label.max_travel, abs=1e-12)


def test_kinematic_oracle_both_orders(category_scenes):
    seen = set()
    for g in category_scenes:
        s = g.scene
        for p in pairs(s):
            if not p.connected:
                continue
            seen.add(p.joint.kind)
            for anchor, cand in ((p.a, p.b), (p.b, p.a)):
                pts, moved, rows, cols, pose = kinematic_flow(g, anchor, cand)
                flow, _ = gt_flow(s, anchor, cand)
                np.testing.assert_allclose(flow.data[rows, cols], moved - pts, atol=1e-9)
    assert seen == set(JointKind)


def test_displaced_points_lie_on_displaced_part(category_scenes):
    for g in category_scenes[::3]:
        for p in pairs(g.scene):
            if not p.connected or p.joint.kind is JointKind.FIXED:
                continue
            pts, moved, _, _, pose = kinematic_flow(g, p.a, p.b)
            faces = g.obj.part(p.b).posed_faces(pose)
            d = np.min([f.distance(moved) for f in faces], axis=0)
            on_surface = np.min([f.distance(pts) for f in g.obj.part(p.b).posed_faces(
                g.scene.camera.world_to_camera @ g.obj.part_motions(g.scene.joint_values)[p.b])], axis=0)
            # same residual as before the move: rigid motion keeps points on the surface
            assert np.abs(d - on_surface).max() < 1e-9


def test_loss_hand_example():
    gt = np.zeros((1, 1, 3))
    gt[0, 0] = (1, 0, 0)
    t = flow_loss(FlowImage.from_array(gt), FlowImage.from_array(np.zeros((1, 1, 3))), True, 0.5)
    assert t.se == 1.0
    assert abs(t.ce - math.log(2)) < 1e-12
    assert abs(t.weighted - (0.6 + 0.4 * math.log(2))) < 1e-12
    assert not t.clamped


def test_loss_gating_and_perfect():
    rng = np.random.default_rng(0)
    gt = FlowImage.from_array(rng.normal(size=(4, 5, 3)))
    pred = FlowImage.from_array(rng.normal(size=(4, 5, 3)))
    t = flow_loss(gt, pred, False, 1e-12)
    assert t.se > 0
    assert abs(t.weighted - 0.4 * t.ce) < 1e-15 and t.weighted < 1e-10
    t = flow_loss(gt, gt, True, 1 - 1e-12)
    assert t.se == 0 and t.weighted < 1e-10


def test_loss_clamp_and_shape():
    z = FlowImage.from_array(np.zeros((2, 2, 3)))
    t = flow_loss(z, z, True, 0.0)
    assert t.clamped and t.ce == pytest.approx(-math.log(1e-12))
    assert math.isfinite(t.weighted)
    with pytest.raises(ShapeError):
        flow_loss(z, FlowImage.from_array(np.zeros((3, 2, 3))), True, 0.5)


def test_loss_nonnegative_and_batch():
    rng = np.random.default_rng(3)
    terms = []
    for _ in range(20):
        gt = FlowImage.from_array(rng.normal(size=(3, 3, 3)))
        pred = FlowImage.from_array(rng.normal(size=(3, 3, 3)))
        t = flow_loss(gt, pred, bool(rng.integers(2)), float(rng.uniform(0, 1)))
        assert t.se >= 0 and t.ce >= 0 and t.weighted >= 0
        terms.append(t)
    assert batch_loss(terms) == pytest.approx(np.mean([t.weighted for t in terms]))
    with pytest.raises(ValueError):
        batch_loss([])
