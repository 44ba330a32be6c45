import numpy as np
import numpy.testing as npt
import pytest

from graspscape.geometry import (Pose, Sphere, quat_from_axis_angle,
                                 signed_distance)
from graspscape.gripper import (ObjectDistanceField, all_link_poses,
                                capsule_distance, default_gripper,
                                distance_jacobian, joint_positions_axes,
                                link_distances, offset_distances, open_state)


def test_default_gripper_layout(gripper):
    assert gripper.n_joints == 6
    assert gripper.n_links == 7
    # Two digits mount on the +x side, one opposes on the -x side.
    xs = [d.mount.position[0] for d in gripper.digits]
    assert xs[0] > 0 and xs[1] > 0 and xs[2] < 0
    assert gripper.digits[0].mount.position[1] == -gripper.digits[1].mount.position[1]


def test_open_state_digits_point_forward(gripper):
    gs = open_state(gripper)
    poses = all_link_poses(gripper, gs)
    assert len(poses) == 7
    # Open digits extend along base +z; all distal tips reach the same height.
    tips = [poses[2 * d + 2].transform([0, 0, gripper.digits[d].distal.length])
            for d in range(3)]
    for tip in tips:
        assert tip[2] == pytest.approx(tips[0][2])
        assert tip[2] > 0.1  # well past the palm face


def test_positive_joint_angles_curl_inward(gripper):
    gs = open_state(gripper)
    gs.joints = gripper.clamp_joints(np.full(6, 0.8))
    poses = all_link_poses(gripper, gs)
    tips = [poses[2 * d + 2].transform([0, 0, gripper.digits[d].distal.length])
            for d in range(3)]
    # Curling pulls each tip toward the palm center line and lowers it.
    open_tips = [all_link_poses(gripper, open_state(gripper))[2 * d + 2]
                 .transform([0, 0, gripper.digits[d].distal.length])
                 for d in range(3)]
    assert tips[0][0] < open_tips[0][0]
    assert tips[2][0] > open_tips[2][0]
    for t, o in zip(tips, open_tips):
        assert t[2] < o[2]


def test_clamp_joints_limits(gripper):
    clamped = gripper.clamp_joints(np.array([-1.0, 2.0, 0.5, 1.7, -0.1, 0.0]))
    lo, hi = gripper.digits[0].limits
    assert clamped.min() >= lo and clamped.max() <= hi
    npt.assert_allclose(clamped[2], 0.5)


def test_link_poses_follow_base(gripper):
    base = Pose(np.array([0.3, -0.1, 0.2]),
                quat_from_axis_angle(np.array([0, 0, 1.0]), 1.1))
    gs_o = open_state(gripper)
    gs_b = open_state(gripper, base)
    for po, pb in zip(all_link_poses(gripper, gs_o),
                      all_link_poses(gripper, gs_b)):
        npt.assert_allclose(base.compose(po).position, pb.position,
                            atol=1e-12)


def test_joint_positions_axes_shapes(gripper):
    gs = open_state(gripper)
    pos, axes = joint_positions_axes(gripper, gs)
    assert pos.shape == (6, 3)
    assert axes.shape == (6, 3)
    npt.assert_allclose(np.linalg.norm(axes, axis=1), 1.0)
    # Proximal joints anchor on the palm face plane.
    palm_z = gripper.base_shape.half_extents[2] \
        if hasattr(gripper.base_shape, "half_extents") else 0.02
    for d in range(3):
        assert pos[2 * d][2] == pytest.approx(palm_z)


def test_capsule_distance_matches_dense_scan():
    field = ObjectDistanceField(Sphere(0.05),
                                Pose.from_translation([0.1, 0.02, 0.0]))
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = rng.normal(scale=0.1, size=3)
        b = a + rng.normal(scale=0.15, size=3)
        d, t = capsule_distance(field, a, b, 0.01)
        ts = np.linspace(0, 1, 20001)
        dense = field.sdf(a[None] + ts[:, None] * (b - a)[None]).min() - 0.01
        assert d == pytest.approx(dense, abs=1e-6)
        assert 0.0 <= t <= 1.0


def test_link_distances_open_gripper_vs_sphere(gripper):
    # Sphere ahead of the palm, outside digit reach: every distance positive
    # and the distal links are closer than their proximal parents.
    field = ObjectDistanceField(Sphere(0.035),
                                Pose.from_translation([0.0, 0.0, 0.2]))
    gs = open_state(gripper)
    d = link_distances(gripper, gs, field, include_base=True)
    assert d.shape == (7,)
    assert np.all(d > 0)
    for digit in range(3):
        assert d[2 + 2 * digit] < d[1 + 2 * digit]
    off = offset_distances(gripper, gs, field)
    npt.assert_allclose(off, d[1:] - d[0], atol=1e-12)


def _smooth_random_state(gripper, field, rng):
    """Random configuration with every link clear of the object surface.

    Keeping a margin avoids contact-kink points where the distance field
    restricted to a link is not differentiable.
    """
    while True:
        offset = rng.normal(size=3)
        offset = 0.16 * offset / np.linalg.norm(offset)
        base = Pose(offset, quat_from_axis_angle(rng.normal(size=3),
                                                 rng.uniform(0, np.pi)))
        gs = open_state(gripper, base)
        gs.joints = gripper.clamp_joints(rng.uniform(0.1, 0.9, size=6))
        d = link_distances(gripper, gs, field, include_base=True)
        if np.all(np.abs(d) > 5e-3):
            return gs


def test_distance_jacobian_second_order_convergence(gripper):
    """Central differences shrink with observed order about 2 (>= 1.9).

    The reference is the Richardson extrapolation of the two finest grids;
    the observed order compares the h and h/2 errors against it.
    """
    field = ObjectDistanceField(Sphere(0.07), Pose.identity())
    rng = np.random.default_rng(11)
    h = 2e-3
    for _ in range(20):
        gs = _smooth_random_state(gripper, field, rng)
        j1 = distance_jacobian(gripper, gs, field, wrt="joints", h=h)
        j2 = distance_jacobian(gripper, gs, field, wrt="joints", h=h / 2)
        ref = (4.0 * j2 - j1) / 3.0
        e1 = np.linalg.norm(j1 - ref)
        e2 = np.linalg.norm(j2 - ref)
        assert e2 > 0
        order = np.log2(e1 / e2)
        assert order >= 1.9, f"observed order {order:.3f}"


def test_distance_jacobian_base_translation_block(gripper):
    # Moving the whole gripper toward a distant sphere changes every distance
    # at rate close to -1 (unit SDF gradient, links slightly off axis).
    field = ObjectDistanceField(Sphere(0.05),
                                Pose.from_translation([0.4, 0.0, 0.0]))
    gs = open_state(gripper)
    J = distance_jacobian(gripper, gs, field, wrt="base-and-joints")
    assert J.shape == (7, 12)
    npt.assert_allclose(J[:, 0], -1.0, atol=0.04)
    npt.assert_allclose(J[:, 1], 0.0, atol=0.2)


def test_distance_jacobian_unknown_variant(gripper):
    field = ObjectDistanceField(Sphere(0.05), Pose.identity())
    with pytest.raises(ValueError):
        distance_jacobian(gripper, open_state(gripper), field, wrt="digits")
