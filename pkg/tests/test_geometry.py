import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graspscape.geometry import (Box, Capsule, Composite, Cylinder,
                                 GeometryError, Pose, Sphere, Torus,
                                 load_mesh, project_to_surface,
                                 quat_conj, quat_from_axis_angle,
                                 quat_from_mat, quat_from_rotvec,
                                 quat_integrate, quat_mul, quat_to_mat,
                                 sdf_gradient, shape_distance,
                                 signed_distance, surface_query)

unit_vectors = st.builds(
    lambda v: v / np.linalg.norm(v),
    st.tuples(*[st.floats(-1, 1) for _ in range(3)])
    .filter(lambda t: np.linalg.norm(t) > 0.1)
    .map(np.array))

angles = st.floats(-np.pi, np.pi)


# ---------------------------------------------------------------------------
# Quaternions
# ---------------------------------------------------------------------------

@given(unit_vectors, angles)
def test_quat_mat_round_trip(axis, angle):
    q = quat_from_axis_angle(axis, angle)
    q2 = quat_from_mat(quat_to_mat(q))
    # q and -q encode the same rotation.
    npt.assert_allclose(np.minimum(np.abs(q2 - q), np.abs(q2 + q)), 0,
                        atol=1e-9)


@given(unit_vectors, angles, unit_vectors, angles)
def test_quat_mul_matches_matrix_product(ax1, a1, ax2, a2):
    qa = quat_from_axis_angle(ax1, a1)
    qb = quat_from_axis_angle(ax2, a2)
    npt.assert_allclose(quat_to_mat(quat_mul(qa, qb)),
                        quat_to_mat(qa) @ quat_to_mat(qb), atol=1e-12)


@given(unit_vectors, angles)
def test_quat_conj_inverts(axis, angle):
    q = quat_from_axis_angle(axis, angle)
    npt.assert_allclose(quat_mul(q, quat_conj(q)), [1, 0, 0, 0], atol=1e-12)


def test_quat_from_rotvec_small_angle_is_smooth():
    tiny = quat_from_rotvec(np.array([1e-16, 0.0, 0.0]))
    npt.assert_allclose(tiny, [1, 0, 0, 0], atol=1e-15)
    rv = np.array([0.3, -0.2, 0.1])
    npt.assert_allclose(quat_from_rotvec(rv),
                        quat_from_axis_angle(rv, np.linalg.norm(rv)))


def test_quat_integrate_constant_rate():
    # Integrating omega = pi/2 about z for 1 s in many steps gives a
    # quarter turn.
    q = np.array([1.0, 0.0, 0.0, 0.0])
    omega = np.array([0.0, 0.0, np.pi / 2])
    for _ in range(1000):
        q = quat_integrate(q, omega, 1e-3)
    npt.assert_allclose(quat_to_mat(q) @ [1, 0, 0], [0, 1, 0], atol=1e-9)


# ---------------------------------------------------------------------------
# Pose algebra
# ---------------------------------------------------------------------------

@given(unit_vectors, angles, st.tuples(*[st.floats(-2, 2)] * 3))
@settings(max_examples=50)
def test_pose_inverse_composes_to_identity(axis, angle, p):
    pose = Pose(np.array(p), quat_from_axis_angle(axis, angle))
    ident = pose.compose(pose.inverse())
    npt.assert_allclose(ident.position, 0, atol=1e-9)
    npt.assert_allclose(np.abs(ident.quaternion[0]), 1, atol=1e-9)


def test_pose_compose_order():
    # compose applies the right-hand transform first.
    rot = Pose(np.zeros(3), quat_from_axis_angle(np.array([0, 0, 1.0]),
                                                 np.pi / 2))
    shift = Pose.from_translation([1.0, 0.0, 0.0])
    p = rot.compose(shift).transform(np.zeros(3))
    npt.assert_allclose(p, [0, 1, 0], atol=1e-12)
    p = shift.compose(rot).transform(np.zeros(3))
    npt.assert_allclose(p, [1, 0, 0], atol=1e-12)


def test_pose_transform_batch_matches_single():
    pose = Pose(np.array([0.1, -0.2, 0.3]),
                quat_from_axis_angle(np.array([1.0, 2.0, -1.0]), 0.7))
    pts = np.random.default_rng(0).normal(size=(5, 3))
    batch = pose.transform(pts)
    for i in range(5):
        npt.assert_allclose(batch[i], pose.transform(pts[i]))


def test_pose_rejects_zero_quaternion():
    with pytest.raises(GeometryError):
        Pose(np.zeros(3), np.zeros(4))


# ---------------------------------------------------------------------------
# Primitive SDFs against hand-computed distances
# ---------------------------------------------------------------------------

def test_sphere_sdf():
    s = Sphere(0.5)
    assert signed_distance(s, [2.0, 0.0, 0.0]) == pytest.approx(1.5)
    assert signed_distance(s, [0.0, 0.0, 0.0]) == pytest.approx(-0.5)
    assert signed_distance(s, [0.3, 0.4, 0.0]) == pytest.approx(0.0, abs=1e-12)


def test_box_sdf():
    b = Box((1.0, 2.0, 3.0))  # half extents
    assert signed_distance(b, [0.0, 0.0, 0.0]) == pytest.approx(-1.0)
    assert signed_distance(b, [2.0, 0.0, 0.0]) == pytest.approx(1.0)
    # Outside along two axes: Euclidean corner distance.
    assert signed_distance(b, [2.0, 3.0, 0.0]) == pytest.approx(np.sqrt(2.0))


def test_cylinder_sdf():
    c = Cylinder(0.5, 2.0)  # radius, full height
    assert signed_distance(c, [1.5, 0.0, 0.0]) == pytest.approx(1.0)
    assert signed_distance(c, [0.0, 0.0, 2.0]) == pytest.approx(1.0)
    assert signed_distance(c, [1.5, 0.0, 2.0]) == pytest.approx(np.sqrt(2.0))
    assert signed_distance(c, [0.0, 0.0, 0.0]) == pytest.approx(-0.5)


def test_capsule_sdf():
    # Segment from the origin to (0, 0, length), swept by the radius.
    c = Capsule(0.2, 1.0)
    assert signed_distance(c, [0.0, 0.0, 0.5]) == pytest.approx(-0.2)
    assert signed_distance(c, [0.0, 0.0, 1.5]) == pytest.approx(0.3)
    assert signed_distance(c, [1.2, 0.0, 0.25]) == pytest.approx(1.0)


def test_torus_sdf():
    t = Torus(1.0, 0.25)  # ring radius, tube radius; ring in the x-z plane
    assert signed_distance(t, [1.0, 0.0, 0.0]) == pytest.approx(-0.25)
    assert signed_distance(t, [2.0, 0.0, 0.0]) == pytest.approx(0.75)
    assert signed_distance(t, [0.0, 0.0, 0.0]) == pytest.approx(0.75)


def test_composite_sdf_is_union():
    shape = Composite([(Sphere(0.5), Pose.from_translation([-1.0, 0, 0])),
                       (Sphere(0.5), Pose.from_translation([1.0, 0, 0]))])
    assert signed_distance(shape, [0.0, 0.0, 0.0]) == pytest.approx(0.5)
    assert signed_distance(shape, [1.0, 0.0, 0.0]) == pytest.approx(-0.5)


def test_shapes_reject_non_positive_dimensions():
    for bad in (lambda: Sphere(0.0), lambda: Cylinder(-1.0, 1.0),
                lambda: Torus(1.0, 0.0), lambda: Capsule(0.1, -2.0)):
        with pytest.raises(GeometryError):
            bad()


@pytest.mark.parametrize("shape", [
    Sphere(0.4), Box((0.3, 0.2, 0.5)), Cylinder(0.3, 0.8),
    Capsule(0.15, 0.6), Torus(0.5, 0.1),
])
def test_sdf_gradient_is_unit_near_surface(shape, rng):
    # Away from medial-axis points the SDF gradient has unit norm.
    pts = rng.normal(size=(50, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= shape.bounding_radius * 1.5
    g = sdf_gradient(shape, pts)
    npt.assert_allclose(np.linalg.norm(g, axis=1), 1.0, atol=1e-4)


def test_project_to_surface_lands_on_zero_set(rng):
    shape = Cylinder(0.3, 0.8)
    pts = rng.normal(size=(30, 3)) * 0.6
    proj = project_to_surface(shape, pts)
    npt.assert_allclose(shape.sdf(proj), 0.0, atol=1e-6)


# ---------------------------------------------------------------------------
# World-frame queries
# ---------------------------------------------------------------------------

def test_surface_query_posed_sphere():
    pose = Pose(np.array([1.0, 2.0, 3.0]),
                quat_from_axis_angle(np.array([0, 0, 1.0]), 0.7))
    q = surface_query(Sphere(0.5), pose, np.array([1.0, 2.0, 5.0]))
    assert q.distance == pytest.approx(1.5)
    npt.assert_allclose(q.closest_point, [1.0, 2.0, 3.5], atol=1e-9)
    npt.assert_allclose(q.normal, [0.0, 0.0, 1.0], atol=1e-6)


def test_surface_query_inside_points_outward():
    q = surface_query(Sphere(0.5), Pose.identity(),
                      np.array([0.2, 0.0, 0.0]))
    assert q.distance == pytest.approx(-0.3)
    npt.assert_allclose(q.normal, [1.0, 0.0, 0.0], atol=1e-6)
    npt.assert_allclose(q.closest_point, [0.5, 0.0, 0.0], atol=1e-9)


def test_shape_distance_between_spheres():
    d, pa, pb = shape_distance(Sphere(0.5), Pose.identity(),
                               Sphere(0.3), Pose.from_translation([2.0, 0, 0]))
    assert d == pytest.approx(1.2, abs=1e-4)
    npt.assert_allclose(pa, [0.5, 0, 0], atol=1e-3)
    npt.assert_allclose(pb, [1.7, 0, 0], atol=1e-3)


def test_shape_distance_penetrating_is_negative():
    d, _, _ = shape_distance(Sphere(0.5), Pose.identity(),
                             Sphere(0.5), Pose.from_translation([0.6, 0, 0]))
    assert d < 0.0
    assert d == pytest.approx(-0.4, abs=0.02)


# ---------------------------------------------------------------------------
# Mesh loading
# ---------------------------------------------------------------------------

OBJ_CUBE = """\
v -1 -1 -1
v 1 -1 -1
v 1 1 -1
v -1 1 -1
v -1 -1 1
v 1 -1 1
v 1 1 1
v -1 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


def test_load_obj_cube_sdf(tmp_path):
    path = tmp_path / "cube.obj"
    path.write_text(OBJ_CUBE)
    mesh = load_mesh(str(path), scale=0.5)
    # Now a cube with half extent 0.5.
    assert signed_distance(mesh, [0.0, 0.0, 0.0]) == pytest.approx(-0.5,
                                                                   abs=1e-6)
    assert signed_distance(mesh, [1.0, 0.0, 0.0]) == pytest.approx(0.5,
                                                                   abs=1e-6)
    assert signed_distance(mesh, [1.0, 1.0, 0.0]) == pytest.approx(
        np.sqrt(0.5), abs=1e-6)


def test_load_mesh_rejects_open_surface(tmp_path):
    path = tmp_path / "open.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    with pytest.raises(GeometryError):
        load_mesh(str(path))


def test_load_mesh_unknown_extension(tmp_path):
    path = tmp_path / "cube.ply"
    path.write_text("")
    with pytest.raises(GeometryError):
        load_mesh(str(path))
