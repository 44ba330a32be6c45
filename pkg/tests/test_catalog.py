import json

import numpy as np
import numpy.testing as npt
import pytest

from graspscape.catalog import (CATALOG_NAMES, SceneError,
                                build_catalog_object, emit_scene,
                                make_object_model, parse_scene,
                                uniform_inertia)
from graspscape.geometry import Box, Sphere


def test_catalog_names_cover_the_fixtures():
    for name in ("sphere", "cup", "drill-proxy", "plate", "can",
                 "hammer-proxy", "spiked-ball"):
        assert name in CATALOG_NAMES


def test_unknown_catalog_object():
    with pytest.raises(SceneError):
        build_catalog_object("banana")


def test_catalog_overrides():
    cat = build_catalog_object("sphere", {"mass_g": 500, "friction": 0.3})
    assert cat.mass == pytest.approx(0.5)
    assert cat.friction_override == pytest.approx(0.3)


def test_uniform_inertia_sphere_analytic():
    # Monte Carlo inertia of a solid sphere vs (2/5) m r^2.
    r, m = 0.035, 0.15
    inertia, com = uniform_inertia(Sphere(r), m, samples=200_000, seed=1)
    expected = 0.4 * m * r * r
    npt.assert_allclose(np.diag(inertia), expected, rtol=0.03)
    npt.assert_allclose(com, 0.0, atol=0.02 * r)
    off_diag = inertia - np.diag(np.diag(inertia))
    assert np.abs(off_diag).max() < 0.03 * expected


def test_uniform_inertia_box_analytic():
    hx, hy, hz = 0.05, 0.03, 0.01
    m = 0.3
    inertia, _ = uniform_inertia(Box((hx, hy, hz)), m, samples=200_000,
                                 seed=2)
    expected = m / 3.0 * np.array([hy * hy + hz * hz, hx * hx + hz * hz,
                                   hx * hx + hy * hy])
    npt.assert_allclose(np.diag(inertia), expected, rtol=0.03)


def test_make_object_model_is_deterministic():
    cat = build_catalog_object("cup")
    a = make_object_model(cat, seed=7)
    b = make_object_model(cat, seed=7)
    npt.assert_array_equal(a.inertia, b.inertia)
    npt.assert_array_equal(a.com_offset, b.com_offset)


def test_parse_scene_defaults():
    scene = parse_scene({"object": {"catalog": "sphere"}})
    assert scene.seed == 0
    assert scene.grid.nx == 32
    assert scene.params.dt == pytest.approx(5e-4)
    assert scene.synthesis.policy in ("baseline", "shape")
    assert scene.characteristic_length > 0
    # Lengths in configs are centimeters; stored values are meters.
    assert scene.grid.x_range[1] == pytest.approx(0.18)


def test_parse_scene_cm_conversion_and_pose():
    scene = parse_scene({
        "object": {"catalog": "sphere", "pose_cm": [0, 0, 10]},
        "grid": {"x_range_cm": [-5, 5], "y_range_cm": [-5, 5],
                 "exploration_radius_cm": 12},
    })
    npt.assert_allclose(scene.object_pose.position, [0, 0, 0.1])
    assert scene.grid.x_range == (-0.05, 0.05)
    assert scene.exploration_radius == pytest.approx(0.12)


@pytest.mark.parametrize("doc,fragment", [
    ({}, "object"),
    ({"object": {"catalog": "sphere", "mesh": "x.obj"}}, "exactly one"),
    ({"object": {"catalog": "sphere"}, "grid": {"nx": 1}}, "nx"),
    ({"object": {"catalog": "sphere"}, "sim": {"dt": -1}}, "dt"),
    ({"object": {"catalog": "sphere"}, "seed": -3}, "seed"),
    ({"object": {"catalog": "sphere"}, "typo": 1}, "typo"),
    ({"object": {"catalog": "sphere"},
      "synthesis": {"policy": "greedy"}}, "policy"),
    ({"object": {"catalog": "sphere"},
      "grid": {"attitude": "roll"}}, "attitude"),
])
def test_parse_scene_rejects_bad_documents(doc, fragment):
    with pytest.raises(SceneError, match=fragment):
        parse_scene(doc)


def test_parse_scene_rejects_unstable_sim():
    with pytest.raises((SceneError, ValueError), match="unstable"):
        parse_scene({"object": {"catalog": "sphere", "mass_g": 1},
                     "sim": {"dt": 0.01}})


def test_parse_scene_accepts_file(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps({"object": {"catalog": "cube"}, "seed": 9}))
    scene = parse_scene(str(path))
    assert scene.seed == 9
    assert scene.catalog_object.name == "cube"


def test_object_stiffness_override_reaches_sim_params():
    scene = parse_scene({"object": {"catalog": "foam-ball"}})
    assert scene.params.contact_stiffness == pytest.approx(2e3)


def test_trajectory_for_starts_at_pose():
    scene = parse_scene({"object": {"catalog": "sphere"},
                         "trajectory": {"lift_height_cm": 12}})
    from graspscape.geometry import Pose
    start = Pose.from_translation([0.2, 0.0, 0.0])
    traj = scene.trajectory_for(start)
    npt.assert_allclose(traj.pose_at(0.0).position, start.position)
    assert traj.pose_at(traj.duration).position[2] == pytest.approx(0.12)


def test_emit_scene_round_trip():
    doc = {"object": {"catalog": "plate"}, "seed": 3}
    text = emit_scene(doc)
    assert json.loads(text) == doc
