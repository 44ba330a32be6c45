import numpy as np
import pytest

from graspscape.catalog import parse_scene
from graspscape.geometry import Pose
from graspscape.gripper import default_gripper


@pytest.fixture(scope="session")
def gripper():
    return default_gripper()


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def sphere_scene():
    """Small sphere scene used by the simulation-heavy tests."""
    return parse_scene({
        "object": {"catalog": "sphere"},
        "metric": {"samples": 2},
        "trajectory": {"lift_height_cm": 10, "lift_time": 0.4,
                       "yaw_time": 0.4, "roll_time": 0.3},
    })


@pytest.fixture(scope="session")
def sphere_grasp(sphere_scene):
    """A settled shape-policy grasp on the sphere, shared where possible.

    Tests that mutate the returned state must copy it first.
    """
    from graspscape.mapping import tangent_aligned_attitude
    from graspscape.synthesis import synthesize

    scene = sphere_scene
    position = np.array([0.16, 0.0, 0.0])
    quat = tangent_aligned_attitude(scene.obj.shape, scene.object_pose,
                                    position)
    out = synthesize(Pose(position, quat), scene, scene.synthesis)
    assert out.viable, out.diagnostics
    return out
