"""Parametric proxy objects, feature labeling, and scene configuration.

Catalog objects stand in for household test items at realistic desk
dimensions.  Each object is a shape (possibly a labeled composite), a mass,
and optional per-object contact overrides (friction, stiffness).  Scene
configs are JSON; lengths in the schema are centimeters (converted to
meters at ingestion), angles degrees, masses grams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .geometry import (Box, Capsule, Composite, Cylinder, Pose, Shape,
                       Sphere, Torus, load_mesh, quat_from_axis_angle)
from .gripper import GripperModel, default_gripper
from .simulation import ObjectModel, ReferenceTrajectory, SimParams
from .synthesis import SynthesisConfig


class SceneError(ValueError):
    """Scene config violates the schema; message carries the field path."""


@dataclass(frozen=True)
class CatalogObject:
    name: str
    shape: Shape
    mass: float                       # kg
    feature_labels: tuple[str, ...]   # per composite child; single label else
    friction_override: Optional[float] = None
    stiffness_override: Optional[float] = None

    def feature_at(self, local_point: np.ndarray) -> str:
        """Feature owning the closest surface to a point in the shape frame."""
        if not isinstance(self.shape, Composite):
            return self.feature_labels[0]
        d = self.shape.child_sdfs(np.asarray(local_point, dtype=float)[None, :])
        return self.feature_labels[int(np.argmin(d[:, 0]))]


def _composite(children: list[tuple[Shape, Pose]]) -> Composite:
    return Composite(tuple(children))


def _builders():
    def sphere():
        return Sphere(0.035), 0.15, ("body",), {}

    def cube():
        return Box((0.02, 0.02, 0.02)), 0.2, ("body",), {}

    def dumbbell():
        shape = _composite([
            (Sphere(0.025), Pose.from_translation([-0.05, 0.0, 0.0])),
            (Sphere(0.025), Pose.from_translation([0.05, 0.0, 0.0])),
            (Cylinder(0.01, 0.1),
             Pose(np.array([0.0, 0.0, 0.0]),
                  quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), np.pi / 2))),
        ])
        return shape, 0.5, ("end", "end", "bar"), {}

    def can():
        return Cylinder(0.0375, 0.23), 0.35, ("body",), {}

    def plate():
        return Box((0.10, 0.05, 0.0025)), 0.3, ("body",), {}

    def cup():
        # Torus ring lies in its local x-z plane; keeping the handle's hole
        # horizontal-facing requires no extra rotation with a z-up body.
        shape = _composite([
            (Cylinder(0.04, 0.10), Pose.identity()),
            (Torus(0.025, 0.008), Pose.from_translation([0.0525, 0.0, 0.0])),
        ])
        return shape, 0.3, ("body", "handle"), {}

    def drill_proxy():
        shape = _composite([
            (Box((0.09, 0.03, 0.035)), Pose.from_translation([0.0, 0.0, 0.04])),
            (Cylinder(0.018, 0.12), Pose.from_translation([0.03, 0.0, -0.04])),
        ])
        return shape, 0.8, ("body", "handle"), {}

    def hammer_proxy():
        shape = _composite([
            (Capsule(0.015, 0.24), Pose.from_translation([0.0, 0.0, -0.24])),
            (Box((0.055, 0.018, 0.018)), Pose.from_translation([0.0, 0.0, 0.01])),
        ])
        return shape, 0.6, ("handle", "head"), {}

    def spiked_ball():
        children = [(Sphere(0.03), Pose.identity())]
        labels = ["body"]
        # 12 spikes on an icosahedral direction set; thin capsules as spikes.
        phi = (1 + np.sqrt(5.0)) / 2
        dirs = []
        for a in (-1.0, 1.0):
            for b in (-phi, phi):
                dirs += [np.array([0.0, a, b]), np.array([a, b, 0.0]),
                         np.array([b, 0.0, a])]
        for v in dirs:
            v = v / np.linalg.norm(v)
            z = np.array([0.0, 0.0, 1.0])
            axis = np.cross(z, v)
            s = np.linalg.norm(axis)
            angle = float(np.arctan2(s, z @ v))
            q = quat_from_axis_angle(axis / s if s > 1e-12 else np.array([1.0, 0, 0]),
                                     angle)
            children.append((Capsule(0.004, 0.018), Pose(0.028 * v, q)))
            labels.append("spike")
        return _composite(children), 0.2, tuple(labels), {}

    def _utensil(head: Shape, head_offset, mass):
        shape = _composite([
            (Capsule(0.006, 0.12), Pose.from_translation([0.0, 0.0, -0.12])),
            (head, Pose.from_translation(head_offset)),
        ])
        return shape, mass, ("handle", "head"), {}

    def spoon():
        return _utensil(Sphere(0.014), [0.0, 0.0, 0.012], 0.05)

    def fork():
        return _utensil(Box((0.012, 0.004, 0.02)), [0.0, 0.0, 0.02], 0.05)

    def screwdriver():
        shape = _composite([
            (Capsule(0.014, 0.10), Pose.from_translation([0.0, 0.0, -0.10])),
            (Cylinder(0.004, 0.12), Pose.from_translation([0.0, 0.0, 0.06])),
        ])
        return shape, 0.1, ("handle", "head"), {}

    def foam_ball():
        return Sphere(0.035), 0.05, ("body",), {"stiffness": 2e3}

    def wet_sphere():
        return Sphere(0.035), 0.15, ("body",), {"friction": 0.15}

    return {
        "sphere": sphere, "cube": cube, "dumbbell": dumbbell, "can": can,
        "plate": plate, "cup": cup, "drill-proxy": drill_proxy,
        "hammer-proxy": hammer_proxy, "spiked-ball": spiked_ball,
        "spoon": spoon, "fork": fork, "screwdriver": screwdriver,
        "foam-ball": foam_ball, "wet-sphere": wet_sphere,
    }


_BUILDERS = _builders()
CATALOG_NAMES = tuple(sorted(_BUILDERS))


def build_catalog_object(name: str, overrides: Optional[dict] = None) -> CatalogObject:
    if name not in _BUILDERS:
        raise SceneError(f"unknown catalog object {name!r}; "
                         f"known: {', '.join(CATALOG_NAMES)}")
    shape, mass, labels, extra = _BUILDERS[name]()
    overrides = dict(overrides or {})
    mass = float(overrides.pop("mass_g", mass * 1000.0)) / 1000.0
    friction = overrides.pop("friction", extra.get("friction"))
    stiffness = overrides.pop("stiffness", extra.get("stiffness"))
    if overrides:
        raise SceneError(f"unknown catalog override keys: "
                         f"{sorted(overrides)} for object {name!r}")
    return CatalogObject(name, shape, mass, labels,
                         None if friction is None else float(friction),
                         None if stiffness is None else float(stiffness))


# ---------------------------------------------------------------------------
# Mass properties
# ---------------------------------------------------------------------------

def _bounding_box(shape: Shape, pad: float = 0.02) -> tuple[np.ndarray, np.ndarray]:
    pts = shape.surface_samples(400)
    return pts.min(axis=0) - pad, pts.max(axis=0) + pad


def uniform_inertia(shape: Shape, mass: float, samples: int = 100_000,
                    seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Uniform-density rotational inertia about the CoM plus the CoM itself.

    Seeded Monte-Carlo rejection sampling over the shape's bounding box.
    Returns (inertia 3x3, com 3-vector) in the shape frame.
    """
    lo, hi = _bounding_box(shape)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(samples, 3))
    inside = pts[shape.sdf(pts) < 0.0]
    if len(inside) < 100:
        raise ValueError("degenerate shape: too few interior samples for "
                         "inertia estimation")
    com = inside.mean(axis=0)
    r = inside - com
    r2 = np.einsum("ij,ij->i", r, r)
    outer = np.einsum("ij,ik->jk", r, r) / len(r)
    inertia = mass * (np.mean(r2) * np.eye(3) - outer)
    return 0.5 * (inertia + inertia.T), com


def bounding_radius(shape: Shape, com: np.ndarray) -> float:
    pts = shape.surface_samples(400)
    return float(np.max(np.linalg.norm(pts - com, axis=1)))


def make_object_model(cat: CatalogObject, inertia_samples: int = 100_000,
                      seed: int = 0) -> ObjectModel:
    inertia, com = uniform_inertia(cat.shape, cat.mass, inertia_samples, seed)
    return ObjectModel(cat.shape, cat.mass, inertia, com_offset=com,
                       friction=cat.friction_override)


# ---------------------------------------------------------------------------
# Scene configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    nx: int = 32
    ny: int = 32
    x_range: tuple[float, float] = (-0.18, 0.18)   # m
    y_range: tuple[float, float] = (-0.18, 0.18)   # m
    height: float = 0.0                            # m, slice height
    cell_thickness: Optional[float] = None         # m, defaults to x step
    attitude: str = "tangent"                      # "tangent" | "fixed"
    exploration_radius: float = 0.25               # m


@dataclass(frozen=True)
class TrajectoryConfig:
    lift_height: float = 0.3
    lift_time: float = 1.0
    yaw_amplitude_deg: float = 30.0
    yaw_time: float = 2.0
    yaw_frequency: float = 0.5
    roll_deg: float = 90.0
    roll_time: float = 1.0

    def build(self, start_pose: Pose) -> ReferenceTrajectory:
        return ReferenceTrajectory(
            start_pose, self.lift_height, self.lift_time,
            np.deg2rad(self.yaw_amplitude_deg), self.yaw_time,
            self.yaw_frequency, np.deg2rad(self.roll_deg), self.roll_time)


@dataclass(frozen=True)
class MetricConfig:
    samples: int = 8
    probe: float = 0.5
    window: float = 0.01


@dataclass
class Scene:
    """Fully resolved scene: the operand of synthesis, metrics, and mapping."""

    gripper: GripperModel
    catalog_object: CatalogObject
    obj: ObjectModel
    object_pose: Pose
    params: SimParams
    synthesis: SynthesisConfig
    grid: GridConfig
    trajectory: TrajectoryConfig
    metric: MetricConfig
    seed: int = 0
    characteristic_length: float = 0.0
    support_z: float = 0.0  # world z of the table the object rests on

    def __post_init__(self):
        if self.characteristic_length <= 0.0:
            self.characteristic_length = bounding_radius(self.obj.shape,
                                                         self.obj.com_offset)
        pts = self.object_pose.transform(self.obj.shape.surface_samples(400))
        self.support_z = float(pts[:, 2].min())

    @property
    def exploration_radius(self) -> float:
        return self.grid.exploration_radius

    def feature_at(self, world_point: np.ndarray) -> str:
        local = self.object_pose.inverse().transform(world_point)
        return self.catalog_object.feature_at(local)

    def trajectory_for(self, start_pose: Pose) -> ReferenceTrajectory:
        return self.trajectory.build(start_pose)


_CM = 0.01


def _take(d: dict, path: str, schema: dict) -> dict:
    unknown = set(d) - set(schema)
    if unknown:
        raise SceneError(f"unknown key {path}.{sorted(unknown)[0]}")
    return {k: d[k] for k in d}


def _num(d, key, default, path, lo=None):
    v = d.get(key, default)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise SceneError(f"{path}.{key} must be a number")
    if lo is not None and not v > lo:
        raise SceneError(f"{path}.{key} must be > {lo}")
    return float(v)


_SIM_KEYS = {
    "dt": ("dt", 1.0, None),
    "contact_stiffness": ("contact_stiffness", 1.0, 0.0),
    "contact_damping": ("contact_damping", 1.0, 0.0),
    "friction": ("friction", 1.0, 0.0),
    "slip_velocity": ("slip_velocity", 1.0, 0.0),
    "joint_damping": ("joint_damping", 1.0, 0.0),
    "paper_gyroscopic": ("paper_gyroscopic", None, None),
}

_SYN_KEYS = {
    "policy": None, "approach_force": 0.0, "closing_torque": 0.0,
    "settle_speed": 0.0, "settle_window": 0.0, "alignment_spread_cm": 0.0,
    "alignment_target_cm": 0.0, "closure_target_cm": 0.0,
    "max_iterations": 0.0, "damping": 0.0, "step_scale": 0.0,
    "max_halvings": 0.0, "approach_timeout": 0.0, "settle_timeout": 0.0,
    "hold_time": 0.0,
}


def parse_scene(source) -> Scene:
    """Build a Scene from a JSON config (path, file object, or dict).

    Unknown keys anywhere in the document are rejected with the offending
    field path.  Lengths carry a `_cm` suffix and are converted to meters.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SceneError("scene config must be a JSON object")
    top = _take(doc, "$", {"object", "gripper", "sim", "synthesis", "grid",
                           "trajectory", "metric", "seed"})

    # Object -------------------------------------------------------------
    od = top.get("object")
    if not isinstance(od, dict):
        raise SceneError("$.object is required and must be an object")
    od = _take(od, "$.object", {"catalog", "mesh", "scale", "mass_g",
                                "friction", "stiffness", "pose_cm",
                                "yaw_deg", "overrides"})
    has_catalog = "catalog" in od
    has_mesh = "mesh" in od
    if has_catalog == has_mesh:
        raise SceneError("$.object needs exactly one of 'catalog' or 'mesh'")
    if has_catalog:
        overrides = dict(od.get("overrides", {}))
        for k in ("mass_g", "friction", "stiffness"):
            if k in od:
                overrides[k] = od[k]
        cat = build_catalog_object(od["catalog"], overrides)
    else:
        shape = load_mesh(od["mesh"], float(od.get("scale", 1.0)))
        mass = _num(od, "mass_g", 300.0, "$.object", lo=0.0) / 1000.0
        cat = CatalogObject(f"mesh:{od['mesh']}", shape, mass, ("body",),
                            od.get("friction"), od.get("stiffness"))
    pose_cm = od.get("pose_cm", [0.0, 0.0, 0.0])
    if (not isinstance(pose_cm, (list, tuple)) or len(pose_cm) != 3
            or not all(isinstance(v, (int, float)) for v in pose_cm)):
        raise SceneError("$.object.pose_cm must be a 3-number list")
    yaw = np.deg2rad(_num(od, "yaw_deg", 0.0, "$.object"))
    object_pose = Pose(np.asarray(pose_cm, dtype=float) * _CM,
                       quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw))

    # Gripper ------------------------------------------------------------
    gd = _take(top.get("gripper", {}), "$.gripper", {"scale"})
    gripper = default_gripper(_num(gd, "scale", 1.0, "$.gripper", lo=0.0))

    # Simulation ---------------------------------------------------------
    sd = _take(top.get("sim", {}), "$.sim", set(_SIM_KEYS))
    sim_kwargs = {}
    for key, (attr, _, _lo) in _SIM_KEYS.items():
        if key in sd:
            if key == "paper_gyroscopic":
                if not isinstance(sd[key], bool):
                    raise SceneError("$.sim.paper_gyroscopic must be a bool")
                sim_kwargs[attr] = sd[key]
            else:
                sim_kwargs[attr] = _num(sd, key, None, "$.sim", lo=0.0)
    params = SimParams(**sim_kwargs)

    # Synthesis ----------------------------------------------------------
    yd = _take(top.get("synthesis", {}), "$.synthesis", set(_SYN_KEYS))
    syn_kwargs = {}
    for key in yd:
        value = yd[key]
        if key == "policy":
            if value not in ("baseline", "shape"):
                raise SceneError("$.synthesis.policy must be "
                                 "'baseline' or 'shape'")
            syn_kwargs["policy"] = value
        elif key in ("max_iterations", "max_halvings"):
            if not isinstance(value, int) or value <= 0:
                raise SceneError(f"$.synthesis.{key} must be a positive int")
            syn_kwargs[key] = value
        elif key.endswith("_cm"):
            syn_kwargs[key[:-3]] = _num(yd, key, None, "$.synthesis",
                                        lo=0.0) * _CM
        else:
            syn_kwargs[key] = _num(yd, key, None, "$.synthesis", lo=0.0)
    synthesis = SynthesisConfig(**syn_kwargs)

    # Grid ---------------------------------------------------------------
    kd = _take(top.get("grid", {}), "$.grid",
               {"nx", "ny", "x_range_cm", "y_range_cm", "height_cm",
                "cell_thickness_cm", "attitude", "exploration_radius_cm"})
    def _range(key, default):
        v = kd.get(key, default)
        if (not isinstance(v, (list, tuple)) or len(v) != 2
                or not all(isinstance(x, (int, float)) for x in v)
                or not v[0] < v[1]):
            raise SceneError(f"$.grid.{key} must be [lo, hi] with lo < hi")
        return (float(v[0]) * _CM, float(v[1]) * _CM)
    nx = kd.get("nx", 32)
    ny = kd.get("ny", 32)
    for label, v in (("nx", nx), ("ny", ny)):
        if not isinstance(v, int) or v < 2:
            raise SceneError(f"$.grid.{label} must be an int >= 2")
    attitude = kd.get("attitude", "tangent")
    if attitude not in ("tangent", "fixed"):
        raise SceneError("$.grid.attitude must be 'tangent' or 'fixed'")
    thickness = kd.get("cell_thickness_cm")
    if thickness is not None:
        thickness = _num(kd, "cell_thickness_cm", None, "$.grid", lo=0.0) * _CM
    grid = GridConfig(
        nx, ny, _range("x_range_cm", (-18.0, 18.0)),
        _range("y_range_cm", (-18.0, 18.0)),
        _num(kd, "height_cm", 0.0, "$.grid") * _CM, thickness, attitude,
        _num(kd, "exploration_radius_cm", 25.0, "$.grid", lo=0.0) * _CM)

    # Trajectory ---------------------------------------------------------
    td = _take(top.get("trajectory", {}), "$.trajectory",
               {"lift_height_cm", "lift_time", "yaw_amplitude_deg",
                "yaw_time", "yaw_frequency", "roll_deg", "roll_time"})
    trajectory = TrajectoryConfig(
        _num(td, "lift_height_cm", 30.0, "$.trajectory", lo=0.0) * _CM,
        _num(td, "lift_time", 1.0, "$.trajectory", lo=0.0),
        _num(td, "yaw_amplitude_deg", 30.0, "$.trajectory"),
        _num(td, "yaw_time", 2.0, "$.trajectory", lo=0.0),
        _num(td, "yaw_frequency", 0.5, "$.trajectory", lo=0.0),
        _num(td, "roll_deg", 90.0, "$.trajectory"),
        _num(td, "roll_time", 1.0, "$.trajectory", lo=0.0))

    # Metric -------------------------------------------------------------
    md = _take(top.get("metric", {}), "$.metric",
               {"samples", "probe", "window"})
    samples = md.get("samples", 8)
    if not isinstance(samples, int) or samples < 1:
        raise SceneError("$.metric.samples must be a positive int")
    metric = MetricConfig(samples,
                          _num(md, "probe", 0.5, "$.metric", lo=0.0),
                          _num(md, "window", 0.01, "$.metric", lo=0.0))

    seed = top.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise SceneError("$.seed must be a non-negative integer")

    if cat.stiffness_override is not None:
        params = replace(params, contact_stiffness=cat.stiffness_override)
    obj = make_object_model(cat, seed=seed)
    params.check_stability(obj.mass)
    return Scene(gripper, cat, obj, object_pose, params, synthesis, grid,
                 trajectory, metric, seed)


def emit_scene(scene_doc: dict) -> str:
    """Canonical serialization of a raw scene document (sorted keys)."""
    return json.dumps(scene_doc, indent=2, sort_keys=True)
