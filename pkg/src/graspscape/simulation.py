"""Penalty contact model, object equations of motion, fixed-step integration.

The object is a full 6-DoF rigid body; the gripper is quasi-static: its base
is frozen, force-driven, trajectory-driven, or acceleration-driven, and its
joints follow first-order damped dynamics under commanded and contact
torques.  Contacts are one-per-penetrating-link penalty contacts with
regularized Coulomb friction; the base slab additionally resolves
face-on-face contact through its corner samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .geometry import (Pose, Shape, quat_conj, quat_integrate, quat_mul,
                       quat_from_axis_angle, quat_to_mat, sdf_gradient)
from .gripper import (COUPLING_RATIO, GripperModel, GripperState,
                      ObjectDistanceField, all_link_poses,
                      joint_positions_axes, _batched_capsule_min, _box_samples)

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


class SimulationUnstable(RuntimeError):
    """Raised when integration diverges; callers treat the rollout as non-viable."""


@dataclass(frozen=True)
class ObjectModel:
    shape: Shape
    mass: float
    inertia: np.ndarray  # body-frame rotational inertia about the CoM
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    friction: Optional[float] = None  # None -> SimParams.friction

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"object mass must be > 0, got {self.mass}")
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T):
            raise ValueError("inertia must be a symmetric 3x3 matrix")
        eig_min = float(np.min(np.linalg.eigvalsh(inertia)))
        if eig_min <= 0:
            raise ValueError("inertia must be positive definite")
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "com_offset",
                           np.asarray(self.com_offset, dtype=float))
        object.__setattr__(self, "_inertia_inv", np.linalg.inv(inertia))
        object.__setattr__(self, "_inertia_min", eig_min)


@dataclass(frozen=True)
class SimParams:
    dt: float = 5e-4
    contact_stiffness: float = 2e4   # N/m
    contact_damping: float = 40.0    # N.s/m
    friction: float = 0.6
    slip_velocity: float = 1e-3      # m/s, friction regularization scale
    max_substeps: int = 1
    joint_damping: float = 2.0       # N.m.s per unit joint speed
    base_mass: float = 1.0           # kg, force-driven base translation
    base_drag: float = 50.0          # N.s/m, force-driven base viscosity
    paper_gyroscopic: bool = True    # factor-2 gyroscopic term; False = standard
    speed_limit: float = 1e3         # m/s, instability guard
    contact_margin: float = 5e-3     # m, broad-phase slack
    patch_radius: float = 5e-3       # m, soft-contact patch for drilling friction
    support_plane: Optional[float] = None  # world z of a static table, if any

    def __post_init__(self):
        for name in ("dt", "contact_stiffness", "contact_damping", "friction",
                     "slip_velocity", "joint_damping", "base_mass", "base_drag"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SimParams.{name} must be > 0")

    def check_stability(self, object_mass: float) -> None:
        ratio = self.contact_stiffness * self.dt ** 2 / object_mass
        if ratio >= 0.1:
            raise ValueError(
                f"unstable parameters: k_n*dt^2/m_o = {ratio:.3g} >= 0.1; "
                "reduce dt or stiffness, or increase object mass")


@dataclass
class ContactPoint:
    link_index: int        # 0 = base
    position: np.ndarray   # world, on the link surface
    normal: np.ndarray     # object outward normal at the contact
    penetration: float     # m, >= 0
    force: np.ndarray      # N, force exerted on the object
    slipping: bool = False


@dataclass
class SimState:
    time: float
    object_position: np.ndarray  # CoM, world
    object_quaternion: np.ndarray
    object_velocity: np.ndarray
    object_angular_velocity: np.ndarray
    gripper: GripperState
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    contacts: list = field(default_factory=list)
    net_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    net_torque: np.ndarray = field(default_factory=lambda: np.zeros(3))
    weld: Optional[Pose] = None  # object pose in base frame; test stub
    cache: dict = field(default_factory=dict)  # contact warm starts

    def copy(self) -> "SimState":
        return SimState(self.time, self.object_position.copy(),
                        self.object_quaternion.copy(),
                        self.object_velocity.copy(),
                        self.object_angular_velocity.copy(),
                        self.gripper.copy(), self.gravity.copy(),
                        list(self.contacts), self.net_force.copy(),
                        self.net_torque.copy(), self.weld, dict(self.cache))

    @property
    def object_pose(self) -> Pose:
        return Pose(self.object_position, self.object_quaternion)


def make_state(object_pose: Pose, gripper_state: GripperState,
               gravity=(0.0, 0.0, -9.81)) -> SimState:
    return SimState(0.0, object_pose.position.copy(),
                    object_pose.quaternion.copy(), np.zeros(3), np.zeros(3),
                    gripper_state.copy(), np.asarray(gravity, dtype=float))


@dataclass
class Commands:
    """Per-step actuation: one torque command per digit plus a base mode."""

    digit_torques: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_mode: str = "frozen"  # frozen | force | trajectory | accel
    base_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_accel: np.ndarray = field(default_factory=lambda: np.zeros(6))
    trajectory: Optional["ReferenceTrajectory"] = None
    trajectory_time: float = 0.0


# ---------------------------------------------------------------------------
# Contact detection
# ---------------------------------------------------------------------------

def _capsule_segments(model: GripperModel, poses) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = model.n_links - 1
    A = np.empty((n, 3))
    B = np.empty((n, 3))
    R = np.empty(n)
    for li in range(1, model.n_links):
        digit, which = divmod(li - 1, 2)
        spec = model.digits[digit]
        cap = spec.proximal if which == 0 else spec.distal
        pose = poses[li]
        A[li - 1] = pose.position
        B[li - 1] = pose.transform(np.array([0.0, 0.0, cap.length]))
        R[li - 1] = cap.radius
    return A, B, R


_BASE_CONTACT_CACHE: dict = {}


def _base_contact_points(model: GripperModel) -> np.ndarray:
    """Corner samples of the base slab, local frame (face-on-face support)."""
    key = id(model.base_shape)
    if key not in _BASE_CONTACT_CACHE:
        hx, hy, hz = model.base_shape.half_extents
        corners = np.array([[sx * hx, sy * hy, sz * hz]
                            for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
                           dtype=float)
        extra = _box_samples(model.base_shape, 60)
        _BASE_CONTACT_CACHE[key] = np.concatenate([corners, extra])
    return _BASE_CONTACT_CACHE[key]


_OBJ_SAMPLE_CACHE: dict = {}


def _object_samples(shape: Shape, n: int = 200) -> np.ndarray:
    key = (id(shape), n)
    if key not in _OBJ_SAMPLE_CACHE:
        _OBJ_SAMPLE_CACHE[key] = shape.surface_samples(n)
    return _OBJ_SAMPLE_CACHE[key]


def detect_contacts(state: SimState, model: GripperModel,
                    obj: ObjectModel, params: SimParams,
                    poses=None) -> list[ContactPoint]:
    """One contact per penetrating link (deepest witness), base slab special."""
    shape_pose = _object_shape_pose(state, obj)
    field_ = ObjectDistanceField(obj.shape, shape_pose)
    if poses is None:
        poses = all_link_poses(model, state.gripper)
    contacts: list[ContactPoint] = []

    # Base slab.  Two complementary queries: base samples penetrating the
    # object (face-on-face, e.g. a plate resting on the palm) and object
    # samples penetrating the base box (curved object on the flat palm).
    base_pose = poses[0]
    base_inv = base_pose.inverse()
    base_pts = base_pose.transform(_base_contact_points(model))
    d = field_.sdf(base_pts)
    pen_idx = np.where(d < 0.0)[0]
    face_contacts: list[ContactPoint] = []
    if len(pen_idx):
        # Up to 4 deepest well-separated samples form a support polygon.
        order = pen_idx[np.argsort(d[pen_idx])]
        chosen: list[int] = []
        for i in order:
            if len(chosen) == 4:
                break
            if all(float((base_pts[i] - base_pts[j])
                         @ (base_pts[i] - base_pts[j])) > 4e-4
                   for j in chosen):
                chosen.append(int(i))
        normals = _outward_normals(field_, base_pts[chosen])
        for n, i in zip(normals, chosen):
            face_contacts.append(ContactPoint(0, base_pts[i], n, float(-d[i]),
                                              np.zeros(3)))
    if len(face_contacts) >= 3:
        contacts.extend(face_contacts)
    else:
        # Point-like base contact: minimize the object SDF continuously over
        # the slab surface (pattern search seeded by the best sample), which
        # keeps the witness smooth as the object moves on the flat palm.
        k = int(np.argmin(d))
        if d[k] < params.contact_margin:
            warm = state.cache.get("base_witness")
            if warm is not None:
                p_local, d_best = _refine_on_box(field_, base_pose, model,
                                                 warm, iters=4, span0=1e-3)
            else:
                p_local, d_best = _refine_on_box(
                    field_, base_pose, model, _base_contact_points(model)[k])
            state.cache["base_witness"] = p_local
            if d_best < 0.0:
                p = base_pose.transform(p_local)
                n = _outward_normal(field_, p)
                contacts.append(ContactPoint(0, p, n, float(-d_best), np.zeros(3)))

    # Digit links: batched golden-section over capsule axes, with a bounding
    # sphere broad phase.
    A, B, R = _capsule_segments(model, poses)
    mids = 0.5 * (A + B)
    half = 0.5 * np.linalg.norm(B - A, axis=1)
    coarse = field_.sdf(mids) - half - R
    near = np.where(coarse < params.contact_margin)[0]
    if len(near):
        vals, axis_pts = _batched_capsule_min(field_.sdf, A[near], B[near])
        dist = vals - R[near]
        hit = np.where(dist < 0.0)[0]
        if len(hit):
            normals = _outward_normals(field_, axis_pts[hit])
            for n, j in zip(normals, hit):
                li = near[j]
                pos = axis_pts[j] - R[li] * n
                contacts.append(ContactPoint(int(li) + 1, pos, n,
                                             float(-dist[j]), np.zeros(3)))
    contacts.sort(key=lambda c: c.link_index)
    return contacts


def _support_contacts(state: SimState, obj: ObjectModel,
                      params: SimParams) -> list[ContactPoint]:
    """Contacts between the object and the static support plane (link -1)."""
    shape_pose = _object_shape_pose(state, obj)
    pts = shape_pose.transform(_object_samples(obj.shape, 400))
    pen = params.support_plane - pts[:, 2]
    idx = np.where(pen > 0.0)[0]
    if not len(idx):
        return []
    order = idx[np.argsort(-pen[idx])]
    chosen: list[int] = []
    for i in order:
        if len(chosen) == 4:
            break
        if all(float((pts[i, :2] - pts[j, :2])
                     @ (pts[i, :2] - pts[j, :2])) > 4e-4 for j in chosen):
            chosen.append(int(i))
    down = np.array([0.0, 0.0, -1.0])
    return [ContactPoint(-1, pts[i], down, float(pen[i]), np.zeros(3))
            for i in chosen]


def _refine_on_box(field_: ObjectDistanceField, base_pose: Pose,
                   model: GripperModel, seed_local: np.ndarray,
                   iters: int = 8,
                   span0: Optional[float] = None) -> tuple[np.ndarray, float]:
    """Minimize the object SDF over the base box surface near a seed sample.

    Pattern search over the two in-face coordinates of the seed's face,
    clamped to the face extent; cell size halves each iteration.
    """
    h = np.asarray(model.base_shape.half_extents)
    face_axis = int(np.argmax(np.abs(seed_local) / h))
    axes = [k for k in range(3) if k != face_axis]
    p = seed_local.copy()
    span = span0 if span0 is not None else 0.25 * min(h[axes[0]], h[axes[1]])
    offsets = np.array([[du, dv] for du in (-1, 0, 1) for dv in (-1, 0, 1)],
                       dtype=float)
    for _ in range(iters):
        cand = np.repeat(p[None, :], 9, axis=0)
        cand[:, axes[0]] += offsets[:, 0] * span
        cand[:, axes[1]] += offsets[:, 1] * span
        cand[:, axes[0]] = np.clip(cand[:, axes[0]], -h[axes[0]], h[axes[0]])
        cand[:, axes[1]] = np.clip(cand[:, axes[1]], -h[axes[1]], h[axes[1]])
        vals = field_.sdf(base_pose.transform(cand))
        p = cand[int(np.argmin(vals))]
        span *= 0.5
    return p, float(field_.sdf(base_pose.transform(p)))


_FD_STENCIL = 1e-6 * np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0],
                               [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)


def _outward_normal(field_: ObjectDistanceField, point: np.ndarray) -> np.ndarray:
    vals = field_.sdf(point[None, :] + _FD_STENCIL)
    g = (vals[0::2] - vals[1::2]) / 2e-6
    n = np.sqrt(g @ g)
    if n < 1e-12:
        return np.array([-1.0, 0.0, 0.0])
    return g / n


def _outward_normals(field_: ObjectDistanceField,
                     points: np.ndarray) -> np.ndarray:
    """Batched central-difference SDF gradients, one normal per row."""
    pts = points[:, None, :] + _FD_STENCIL[None, :, :]
    vals = field_.sdf(pts.reshape(-1, 3)).reshape(len(points), 6)
    g = (vals[:, 0::2] - vals[:, 1::2]) / 2e-6
    mag = np.sqrt((g * g).sum(axis=1))
    out = np.empty_like(g)
    for i in range(len(points)):
        out[i] = (np.array([-1.0, 0.0, 0.0]) if mag[i] < 1e-12
                  else g[i] / mag[i])
    return out


def _object_shape_pose(state: SimState, obj: ObjectModel) -> Pose:
    R = quat_to_mat(state.object_quaternion)
    return Pose(state.object_position - R @ obj.com_offset, state.object_quaternion)


# ---------------------------------------------------------------------------
# Forces and accelerations
# ---------------------------------------------------------------------------

def contact_force(contact: ContactPoint, relative_velocity: np.ndarray,
                  params: SimParams, friction: Optional[float] = None,
                  damping: Optional[float] = None) -> np.ndarray:
    """Penalty force exerted on the gripper link at the contact.

    ``relative_velocity`` is the link point velocity minus the object point
    velocity; the object receives the reaction (negated) force.
    """
    mu = params.friction if friction is None else friction
    c_n = params.contact_damping if damping is None else damping
    n = contact.normal
    v_rel = np.asarray(relative_velocity, dtype=float)
    pen_rate = -float(v_rel @ n)
    f_n = params.contact_stiffness * contact.penetration + c_n * pen_rate
    f_n = max(0.0, f_n)
    v_t = v_rel - (v_rel @ n) * n
    speed = math.sqrt(float(v_t @ v_t))
    force = f_n * n
    if speed > 1e-12 and f_n > 0.0:
        force = force - mu * f_n * np.tanh(speed / params.slip_velocity) * (v_t / speed)
    return force


def object_acceleration(state: SimState, obj: ObjectModel,
                        params: SimParams) -> np.ndarray:
    """6-vector (linear, angular) acceleration from the net contact wrench."""
    lin = state.net_force / obj.mass + state.gravity
    R = quat_to_mat(state.object_quaternion)
    I_w = R @ obj.inertia @ R.T
    I_inv = R @ obj._inertia_inv @ R.T
    w = state.object_angular_velocity
    factor = 2.0 if params.paper_gyroscopic else 1.0
    ang = I_inv @ state.net_torque - factor * (I_inv @ _cross(w, I_w @ w))
    return np.concatenate([lin, ang])


def _link_point_velocity(state: SimState, model: GripperModel,
                         joint_pos: np.ndarray, joint_axes: np.ndarray,
                         link_index: int, point: np.ndarray) -> np.ndarray:
    g = state.gripper
    v = g.base_velocity + _cross(g.base_angular_velocity,
                                   point - g.base_pose.position)
    if link_index > 0:
        digit, which = divmod(link_index - 1, 2)
        joints = [2 * digit] if which == 0 else [2 * digit, 2 * digit + 1]
        for j in joints:
            v = v + g.joint_velocities[j] * _cross(joint_axes[j],
                                                     point - joint_pos[j])
    return v


def _link_angular_velocity(state: SimState, joint_axes: np.ndarray,
                           link_index: int) -> np.ndarray:
    g = state.gripper
    w = g.base_angular_velocity
    if link_index > 0:
        digit, which = divmod(link_index - 1, 2)
        joints = [2 * digit] if which == 0 else [2 * digit, 2 * digit + 1]
        for j in joints:
            w = w + g.joint_velocities[j] * joint_axes[j]
    return w


def _drilling_torque(spin: float, f_n: float, mu: float,
                     params: SimParams) -> float:
    """Torsional friction moment of a finite contact patch.

    A point contact cannot resist rotation about its own normal; real pads
    can.  The moment saturates at mu * f_n * patch_radius with the same
    smooth slip regularization as the tangential model.
    """
    omega_slip = params.slip_velocity / params.patch_radius
    return mu * f_n * params.patch_radius * np.tanh(spin / omega_slip)


def _clamp_friction(force: np.ndarray, c: ContactPoint, v_rel: np.ndarray,
                    state: SimState, obj: ObjectModel, params: SimParams,
                    i_min: float, n_total: int) -> np.ndarray:
    """Impulse-limit the tangential force so one step cannot reverse slip.

    Saturated Coulomb friction integrated explicitly overshoots the slip
    reversal and sustains a chatter limit cycle; capping the force at a
    fraction of (effective mass * slip speed / dt) removes the overshoot
    while leaving sticking and steady sliding untouched.
    """
    n = c.normal
    f_t = force - (force @ n) * n
    ft_norm = math.sqrt(float(f_t @ f_t))
    if ft_norm < 1e-12:
        return force
    v_t = v_rel - (v_rel @ n) * n
    speed = math.sqrt(float(v_t @ v_t))
    r = c.position - state.object_position
    m_eff = 1.0 / (1.0 / obj.mass + float(r @ r) / i_min)
    cap = 0.5 * m_eff * speed / (params.dt * n_total)
    if ft_norm > cap:
        return (force @ n) * n + f_t * (cap / ft_norm)
    return force


def _resolve_contacts(state: SimState, model: GripperModel, obj: ObjectModel,
                      params: SimParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Populate contact forces; return (f_g, tau_g, per-joint contact torque)."""
    poses = all_link_poses(model, state.gripper)
    contacts = detect_contacts(state, model, obj, params, poses=poses)
    support = (_support_contacts(state, obj, params)
               if params.support_plane is not None else [])
    joint_pos, joint_axes = joint_positions_axes(model, state.gripper, poses=poses)
    f_net = np.zeros(3)
    tau_net = np.zeros(3)
    joint_tau = np.zeros(model.n_joints)
    mu = obj.friction if obj.friction is not None else params.friction
    # Explicit damping diverges when many stiff contacts act at once;
    # clamp the total damping rate well inside the stable region.
    n_total = len(contacts) + len(support)
    c_n = params.contact_damping
    if n_total > 0:
        c_n = min(c_n, 0.5 * obj.mass / (params.dt * n_total))
    i_min = obj._inertia_min
    for c in contacts:
        v_link = _link_point_velocity(state, model, joint_pos, joint_axes,
                                      c.link_index, c.position)
        v_obj = state.object_velocity + _cross(state.object_angular_velocity,
                                                 c.position - state.object_position)
        f_link = contact_force(c, v_link - v_obj, params, friction=mu,
                               damping=c_n)
        f_link = _clamp_friction(f_link, c, v_link - v_obj, state, obj,
                                 params, i_min, n_total)
        f_obj = -f_link
        c.force = f_obj
        v_t = (v_link - v_obj) - ((v_link - v_obj) @ c.normal) * c.normal
        c.slipping = bool(float(v_t @ v_t) > params.slip_velocity ** 2)
        f_net += f_obj
        tau_net += _cross(c.position - state.object_position, f_obj)
        f_n = float(f_link @ c.normal)
        tau_spin = np.zeros(3)
        if f_n > 0.0:
            w_link = _link_angular_velocity(state, joint_axes, c.link_index)
            spin = float((w_link - state.object_angular_velocity) @ c.normal)
            mag = _drilling_torque(spin, f_n, mu, params)
            cap = 0.5 * i_min * abs(spin) / (params.dt * n_total)
            mag = max(-cap, min(cap, mag))
            tau_spin = mag * c.normal
            tau_net += tau_spin
        if c.link_index > 0:
            digit, which = divmod(c.link_index - 1, 2)
            idxs = [2 * digit] if which == 0 else [2 * digit, 2 * digit + 1]
            for j in idxs:
                joint_tau[j] += float(joint_axes[j] @ (_cross(
                    c.position - joint_pos[j], f_link) - tau_spin))
    for c in support:
        v_obj = state.object_velocity + _cross(
            state.object_angular_velocity,
            c.position - state.object_position)
        f_table = contact_force(c, -v_obj, params, friction=mu, damping=c_n)
        f_table = _clamp_friction(f_table, c, -v_obj, state, obj, params,
                                  i_min, n_total)
        f_obj = -f_table
        c.force = f_obj
        f_net += f_obj
        tau_net += _cross(c.position - state.object_position, f_obj)
        f_n = float(f_table @ c.normal)
        if f_n > 0.0:
            spin = float(-state.object_angular_velocity @ c.normal)
            mag = _drilling_torque(spin, f_n, mu, params)
            cap = 0.5 * i_min * abs(spin) / (params.dt * n_total)
            mag = max(-cap, min(cap, mag))
            tau_net += mag * c.normal
        contacts.append(c)
    state.contacts = contacts
    state.net_force = f_net
    state.net_torque = tau_net
    return f_net, tau_net, joint_tau


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def step(state: SimState, params: SimParams, model: GripperModel,
         obj: ObjectModel, commands: Commands) -> SimState:
    """Semi-implicit Euler advance by one timestep; returns a new state."""
    s = state.copy()
    dt = params.dt
    f_net, tau_net, joint_tau = _resolve_contacts(s, model, obj, params)

    # Gripper base.
    g = s.gripper
    if commands.base_mode == "frozen":
        g.base_velocity = np.zeros(3)
        g.base_angular_velocity = np.zeros(3)
    elif commands.base_mode == "force":
        reaction = -f_net  # links push back through the (quasi-rigid) chain
        acc = (commands.base_force + reaction) / params.base_mass \
            - (params.base_drag / params.base_mass) * g.base_velocity
        g.base_velocity = g.base_velocity + dt * acc
        g.base_pose = Pose(g.base_pose.position + dt * g.base_velocity,
                           g.base_pose.quaternion)
        g.base_angular_velocity = np.zeros(3)
    elif commands.base_mode == "trajectory":
        traj = commands.trajectory
        t_next = commands.trajectory_time + dt
        new_pose = traj.pose_at(t_next)
        g.base_velocity = (new_pose.position - g.base_pose.position) / dt
        dq = quat_mul(new_pose.quaternion, quat_conj(g.base_pose.quaternion))
        angle = 2.0 * np.arctan2(np.linalg.norm(dq[1:]), dq[0])
        if angle > np.pi:
            angle -= 2 * np.pi
        axis_n = np.linalg.norm(dq[1:])
        axis = dq[1:] / axis_n if axis_n > 1e-12 else np.zeros(3)
        g.base_angular_velocity = axis * angle / dt
        g.base_pose = new_pose
    elif commands.base_mode == "accel":
        a = np.asarray(commands.base_accel, dtype=float)
        g.base_velocity = g.base_velocity + dt * a[:3]
        g.base_angular_velocity = g.base_angular_velocity + dt * a[3:]
        g.base_pose = Pose(
            g.base_pose.position + dt * g.base_velocity,
            quat_integrate(g.base_pose.quaternion, g.base_angular_velocity, dt))
    else:
        raise ValueError(f"unknown base mode: {commands.base_mode!r}")

    # Joints: first-order damped, per-digit command with fixed coupling.
    cmd = np.zeros(model.n_joints)
    for d in range(len(model.digits)):
        cmd[2 * d] = commands.digit_torques[d]
        cmd[2 * d + 1] = COUPLING_RATIO * commands.digit_torques[d]
    theta_dot = (cmd + joint_tau) / params.joint_damping
    new_joints = g.joints + dt * theta_dot
    clamped = model.clamp_joints(new_joints)
    theta_dot = np.where(clamped == new_joints, theta_dot, 0.0)
    g.joints = clamped
    g.joint_velocities = theta_dot

    # Object.
    if s.weld is not None:
        pose = g.base_pose.compose(s.weld)
        r = pose.position - g.base_pose.position
        s.object_position = pose.position
        s.object_quaternion = pose.quaternion
        s.object_velocity = g.base_velocity + _cross(g.base_angular_velocity, r)
        s.object_angular_velocity = g.base_angular_velocity.copy()
    else:
        acc = object_acceleration(s, obj, params)
        s.object_velocity = s.object_velocity + dt * acc[:3]
        s.object_angular_velocity = s.object_angular_velocity + dt * acc[3:]
        s.object_position = s.object_position + dt * s.object_velocity
        s.object_quaternion = quat_integrate(s.object_quaternion,
                                             s.object_angular_velocity, dt)

    s.time = state.time + dt
    speed = np.linalg.norm(s.object_velocity)
    if not np.isfinite(speed) or speed > params.speed_limit \
            or not np.all(np.isfinite(s.object_quaternion)):
        raise SimulationUnstable(
            f"object speed {speed:.3g} m/s at t={s.time:.4f}s exceeds limit")
    return s


# ---------------------------------------------------------------------------
# Reference trajectory and holding
# ---------------------------------------------------------------------------

def _smoothstep(u: float) -> float:
    u = min(1.0, max(0.0, u))
    return u * u * (3.0 - 2.0 * u)


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Canonical C1 base trajectory: lift, yaw oscillation, wrist roll.

    Starts at the grasp pose: vertical lift (smoothstep) over ``lift_time``,
    then a yaw oscillation about world z, then a roll about the base's
    local approach axis.
    """

    start_pose: Pose
    lift_height: float = 0.3
    lift_time: float = 1.0
    yaw_amplitude: float = np.deg2rad(30.0)
    yaw_time: float = 2.0
    yaw_frequency: float = 0.5
    roll_angle: float = np.deg2rad(90.0)
    roll_time: float = 1.0

    @property
    def duration(self) -> float:
        return self.lift_time + self.yaw_time + self.roll_time

    def pose_at(self, t: float) -> Pose:
        t = min(max(t, 0.0), self.duration)
        lift = self.lift_height * _smoothstep(t / self.lift_time)
        yaw = 0.0
        if t > self.lift_time:
            u = min(t - self.lift_time, self.yaw_time)
            env = np.sin(0.5 * np.pi * u / self.yaw_time) ** 2
            yaw = self.yaw_amplitude * env * np.sin(
                2.0 * np.pi * self.yaw_frequency * u)
        roll = 0.0
        if t > self.lift_time + self.yaw_time:
            u = (t - self.lift_time - self.yaw_time) / self.roll_time
            roll = self.roll_angle * _smoothstep(u)
        q = quat_mul(quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw),
                     quat_mul(self.start_pose.quaternion,
                              quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), roll)))
        pos = self.start_pose.position + np.array([0.0, 0.0, lift])
        return Pose(pos, q)


@dataclass
class HoldReport:
    held: bool
    max_relative_displacement: float
    failure_time: Optional[float] = None
    diagnostic: str = ""


HOLD_DISPLACEMENT_LIMIT = 0.02  # m


def execute_trajectory(state: SimState, traj: ReferenceTrajectory,
                       tau_max: float, params: SimParams, model: GripperModel,
                       obj: ObjectModel,
                       observer: Optional[Callable] = None) -> HoldReport:
    """Drive the base along ``traj`` holding with torque ``tau_max`` per digit.

    The grasp holds iff the object's displacement relative to the base stays
    under :data:`HOLD_DISPLACEMENT_LIMIT` and contact persists throughout.
    """
    if not state.contacts:
        _resolve_contacts(state, model, obj, params)
    s = state.copy()
    rel0 = s.gripper.base_pose.inverse().transform(s.object_position)
    n_steps = int(round(traj.duration / params.dt))
    max_disp = 0.0
    torques = np.full(len(model.digits), tau_max)
    for k in range(n_steps):
        cmd = Commands(digit_torques=torques, base_mode="trajectory",
                       trajectory=traj, trajectory_time=k * params.dt)
        try:
            s = step(s, params, model, obj, cmd)
        except SimulationUnstable as exc:
            return HoldReport(False, max_disp, s.time, f"unstable: {exc}")
        rel = s.gripper.base_pose.inverse().transform(s.object_position)
        disp = float(np.linalg.norm(rel - rel0))
        max_disp = max(max_disp, disp)
        if disp >= HOLD_DISPLACEMENT_LIMIT:
            return HoldReport(False, max_disp, s.time, "object slipped")
        if not s.contacts:
            return HoldReport(False, max_disp, s.time, "contact lost")
        if observer is not None:
            observer(s, (k + 1) * params.dt)
    return HoldReport(True, max_disp)


def settle(state: SimState, params: SimParams, model: GripperModel,
           obj: ObjectModel, commands: Commands, duration: float,
           stop_when_still: bool = False,
           still_speed: float = 1e-3, still_window: float = 0.05) -> SimState:
    """Run fixed commands for ``duration``, optionally stopping once both the
    joints and the object have been below ``still_speed`` for ``still_window``."""
    s = state
    n_steps = int(round(duration / params.dt))
    still_needed = int(round(still_window / params.dt))
    still_run = 0
    for _ in range(n_steps):
        s = step(s, params, model, obj, commands)
        if stop_when_still:
            js = np.max(np.abs(s.gripper.joint_velocities)) if s.gripper.joint_velocities.size else 0.0
            ov = np.linalg.norm(s.object_velocity)
            if js < still_speed and ov < still_speed:
                still_run += 1
                if still_run >= still_needed:
                    break
            else:
                still_run = 0
    return s
