"""Kinematic model of the 3-digit gripper: link poses, limits, distance Jacobians.

The gripper is a proxy for a commercial 3-digit hand: a base slab with two
digits on one side opposing a single digit, each digit built from a proximal
and a distal capsule link.  Link frames place the capsule segment along
local +z; digit chains are trees rooted at the base.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (Box, Capsule, Pose, Shape, quat_from_axis_angle,
                       quat_to_mat, surface_query)

# Default proxy dimensions (m); approximate a commercial 3-digit gripper.
BASE_HALF_EXTENTS = (0.06, 0.05, 0.02)
PROXIMAL_LENGTH = 0.057
DISTAL_LENGTH = 0.045
LINK_RADIUS = 0.012
JOINT_LIMITS = (0.0, 1.6)
COUPLING_RATIO = 0.8  # distal joint advance per unit proximal command


@dataclass(frozen=True)
class DigitSpec:
    """One digit: mount transform on the base and its two revolute joints."""

    mount: Pose          # digit root frame in base coordinates
    joint_axis: np.ndarray  # axis (digit-root frame) shared by both joints
    proximal: Capsule
    distal: Capsule
    limits: tuple[float, float] = JOINT_LIMITS


@dataclass(frozen=True)
class GripperModel:
    base_shape: Box
    digits: tuple[DigitSpec, ...]
    link_masses: tuple[float, ...] = ()

    def __post_init__(self):
        for d in self.digits:
            lo, hi = d.limits
            if not lo < hi:
                raise ValueError(f"joint limits must satisfy lo < hi, got {d.limits}")
        if not self.link_masses:
            object.__setattr__(self, "link_masses",
                               (0.8,) + (0.05, 0.04) * len(self.digits))

    @property
    def n_joints(self) -> int:
        return 2 * len(self.digits)

    @property
    def n_links(self) -> int:
        """Base plus two links per digit."""
        return 1 + 2 * len(self.digits)

    def link_shape(self, link_index: int) -> Shape:
        if link_index == 0:
            return self.base_shape
        digit, which = divmod(link_index - 1, 2)
        return self.digits[digit].proximal if which == 0 else self.digits[digit].distal

    def clamp_joints(self, joints: np.ndarray) -> np.ndarray:
        out = np.array(joints, dtype=float)
        for d in range(len(self.digits)):
            lo, hi = self.digits[d].limits
            out[2 * d:2 * d + 2] = np.clip(out[2 * d:2 * d + 2], lo, hi)
        return out


def default_gripper(scale: float = 1.0) -> GripperModel:
    """Proxy 3-digit gripper: digits 1, 2 side by side opposing digit 3.

    The palm face is the base's local +z face; open digits point along +z.
    Positive joint angles curl the digits toward the palm center.
    """
    prox = Capsule(LINK_RADIUS * scale, PROXIMAL_LENGTH * scale)
    dist = Capsule(LINK_RADIUS * scale, DISTAL_LENGTH * scale)
    hx, hy, hz = (e * scale for e in BASE_HALF_EXTENTS)
    mount_x = 0.04 * scale
    mount_y = 0.03 * scale
    digits = (
        DigitSpec(Pose.from_translation([mount_x, mount_y, hz]),
                  np.array([0.0, -1.0, 0.0]), prox, dist),
        DigitSpec(Pose.from_translation([mount_x, -mount_y, hz]),
                  np.array([0.0, -1.0, 0.0]), prox, dist),
        DigitSpec(Pose.from_translation([-mount_x, 0.0, hz]),
                  np.array([0.0, 1.0, 0.0]), prox, dist),
    )
    return GripperModel(base_shape=Box((hx, hy, hz)), digits=digits)


@dataclass
class GripperState:
    """Instantaneous configuration; joints are clamped to limits on write."""

    base_pose: Pose
    joints: np.ndarray
    joint_velocities: np.ndarray = field(default_factory=lambda: np.zeros(0))
    base_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=float).copy()
        if self.joint_velocities.size == 0:
            self.joint_velocities = np.zeros_like(self.joints)
        self.joint_velocities = np.asarray(self.joint_velocities, dtype=float).copy()
        self.base_velocity = np.asarray(self.base_velocity, dtype=float).copy()
        self.base_angular_velocity = np.asarray(
            self.base_angular_velocity, dtype=float).copy()

    def copy(self) -> "GripperState":
        return GripperState(self.base_pose, self.joints.copy(),
                            self.joint_velocities.copy(),
                            self.base_velocity.copy(),
                            self.base_angular_velocity.copy())


def open_state(model: GripperModel, base_pose: Pose | None = None) -> GripperState:
    """Digits opened to their widest (joint lower limits)."""
    joints = np.array([model.digits[d].limits[0]
                       for d in range(len(model.digits)) for _ in range(2)])
    return GripperState(base_pose or Pose.identity(), joints)


def link_pose(model: GripperModel, state: GripperState, link_index: int) -> Pose:
    """World pose of link ``link_index`` (0 = base, then digit links in order)."""
    return all_link_poses(model, state)[link_index]


_ZERO3 = np.zeros(3)


def all_link_poses(model: GripperModel, state: GripperState) -> list[Pose]:
    """World poses of every link: base first, digits in index order."""
    joints = state.joints
    poses = [state.base_pose]
    for d, spec in enumerate(model.digits):
        root = state.base_pose.compose(spec.mount)
        q1 = quat_from_axis_angle(spec.joint_axis, joints[2 * d])
        prox = root.compose(Pose._fast(_ZERO3, q1))
        poses.append(prox)
        tip = Pose._fast(np.array([0.0, 0.0, spec.proximal.length]),
                         quat_from_axis_angle(spec.joint_axis,
                                              joints[2 * d + 1]))
        poses.append(prox.compose(tip))
    return poses


def joint_positions_axes(model: GripperModel, state: GripperState, poses=None):
    """World joint anchor positions and axes, ordered as the joint vector."""
    if poses is None:
        poses = all_link_poses(model, state)
    positions, axes = [], []
    for d, spec in enumerate(model.digits):
        root = state.base_pose.compose(spec.mount)
        positions.append(root.position)
        axes.append(root.rotate(spec.joint_axis))
        prox = poses[1 + 2 * d]
        positions.append(prox.transform(np.array([0.0, 0.0, spec.proximal.length])))
        axes.append(prox.rotate(spec.joint_axis))
    return np.asarray(positions), np.asarray(axes)


# ---------------------------------------------------------------------------
# Link-object distances
# ---------------------------------------------------------------------------

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _capsule_segment_world(model, poses, link_index):
    digit, which = divmod(link_index - 1, 2)
    spec = model.digits[digit]
    cap = spec.proximal if which == 0 else spec.distal
    pose = poses[link_index]
    a = pose.position
    b = pose.transform(np.array([0.0, 0.0, cap.length]))
    return a, b, cap.radius


class ObjectDistanceField:
    """Posed object wrapped as a world-frame SDF with cached transforms."""

    def __init__(self, shape: Shape, pose: Pose):
        self.shape = shape
        self.pose = pose
        inv = pose.inverse()
        self._rot_t = inv.matrix.T
        self._off = inv.position

    def sdf(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.shape.sdf(pts @ self._rot_t + self._off)


def capsule_distance(field: ObjectDistanceField, a: np.ndarray, b: np.ndarray,
                     radius: float, iters: int = 40):
    """Distance from a capsule (segment a-b, radius) surface to the object.

    Golden-section search of the object SDF along the segment; exact when the
    SDF restricted to the segment is unimodal, which holds for the convex-ish
    catalog primitives at contact-relevant ranges.  Returns (distance, axis
    point parameter t in [0, 1]).
    """
    # Coarse bracket from a fixed scan to survive multimodal profiles.
    ts = np.linspace(0.0, 1.0, 17)
    pts = a[None, :] + ts[:, None] * (b - a)[None, :]
    vals = field.sdf(pts)
    k = int(np.argmin(vals))
    lo = ts[max(0, k - 1)]
    hi = ts[min(len(ts) - 1, k + 1)]
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1 = float(field.sdf(a + x1 * (b - a)))
    f2 = float(field.sdf(a + x2 * (b - a)))
    for _ in range(iters):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = float(field.sdf(a + x1 * (b - a)))
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = float(field.sdf(a + x2 * (b - a)))
    t = x1 if f1 < f2 else x2
    d = min(f1, f2) - radius
    return d, t


def _batched_capsule_min(field_sdf, A, B, iters: int = 12, scan: int = 9):
    """Minimum object SDF along each segment; returns (values, axis points)."""
    n = len(A)
    ts = np.linspace(0.0, 1.0, scan)
    pts = A[:, None, :] + ts[None, :, None] * (B - A)[:, None, :]
    vals = field_sdf(pts.reshape(-1, 3)).reshape(n, scan)
    k = np.argmin(vals, axis=1)
    lo = ts[np.maximum(0, k - 1)]
    hi = ts[np.minimum(scan - 1, k + 1)]
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    seg = B - A
    f1 = field_sdf(A + x1[:, None] * seg)
    f2 = field_sdf(A + x2[:, None] * seg)
    for _ in range(iters):
        take1 = f1 <= f2
        hi = np.where(take1, x2, hi)
        lo = np.where(take1, lo, x1)
        x1n = np.where(take1, hi - _GOLDEN * (hi - lo), x2)
        x2n = np.where(take1, x1, lo + _GOLDEN * (hi - lo))
        probe = np.where(take1, x1n, x2n)
        fp = field_sdf(A + probe[:, None] * seg)
        f1, f2 = np.where(take1, fp, f2), np.where(take1, f1, fp)
        x1, x2 = x1n, x2n
    best_t = np.where(f1 < f2, x1, x2)
    best_f = np.minimum(f1, f2)
    return best_f, A + best_t[:, None] * seg


_BOX_SAMPLE_CACHE: dict = {}


def _box_samples(box: Box, n: int = 200) -> np.ndarray:
    key = (id(box), n)
    if key not in _BOX_SAMPLE_CACHE:
        _BOX_SAMPLE_CACHE[key] = box.surface_samples(n)
    return _BOX_SAMPLE_CACHE[key]


def base_distance(field: ObjectDistanceField, model: GripperModel,
                  base_pose: Pose) -> float:
    """Distance from the base slab surface to the object (sampled minimum)."""
    pts = base_pose.transform(_box_samples(model.base_shape))
    return float(np.min(field.sdf(pts)))


def link_distances(model: GripperModel, state: GripperState,
                   field: ObjectDistanceField,
                   include_base: bool = False) -> np.ndarray:
    """Surface distances of the digit links (optionally prefixed by the base)."""
    poses = all_link_poses(model, state)
    n = model.n_links - 1
    A = np.empty((n, 3))
    B = np.empty((n, 3))
    R = np.empty(n)
    for li in range(1, model.n_links):
        A[li - 1], B[li - 1], R[li - 1] = _capsule_segment_world(model, poses, li)
    vals, _ = _batched_capsule_min(field.sdf, A, B)
    dists = vals - R
    if include_base:
        return np.concatenate(
            [[base_distance(field, model, state.base_pose)], dists])
    return dists


def offset_distances(model: GripperModel, state: GripperState,
                     field: ObjectDistanceField) -> np.ndarray:
    """Per-link distances minus the base-object distance."""
    d = link_distances(model, state, field, include_base=True)
    return d[1:] - d[0]


def _apply_base_delta(pose: Pose, delta: np.ndarray) -> Pose:
    """Perturb a pose by (3 translation, 3 rotation-vector) components."""
    from .geometry import quat_from_rotvec, quat_mul

    return Pose(pose.position + delta[:3],
                quat_mul(quat_from_rotvec(delta[3:]), pose.quaternion))


def distance_jacobian(model: GripperModel, state: GripperState,
                      field: ObjectDistanceField,
                      wrt: str = "joints", h: float = 1e-5) -> np.ndarray:
    """Central finite-difference Jacobian of the link-distance vector.

    ``wrt="joints"``: rows are per-link offset distances, columns the joint
    angles.  ``wrt="base-and-joints"``: rows are [base distance, raw link
    distances], columns 3 base translations + 3 base rotation-vector
    components + joint angles.
    """
    if wrt == "joints":
        n = model.n_joints

        def evaluate(delta):
            st = state.copy()
            st.joints = state.joints + delta
            return offset_distances(model, st, field)

    elif wrt == "base-and-joints":
        n = 6 + model.n_joints

        def evaluate(delta):
            st = state.copy()
            st.base_pose = _apply_base_delta(state.base_pose, delta[:6])
            st.joints = state.joints + delta[6:]
            return link_distances(model, st, field, include_base=True)

    else:
        raise ValueError(f"unknown Jacobian variant: {wrt!r}")

    cols = []
    for j in range(n):
        delta = np.zeros(n)
        delta[j] = h
        cols.append((evaluate(delta) - evaluate(-delta)) / (2 * h))
    return np.stack(cols, axis=1)
