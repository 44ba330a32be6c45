"""Grasp quality metrics: dynamic sensitivity metric and static baselines.

The dynamic metric probes a settled grasp with short acceleration rollouts
of the gripper base and measures how much of each probe the object picks
up; a perfectly rigid grasp transmits everything (score 1), a free object
nothing (score 0).  Static baselines: smallest grasp-matrix singular value,
contact-hull volume, and the largest-inscribed-ball wrench-space metric,
plus a friction-cone force-closure test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .gripper import GripperModel
from .simulation import (Commands, ContactPoint, ObjectModel,
                         ReferenceTrajectory, SimParams, SimState,
                         SimulationUnstable, execute_trajectory, step)


@dataclass
class SensitivityMatrix:
    """6x6 object pose-acceleration response per unit base pose-acceleration."""

    matrix: np.ndarray
    evaluation_time: float
    probe_magnitude: float
    window: float


@dataclass
class GraspScore:
    mu_s: float
    sigma_max_per_sample: list[float] = field(default_factory=list)
    mu_g: Optional[float] = None
    mu_f: Optional[float] = None
    mu_m: Optional[float] = None


DEFAULT_PROBE_MAGNITUDE = 0.5  # m/s^2 and rad/s^2
DEFAULT_PROBE_WINDOW = 0.01    # s (epsilon; rollout length is 2*epsilon)
DEFAULT_MU_S_SAMPLES = 8


def _mean_acceleration(state0: SimState, params: SimParams,
                       model: GripperModel, obj: ObjectModel,
                       accel: np.ndarray, window: float,
                       torques: np.ndarray) -> np.ndarray:
    """Mean object 6-acceleration over a short constant-base-accel rollout."""
    s = state0.copy()
    cmd = Commands(digit_torques=torques, base_mode="accel", base_accel=accel)
    n = max(1, int(round(2.0 * window / params.dt)))
    v0 = np.concatenate([s.object_velocity, s.object_angular_velocity])
    for _ in range(n):
        s = step(s, params, model, obj, cmd)
    v1 = np.concatenate([s.object_velocity, s.object_angular_velocity])
    return (v1 - v0) / (n * params.dt)


def sensitivity_matrix(state: SimState, params: SimParams,
                       model: GripperModel, obj: ObjectModel,
                       probe: float = DEFAULT_PROBE_MAGNITUDE,
                       window: float = DEFAULT_PROBE_WINDOW,
                       hold_torque: float = 0.0) -> SensitivityMatrix:
    """Probe the base along the six pose axes and collect object response.

    Each column is (mean object acceleration under probe - nominal mean) /
    probe magnitude, from independent rollouts of length ``2 * window``
    branching off the given snapshot.
    """
    torques = np.full(len(model.digits), hold_torque)
    nominal = _mean_acceleration(state, params, model, obj, np.zeros(6),
                                 window, torques)
    cols = []
    for j in range(6):
        accel = np.zeros(6)
        accel[j] = probe
        mean = _mean_acceleration(state, params, model, obj, accel, window,
                                  torques)
        cols.append((mean - nominal) / probe)
    return SensitivityMatrix(np.stack(cols, axis=1), state.time, probe, window)


def mu_s(state: SimState, traj: ReferenceTrajectory, params: SimParams,
         model: GripperModel, obj: ObjectModel,
         samples: int = DEFAULT_MU_S_SAMPLES,
         hold_torque: float = 1.0,
         probe: float = DEFAULT_PROBE_MAGNITUDE,
         window: float = DEFAULT_PROBE_WINDOW) -> GraspScore:
    """Dynamic grasp score: 1 minus the worst transmission defect singular
    value, sampled at equally spaced instants along the task trajectory.

    Any probe instability or loss of the grasp mid-trajectory scores 0.
    """
    sample_times = [traj.duration * k / samples for k in range(samples)]
    sigma_max: list[float] = []
    failed = False

    def observer(s: SimState, t: float) -> None:
        nonlocal failed
        if failed or not sample_times:
            return
        if t >= sample_times[0]:
            sample_times.pop(0)
            try:
                G = sensitivity_matrix(s, params, model, obj, probe, window,
                                       hold_torque).matrix
            except SimulationUnstable:
                failed = True
                return
            S = G - np.eye(6)
            sigma_max.append(float(np.linalg.svd(S, compute_uv=False)[0]))

    # Sample at t=0 before the base starts moving.
    sample_times.pop(0)
    try:
        G0 = sensitivity_matrix(state, params, model, obj, probe, window,
                                hold_torque).matrix
    except SimulationUnstable:
        return GraspScore(0.0)
    sigma_max.append(float(np.linalg.svd(G0 - np.eye(6), compute_uv=False)[0]))

    report = execute_trajectory(state, traj, hold_torque, params, model, obj,
                                observer=observer)
    if failed or not report.held:
        return GraspScore(0.0, sigma_max)
    value = min(1.0, max(0.0, 1.0 - max(sigma_max)))
    return GraspScore(value, sigma_max)


# ---------------------------------------------------------------------------
# Static metrics
# ---------------------------------------------------------------------------

def _skew(r: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -r[2], r[1]],
                     [r[2], 0.0, -r[0]],
                     [-r[1], r[0], 0.0]])


def grasp_matrix(contacts: list[ContactPoint], com: np.ndarray,
                 characteristic_length: float) -> np.ndarray:
    """6 x 3n map from stacked contact forces to the object wrench.

    Torque rows are divided by the characteristic length (object bounding
    radius) so both halves are commensurate.
    """
    if not contacts:
        raise ValueError("grasp matrix needs at least one contact")
    cols = []
    for c in contacts:
        r = np.asarray(c.position) - np.asarray(com)
        cols.append(np.vstack([np.eye(3), _skew(r) / characteristic_length]))
    return np.concatenate(cols, axis=1)


def mu_g(contacts: list[ContactPoint], com: np.ndarray,
         characteristic_length: float) -> float:
    """Smallest singular value of the scaled grasp matrix; 0 if rank < 6."""
    if not contacts:
        return 0.0
    G = grasp_matrix(contacts, com, characteristic_length)
    sv = np.linalg.svd(G, compute_uv=False)
    if len(sv) < 6 or sv[5] < 1e-8:
        return 0.0
    return float(sv[5])


def _cone_generators(normal: np.ndarray, mu: float, edges: int) -> np.ndarray:
    """Unit force directions spanning the friction cone of an inward normal."""
    n = -np.asarray(normal, dtype=float)  # force pushes into the object
    if mu <= 0.0:
        return n[None, :]
    a = np.array([1.0, 0.0, 0.0])
    if abs(n @ a) > 0.9:
        a = np.array([0.0, 1.0, 0.0])
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    angles = 2.0 * np.pi * np.arange(edges) / edges
    dirs = (n[None, :] + mu * (np.cos(angles)[:, None] * t1[None, :]
                               + np.sin(angles)[:, None] * t2[None, :]))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


# Effective contact patch radius (m) for torsional friction.  The penalty
# contacts are finite-stiffness patches, not ideal points, so each frictional
# contact can also resist a small moment about its normal.
CONTACT_PATCH_RADIUS = 5e-3


def contact_wrenches(contacts: list[ContactPoint], com: np.ndarray,
                     characteristic_length: float, mu: float,
                     edges: int = 8,
                     patch_radius: float = CONTACT_PATCH_RADIUS) -> np.ndarray:
    """Unit 6-D wrenches of every friction-cone generator of every contact.

    Frictional contacts additionally contribute a pair of torsional
    generators (normal force plus or minus the patch moment about the
    normal), the soft-contact counterpart of the tangential cone.
    """
    rows = []
    for c in contacts:
        r = (np.asarray(c.position) - np.asarray(com)) / characteristic_length
        n_force = -np.asarray(c.normal, dtype=float)
        gens = [(d, np.cross(r, d)) for d in _cone_generators(c.normal, mu, edges)]
        if mu > 0.0:
            mt = mu * patch_radius / characteristic_length
            base_torque = np.cross(r, n_force)
            gens.append((n_force, base_torque + mt * n_force))
            gens.append((n_force, base_torque - mt * n_force))
        for d, torque in gens:
            w = np.concatenate([d, torque])
            norm = np.linalg.norm(w)
            if norm > 1e-12:
                rows.append(w / norm)
    return np.asarray(rows)


def force_closure(contacts: list[ContactPoint], com: np.ndarray,
                  characteristic_length: float, mu: float,
                  edges: int = 8, margin: float = 1e-9) -> bool:
    """True iff the origin lies strictly inside the convex hull of the unit
    cone-generator wrenches (forces applicable in every wrench direction)."""
    if len(contacts) < 2:
        return False
    W = contact_wrenches(contacts, com, characteristic_length, mu, edges)
    if len(W) < 7:
        return False
    try:
        hull = ConvexHull(W)
    except QhullError:
        return False  # wrenches span a degenerate subspace
    # Hull facets: A x + b <= 0 inside; origin strictly inside iff b < -margin.
    return bool(np.all(hull.equations[:, -1] < -margin))


def force_closure_bruteforce(contacts: list[ContactPoint], com: np.ndarray,
                             characteristic_length: float, mu: float,
                             edges: int = 8, directions: int = 10_000,
                             seed: int = 0, margin: float = 1e-3) -> bool:
    """Independent oracle: positive span check over random wrench directions.

    Interior of the hull requires the generators to span all of wrench space
    (rank 6) and to have, for every probed unit direction, some generator
    with a clearly positive component along it.
    """
    if len(contacts) < 2:
        return False
    W = contact_wrenches(contacts, com, characteristic_length, mu, edges)
    if np.linalg.matrix_rank(W, tol=1e-8) < 6:
        return False
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(directions, 6))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    return bool(np.all((W @ U.T).max(axis=0) > margin))


def mu_f(contacts: list[ContactPoint], characteristic_length: float) -> float:
    """Spanned contact volume in m^3.

    n >= 4: convex hull volume; n = 3: triangle area times the
    characteristic length; n = 2: segment length times its square;
    n < 2: zero.
    """
    pts = np.asarray([c.position for c in contacts], dtype=float)
    n = len(pts)
    if n < 2:
        return 0.0
    if n == 2:
        return float(np.linalg.norm(pts[1] - pts[0])) * characteristic_length ** 2
    if n == 3:
        area = 0.5 * np.linalg.norm(np.cross(pts[1] - pts[0], pts[2] - pts[0]))
        return float(area) * characteristic_length
    try:
        return float(ConvexHull(pts).volume)
    except QhullError:
        # Coplanar contact set: fall back to the planar area rule.
        area = _planar_area(pts)
        return float(area) * characteristic_length


def _planar_area(pts: np.ndarray) -> float:
    centered = pts - pts.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    plane = centered @ vt[:2].T
    if len(plane) < 3:
        return 0.0
    try:
        return float(ConvexHull(plane).volume)  # 2-D hull volume = area
    except QhullError:
        return 0.0


def mu_m(contacts: list[ContactPoint], com: np.ndarray,
         characteristic_length: float, mu: float, edges: int = 8) -> float:
    """Largest-inscribed-ball radius of the unit-wrench hull about the origin;
    zero when the grasp is not force closure."""
    if not force_closure(contacts, com, characteristic_length, mu, edges):
        return 0.0
    W = contact_wrenches(contacts, com, characteristic_length, mu, edges)
    hull = ConvexHull(W)
    return float(np.min(-hull.equations[:, -1]))


# ---------------------------------------------------------------------------
# Min-torque resilience search
# ---------------------------------------------------------------------------

class BracketError(ValueError):
    """The bisection bracket does not straddle the hold/fail boundary."""


def min_torque_search(state: SimState, traj: ReferenceTrajectory,
                      params: SimParams, model: GripperModel, obj: ObjectModel,
                      tau_lo: float = 0.0, tau_hi: float = 4.0,
                      tol: float = 0.01) -> float:
    """Bisect the smallest holding torque along ``traj`` to width ``tol``."""
    hi_report = execute_trajectory(state, traj, tau_hi, params, model, obj)
    if not hi_report.held:
        raise BracketError(f"grasp fails even at tau_hi={tau_hi} N.m "
                           f"({hi_report.diagnostic})")
    lo_report = execute_trajectory(state, traj, tau_lo, params, model, obj)
    if lo_report.held:
        raise BracketError(f"tau_min <= tau_lo: grasp already holds at "
                           f"tau_lo={tau_lo} N.m")
    lo, hi = tau_lo, tau_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if execute_trajectory(state, traj, mid, params, model, obj).held:
            hi = mid
        else:
            lo = mid
    return hi
