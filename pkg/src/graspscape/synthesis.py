"""Grasp synthesis policies and outcome classification.

Two policies map an initial gripper pose to a grasp configuration:

* baseline: push straight toward the closest surface point until contact,
  then close all digits under constant torque until motion settles;
* shape-informed: first align the digit links to equal offset distances
  from the object using a damped pseudoinverse of the distance Jacobian,
  then contract base and digits together toward the surface, and only then
  close under torque.

A grasp is viable when at least two distinct digits hold contact and the
grasp survives a short hold under gravity.  Outcomes are classified by the
contacted object features, force-closure class, and digit signature.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import Pose, surface_query
from .gripper import (GripperModel, GripperState, ObjectDistanceField,
                      _apply_base_delta, distance_jacobian, link_distances,
                      offset_distances, open_state)
from .metrics import GraspScore, force_closure
from .simulation import (Commands, ContactPoint, SimParams, SimState,
                         SimulationUnstable, make_state, step)


class OutOfDomainError(ValueError):
    """Initial pose violates the exploration-radius precondition."""


@dataclass(frozen=True)
class SynthesisConfig:
    policy: str = "shape"            # "baseline" | "shape"
    approach_force: float = 5.0      # N, constant push toward the surface
    closing_torque: float = 1.0      # N.m per digit
    settle_speed: float = 1e-3       # rad/s, joint speed defining settling
    settle_window: float = 0.05      # s below settle_speed to settle
    alignment_spread: float = 2e-3   # m, acceptable offset-distance spread
    alignment_target: float = 2e-3   # m, target offset distance
    closure_target: float = 1e-4     # m, target absolute distance
    max_iterations: int = 200        # per kinematic loop
    damping: float = 1e-4            # pseudoinverse regularization
    step_scale: float = 0.5
    max_halvings: int = 8
    approach_timeout: float = 2.0    # s
    settle_timeout: float = 3.0      # s
    hold_time: float = 0.2           # s, viability hold under gravity

    def __post_init__(self):
        for name in ("approach_force", "closing_torque", "settle_speed",
                     "settle_window", "alignment_spread", "alignment_target",
                     "closure_target", "damping", "step_scale",
                     "approach_timeout", "settle_timeout", "hold_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SynthesisConfig.{name} must be > 0")
        if not self.closure_target < self.alignment_target:
            raise ValueError("closure_target must be < alignment_target")
        if self.policy not in ("baseline", "shape"):
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass(frozen=True)
class GraspType:
    features: frozenset
    closure: str          # "force-closure" | "pinch"
    digits: frozenset

    def key(self, include_digits: bool = False):
        base = (tuple(sorted(self.features)), self.closure)
        return base + (tuple(sorted(self.digits)),) if include_digits else base


@dataclass
class GraspOutcome:
    viable: bool
    base_pose: Optional[Pose] = None
    joints: Optional[np.ndarray] = None
    contacts: list = field(default_factory=list)
    grasp_type: Optional[GraspType] = None
    scores: Optional[GraspScore] = None
    state: Optional[SimState] = None
    diagnostics: dict = field(default_factory=dict)


def _distance_field(scene) -> ObjectDistanceField:
    return ObjectDistanceField(scene.obj.shape, scene.object_pose)


def _object_com_pose(scene) -> Pose:
    return Pose(scene.object_pose.transform(scene.obj.com_offset),
                scene.object_pose.quaternion)


def base_object_distance(scene, base_pose: Pose) -> float:
    """Signed distance from the base reference point to the object surface."""
    return float(_distance_field(scene).sdf(base_pose.position[None, :])[0])


def _check_domain(scene, pose: Pose) -> None:
    d = base_object_distance(scene, pose)
    if d > scene.exploration_radius:
        raise OutOfDomainError(
            f"pose is {d:.3f} m from the object, beyond the exploration "
            f"radius {scene.exploration_radius:.3f} m")


def _formation_params(scene) -> SimParams:
    """Grasp formation happens with the object resting on its support."""
    return replace(scene.params, support_plane=scene.support_z)


def _formation_state(scene, gs: GripperState) -> SimState:
    return make_state(_object_com_pose(scene), gs)


def _gripper_contacts(contacts) -> list:
    return [c for c in contacts if c.link_index >= 0]


def _approach(state: SimState, scene, config: SynthesisConfig,
              direction: np.ndarray) -> Optional[SimState]:
    """Push the base along ``direction`` until the first contact."""
    cmd = Commands(digit_torques=np.zeros(len(scene.gripper.digits)),
                   base_mode="force",
                   base_force=config.approach_force * direction)
    params = _formation_params(scene)
    s = state
    n = int(round(config.approach_timeout / params.dt))
    for _ in range(n):
        try:
            s = step(s, params, scene.gripper, scene.obj, cmd)
        except SimulationUnstable:
            return None
        if _gripper_contacts(s.contacts):
            s.gripper.base_velocity = np.zeros(3)
            return s
    return None


def _close_until_settled(state: SimState, scene,
                         config: SynthesisConfig) -> Optional[SimState]:
    """Apply the closing torque with a frozen base until joints settle."""
    torques = np.full(len(scene.gripper.digits), config.closing_torque)
    cmd = Commands(digit_torques=torques, base_mode="frozen")
    params = _formation_params(scene)
    s = state
    n = int(round(config.settle_timeout / params.dt))
    needed = int(round(config.settle_window / params.dt))
    run = 0
    for _ in range(n):
        try:
            s = step(s, params, scene.gripper, scene.obj, cmd)
        except SimulationUnstable:
            return None
        speeds = np.abs(s.gripper.joint_velocities)
        obj_speed = np.linalg.norm(s.object_velocity)
        if speeds.max(initial=0.0) < config.settle_speed and obj_speed < config.settle_speed:
            run += 1
            if run >= needed:
                return s
        else:
            run = 0
    return s  # treat a slow creep at timeout as settled


def _digit_contact_set(contacts) -> frozenset:
    return frozenset(1 + (c.link_index - 1) // 2
                     for c in contacts if c.link_index > 0)


def _hold_under_gravity(state: SimState, scene,
                        config: SynthesisConfig) -> bool:
    torques = np.full(len(scene.gripper.digits), config.closing_torque)
    cmd = Commands(digit_torques=torques, base_mode="frozen")
    s = state.copy()
    s.gravity = np.array([0.0, 0.0, -9.81])
    rel0 = s.gripper.base_pose.inverse().transform(s.object_position)
    n = int(round(config.hold_time / scene.params.dt))
    for _ in range(n):
        try:
            s = step(s, scene.params, scene.gripper, scene.obj, cmd)
        except SimulationUnstable:
            return False
        rel = s.gripper.base_pose.inverse().transform(s.object_position)
        if np.linalg.norm(rel - rel0) >= 0.02:
            return False
    return len(_digit_contact_set(s.contacts)) >= 2


def classify(contacts, scene) -> GraspType:
    """Contacted feature set, closure class, and digit signature."""
    com = _object_com_pose(scene).position
    features = frozenset(scene.feature_at(np.asarray(c.position))
                         for c in contacts)
    mu = scene.obj.friction if scene.obj.friction is not None \
        else scene.params.friction
    closed = force_closure(list(contacts), com, scene.characteristic_length, mu)
    return GraspType(features, "force-closure" if closed else "pinch",
                     _digit_contact_set(contacts))


def _assess(state: Optional[SimState], scene, config: SynthesisConfig,
            diagnostics: dict) -> GraspOutcome:
    """Shared epilogue: settle under torque, test viability, classify."""
    if state is None:
        return GraspOutcome(False, diagnostics=diagnostics)
    settled = _close_until_settled(state, scene, config)
    if settled is None:
        diagnostics["failure"] = "unstable during closing"
        return GraspOutcome(False, diagnostics=diagnostics)
    contacts = _gripper_contacts(settled.contacts)
    digits = _digit_contact_set(contacts)
    viable = len(digits) >= 2 and _hold_under_gravity(settled, scene, config)
    outcome = GraspOutcome(viable, settled.gripper.base_pose,
                           settled.gripper.joints.copy(), contacts,
                           state=settled, diagnostics=diagnostics)
    if viable:
        outcome.grasp_type = classify(contacts, scene)
    else:
        outcome.diagnostics.setdefault(
            "failure", "fewer than 2 digits holding" if len(digits) < 2
            else "failed hold under gravity")
    return outcome


def synthesize_baseline(initial_pose: Pose, scene,
                        config: Optional[SynthesisConfig] = None) -> GraspOutcome:
    """Constant-force approach toward the closest surface point, then close."""
    config = config or scene.synthesis
    _check_domain(scene, initial_pose)
    gs = open_state(scene.gripper, initial_pose)
    q = surface_query(scene.obj.shape, scene.object_pose, initial_pose.position)
    direction = q.closest_point - initial_pose.position
    norm = np.linalg.norm(direction)
    if norm < 1e-9:
        direction = -q.normal
    else:
        direction = direction / norm
    state = _approach(_formation_state(scene, gs), scene, config, direction)
    diagnostics = {"policy": "baseline",
                   "approach_contact": state is not None}
    if state is None:
        diagnostics["failure"] = "no contact during approach"
    return _assess(state, scene, config, diagnostics)


def digit_alignment(gs: GripperState, scene,
                    config: Optional[SynthesisConfig] = None
                    ) -> Optional[GripperState]:
    """Equalize the digits' offset distances by joint-space descent.

    Returns the aligned state, or None when the iteration cap or joint
    limits prevent reaching the alignment target.
    """
    config = config or scene.synthesis
    model = scene.gripper
    field_ = _distance_field(scene)
    gs = gs.copy()
    for _ in range(config.max_iterations):
        d_hat = offset_distances(model, gs, field_)
        if d_hat.max() <= config.alignment_target:
            return gs
        J = distance_jacobian(model, gs, field_, wrt="joints")
        error = config.alignment_target - d_hat
        JJt = J @ J.T + config.damping * np.eye(len(error))
        delta = J.T @ np.linalg.solve(JJt, error)
        scale = config.step_scale
        best = None
        for _ in range(config.max_halvings):
            trial = model.clamp_joints(gs.joints + scale * delta)
            gt = gs.copy()
            gt.joints = trial
            trial_max = offset_distances(model, gt, field_).max()
            if trial_max < d_hat.max() - 1e-12:
                best = gt
                break
            scale *= 0.5
        if best is None:
            return None  # stalled against limits or a singular direction
        gs = best
    return None


def grasp_closure(gs: GripperState, scene,
                  config: Optional[SynthesisConfig] = None) -> GraspOutcome:
    """Contract base and digits toward the surface, then close under torque.

    The kinematic contraction drives every tracked distance (base plus all
    digit links) toward the closure target; when it converges or stalls,
    torque closing takes over to form physical contact.
    """
    config = config or scene.synthesis
    model = scene.gripper
    field_ = _distance_field(scene)
    gs = gs.copy()

    def residual(d):
        return float(np.linalg.norm(config.closure_target - d))

    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        dists = link_distances(model, gs, field_, include_base=True)
        if np.abs(dists - config.closure_target).max() <= config.closure_target:
            break
        J = distance_jacobian(model, gs, field_, wrt="base-and-joints")
        error = config.closure_target - dists
        JJt = J @ J.T + config.damping * np.eye(len(error))
        delta = J.T @ np.linalg.solve(JJt, error)
        r0 = residual(dists)
        scale = config.step_scale
        stepped = None
        # Transient penetration is fine mid-contraction: the buried rows
        # stay in the residual, so later iterations pull the links back to
        # the surface as the wrap forms.
        for _ in range(config.max_halvings):
            gt = gs.copy()
            gt.base_pose = _apply_base_delta(gs.base_pose, scale * delta[:6])
            gt.joints = model.clamp_joints(gs.joints + scale * delta[6:])
            trial = link_distances(model, gt, field_, include_base=True)
            if residual(trial) < r0 - 1e-12:
                stepped = gt
                break
            scale *= 0.5
        if stepped is None:
            break  # stalled: let torque closing finish the grasp
        digit_gap = np.abs(dists[1:] - config.closure_target).max()
        trial_gap = np.abs(trial[1:] - config.closure_target).max()
        gs = stepped
        if trial_gap <= config.alignment_target \
                and digit_gap - trial_gap < 1e-5:
            # Digit links are as close to the surface as the kinematics
            # allows; the base row may be unreachable (palm blocked by the
            # wrap).  Physical closing takes over.
            break
    else:
        return GraspOutcome(False, diagnostics={
            "policy": "shape", "failure": "closure iteration cap",
            "closure_iterations": iterations})
    # Hand-over sanity: torque closing assumes the links sit near the
    # surface.  A stalled loop that left links buried in the object would
    # only eject it through penalty forces, so reject it here.
    final = link_distances(model, gs, field_, include_base=True)
    if final[1:].min() < -model.digits[0].proximal.radius:
        return GraspOutcome(False, diagnostics={
            "policy": "shape", "failure": "closure stalled inside object",
            "closure_iterations": iterations})
    state = _formation_state(scene, gs)
    diagnostics = {"policy": "shape", "closure_iterations": iterations}
    return _assess(state, scene, config, diagnostics)


def synthesize_shape_informed(initial_pose: Pose, scene,
                              config: Optional[SynthesisConfig] = None
                              ) -> GraspOutcome:
    """Digit alignment followed by grasp closure."""
    config = config or scene.synthesis
    _check_domain(scene, initial_pose)
    gs = open_state(scene.gripper, initial_pose)
    aligned = digit_alignment(gs, scene, config)
    if aligned is None:
        return GraspOutcome(False, diagnostics={
            "policy": "shape", "failure": "alignment failed"})
    return grasp_closure(aligned, scene, config)


def synthesize(initial_pose: Pose, scene,
               config: Optional[SynthesisConfig] = None) -> GraspOutcome:
    config = config or scene.synthesis
    if config.policy == "baseline":
        return synthesize_baseline(initial_pose, scene, config)
    return synthesize_shape_informed(initial_pose, scene, config)
