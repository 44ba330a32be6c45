"""Metric-driven search over the pose slice.

A deliberately simple searcher: Gaussian-perturbation hill climbing with
random restarts, seeded for reproducibility.  It produces the optimization
trajectory overlays for the behavioral maps and drives the torque-sweep
experiment on the plate.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .geometry import Pose, surface_query
from .catalog import Scene
from .mapping import tangent_aligned_attitude
from .metrics import mu_f, mu_g, mu_m, mu_s
from .synthesis import GraspOutcome, synthesize

RESTART_PATIENCE = 20
METRICS = ("mu_s", "mu_g", "mu_f", "mu_m")


@dataclass
class TracePoint:
    position: np.ndarray
    value: float
    event: str  # step | restart-jump | converged


@dataclass
class SearchTrace:
    points: list[TracePoint] = field(default_factory=list)
    best_position: Optional[np.ndarray] = None
    best_value: float = -np.inf
    best_outcome: Optional[GraspOutcome] = None
    evaluations: int = 0


def _pose_at(scene: Scene, position: np.ndarray) -> Pose:
    quat = tangent_aligned_attitude(scene.obj.shape, scene.object_pose,
                                    position)
    return Pose(position, quat)


def _in_domain(scene: Scene, position: np.ndarray) -> bool:
    q = surface_query(scene.obj.shape, scene.object_pose, position)
    return 0.0 < q.distance <= scene.exploration_radius


def grasp_objective(scene: Scene, policy: str, metric: str,
                    hold_torque: Optional[float] = None) -> Callable:
    """Objective mapping a slice position to (score, outcome).

    Non-viable grasps and failed syntheses score 0, which is what makes
    non-viable regions flat for the searcher.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of "
                         f"{METRICS}")
    tau = hold_torque if hold_torque is not None \
        else scene.synthesis.closing_torque

    def evaluate(position: np.ndarray):
        pose = _pose_at(scene, position)
        cfg = replace(scene.synthesis, policy=policy, closing_torque=tau)
        try:
            out = synthesize(pose, scene, cfg)
        except Exception:
            return 0.0, None
        if not out.viable:
            return 0.0, out
        com = out.state.object_position
        rho = scene.characteristic_length
        friction = scene.obj.friction if scene.obj.friction is not None \
            else scene.params.friction
        try:
            if metric == "mu_g":
                value = mu_g(out.contacts, com, rho)
            elif metric == "mu_f":
                value = mu_f(out.contacts, rho)
            elif metric == "mu_m":
                value = mu_m(out.contacts, com, rho, friction)
            else:
                traj = scene.trajectory_for(out.state.gripper.base_pose)
                value = mu_s(out.state, traj, scene.params, scene.gripper,
                             scene.obj, samples=scene.metric.samples,
                             hold_torque=tau, probe=scene.metric.probe,
                             window=scene.metric.window).mu_s
        except Exception:
            return 0.0, out
        return float(value), out

    return evaluate


def _random_in_domain(scene: Scene, rng: np.random.Generator,
                      z: float) -> np.ndarray:
    grid = scene.grid
    cx, cy = scene.object_pose.position[:2]
    for _ in range(1000):
        p = np.array([rng.uniform(*grid.x_range) + cx,
                      rng.uniform(*grid.y_range) + cy, z])
        if _in_domain(scene, p):
            return p
    raise RuntimeError("no in-domain position found in the grid ranges")


def local_search(scene: Scene, policy: str = "shape", metric: str = "mu_s",
                 start: Optional[np.ndarray] = None, budget: int = 100,
                 step_sigma: float = 0.02, seed: int = 0,
                 objective: Optional[Callable] = None,
                 patience: int = RESTART_PATIENCE) -> SearchTrace:
    """Hill climbing on the slice with restart jumps.

    Accepts a move when it strictly improves on the current value; after
    ``patience`` non-improving evaluations it jumps to a random in-domain
    position.  An exact value plateau is tagged ``converged`` once before
    the jump.  Identical seeds give identical traces.
    """
    rng = np.random.default_rng(seed)
    f = objective or grasp_objective(scene, policy, metric)
    z = scene.object_pose.position[2] + scene.grid.height

    if start is None:
        pos = _random_in_domain(scene, rng, z)
    else:
        pos = np.asarray(start, dtype=float).copy()
        if not _in_domain(scene, pos):
            raise ValueError("start position is outside the search domain")

    trace = SearchTrace()

    def record(p, v, event, outcome=None):
        trace.points.append(TracePoint(p.copy(), v, event))
        if v > trace.best_value:
            trace.best_value = v
            trace.best_position = p.copy()
            trace.best_outcome = outcome

    value, out = f(pos)
    trace.evaluations += 1
    record(pos, value, "step", out)
    stale = 0
    plateau = 0

    while trace.evaluations < budget:
        cand = pos.copy()
        cand[:2] += rng.normal(0.0, step_sigma, size=2)
        if not _in_domain(scene, cand):
            cand_value, cand_out = 0.0, None
        else:
            cand_value, cand_out = f(cand)
        trace.evaluations += 1
        if cand_value > value:
            pos, value = cand, cand_value
            record(cand, cand_value, "step", cand_out)
            stale = 0
            plateau = 0
            continue
        record(cand, cand_value, "step", cand_out)
        stale += 1
        if cand_value == value:
            plateau += 1
            if plateau == 2:
                trace.points.append(TracePoint(pos.copy(), value, "converged"))
        if stale >= patience and trace.evaluations < budget:
            pos = _random_in_domain(scene, rng, z)
            value, out = f(pos)
            trace.evaluations += 1
            record(pos, value, "restart-jump", out)
            stale = 0
            plateau = 0
    return trace


def trace_to_csv(trace: SearchTrace) -> str:
    """Trace table: step,x,y,z,value,event."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "x", "y", "z", "value", "event"])
    for i, p in enumerate(trace.points):
        writer.writerow([i, f"{p.position[0]:.9g}", f"{p.position[1]:.9g}",
                         f"{p.position[2]:.9g}", f"{p.value:.9g}", p.event])
    return buf.getvalue()


@dataclass
class TorqueSweepRow:
    tau: float
    metric: str
    best_value: float
    best_position: Optional[np.ndarray]
    grasp_type: Optional[tuple]
    mu_s: float
    mu_g: float


def torque_sweep_experiment(scene: Scene, metric: str, taus,
                            policy: str = "shape", budget: int = 40,
                            step_sigma: float = 0.02,
                            seed: int = 0) -> list[TorqueSweepRow]:
    """Best grasp per maximum joint torque, judged by one metric.

    The closing and holding torque are both capped at tau; the static
    metrics do not see the cap directly, only through the contacts the
    weaker closing produces.
    """
    rows = []
    for tau in taus:
        objective = grasp_objective(scene, policy, metric, hold_torque=tau)
        trace = local_search(scene, policy, metric, budget=budget,
                             step_sigma=step_sigma, seed=seed,
                             objective=objective)
        out = trace.best_outcome
        key = None
        score_s = score_g = 0.0
        if out is not None and out.viable:
            key = out.grasp_type.key()
            com = out.state.object_position
            rho = scene.characteristic_length
            score_g = mu_g(out.contacts, com, rho)
            if metric == "mu_s":
                score_s = trace.best_value
            else:
                traj = scene.trajectory_for(out.state.gripper.base_pose)
                score_s = mu_s(out.state, traj, scene.params, scene.gripper,
                               scene.obj, samples=scene.metric.samples,
                               hold_torque=tau).mu_s
        rows.append(TorqueSweepRow(float(tau), metric,
                                   max(trace.best_value, 0.0),
                                   trace.best_position, key, score_s, score_g))
    return rows


def torque_sweep_csv(rows: list[TorqueSweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tau", "metric", "best_value", "x", "y", "z",
                     "grasp_type", "mu_s", "mu_g"])
    for r in rows:
        pos = r.best_position if r.best_position is not None \
            else np.full(3, np.nan)
        writer.writerow([f"{r.tau:.9g}", r.metric, f"{r.best_value:.9g}",
                         f"{pos[0]:.9g}", f"{pos[1]:.9g}", f"{pos[2]:.9g}",
                         "|".join(map(str, r.grasp_type)) if r.grasp_type
                         else "", f"{r.mu_s:.9g}", f"{r.mu_g:.9g}"])
    return buf.getvalue()
