"""Command-line driver.

Subcommands mirror the library: one-shot grasp evaluation, behavioral map
sweeps, policy comparison, torque-resilience tables, and metric-driven
search.  All delimited output goes to files under ``--out`` (or stdout for
single-result commands); progress prose goes to stderr.  Every output
carries a provenance line so results are attributable to (config, seed,
code version).

Exit codes for ``grasp``: 0 viable, 2 non-viable, 1 error.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .catalog import Scene, SceneError, parse_scene
from .geometry import Pose
from .mapping import (compare_policies, manifold_summary_text, map_to_csv,
                      mu_s_pgm, sweep, tangent_aligned_attitude,
                      _scene_fingerprint)
from .metrics import BracketError, min_torque_search, mu_f, mu_g, mu_m, mu_s
from .optimizer import (local_search, torque_sweep_csv,
                        torque_sweep_experiment, trace_to_csv)
from .synthesis import OutOfDomainError, synthesize

_METRIC_NAMES = {"mu-s": "mu_s", "mu-g": "mu_g", "mu-f": "mu_f",
                 "mu-m": "mu_m"}


def _info(msg: str) -> None:
    click.echo(msg, err=True)


def _default_jobs() -> int:
    env = os.environ.get("GRASPSCAPE_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise click.ClickException(
                f"GRASPSCAPE_THREADS must be an integer, got {env!r}")
    return 1


def _load_scene(path: str, dt, mu_friction, euler_standard, seed) -> Scene:
    try:
        scene = parse_scene(path)
    except (SceneError, OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"scene config: {exc}")
    params = scene.params
    if dt is not None:
        params = replace(params, dt=dt)
    if mu_friction is not None:
        params = replace(params, friction=mu_friction)
    if euler_standard:
        params = replace(params, paper_gyroscopic=False)
    scene.params = params
    if seed is not None:
        scene.seed = seed
    try:
        params.check_stability(scene.obj.mass)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    return scene


def _provenance(scene: Scene) -> str:
    return (f"# scene={_scene_fingerprint(scene)} seed={scene.seed} "
            f"version={__version__}")


def _write(out_dir: Path, name: str, payload) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    if isinstance(payload, bytes):
        path.write_bytes(payload)
    else:
        path.write_text(payload)
    return path


scene_option = click.option("--scene", "scene_path", required=True,
                            type=click.Path(dir_okay=False),
                            help="Scene config (JSON).")
policy_option = click.option("--policy", default=None,
                             type=click.Choice(["baseline", "shape"]),
                             help="Synthesis policy (default: scene's).")
metric_option = click.option("--metric", "metric_flag", default="mu-s",
                             type=click.Choice(sorted(_METRIC_NAMES)),
                             help="Quality metric.")
seed_option = click.option("--seed", type=int, default=None,
                           help="Override the scene seed.")
out_option = click.option("--out", "out_dir", default="out",
                          type=click.Path(file_okay=False),
                          help="Output directory.")
sim_options = [
    click.option("--dt", type=float, default=None,
                 help="Override the simulation timestep [s]."),
    click.option("--mu-friction", type=float, default=None,
                 help="Override the contact friction coefficient."),
    click.option("--euler-standard", is_flag=True,
                 help="Use the standard gyroscopic term instead of the "
                      "doubled form."),
]
figures_option = click.option("--figures", is_flag=True,
                              help="Also render matplotlib figures as PNG.")


def _with(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn
    return wrap


@click.group()
@click.version_option(__version__)
def main():
    """Grasp synthesis, scoring, and behavioral-map exploration."""


@main.command()
@scene_option
@policy_option
@metric_option
@seed_option
@_with(sim_options)
@click.option("--pose-cm", nargs=3, type=float, required=True,
              help="Gripper base position [cm], tangent-aligned attitude.")
def grasp(scene_path, policy, metric_flag, seed, dt, mu_friction,
          euler_standard, pose_cm):
    """Run one synthesis at one pose and report the outcome as JSON."""
    scene = _load_scene(scene_path, dt, mu_friction, euler_standard, seed)
    policy = policy or scene.synthesis.policy
    position = np.asarray(pose_cm, dtype=float) * 0.01
    quat = tangent_aligned_attitude(scene.obj.shape, scene.object_pose,
                                    position)
    try:
        out = synthesize(Pose(position, quat), scene,
                         replace(scene.synthesis, policy=policy))
    except OutOfDomainError as exc:
        raise click.ClickException(str(exc))
    doc = {
        "provenance": {"scene": _scene_fingerprint(scene),
                       "seed": scene.seed, "version": __version__},
        "policy": policy,
        "viable": out.viable,
        "n_contacts": len(out.contacts),
        "diagnostics": out.diagnostics,
    }
    if out.viable:
        doc["grasp_type"] = {"features": sorted(out.grasp_type.features),
                             "closure": out.grasp_type.closure}
        com = out.state.object_position
        rho = scene.characteristic_length
        friction = scene.obj.friction if scene.obj.friction is not None \
            else scene.params.friction
        scores = {"mu_g": mu_g(out.contacts, com, rho),
                  "mu_f": mu_f(out.contacts, rho),
                  "mu_m": mu_m(out.contacts, com, rho, friction)}
        traj = scene.trajectory_for(out.state.gripper.base_pose)
        scores["mu_s"] = mu_s(out.state, traj, scene.params, scene.gripper,
                              scene.obj, samples=scene.metric.samples,
                              hold_torque=scene.synthesis.closing_torque,
                              probe=scene.metric.probe,
                              window=scene.metric.window).mu_s
        doc["scores"] = {k: round(v, 9) for k, v in scores.items()}
    click.echo(json.dumps(doc, sort_keys=True))
    sys.exit(0 if out.viable else 2)


@main.command("map")
@scene_option
@policy_option
@seed_option
@out_option
@figures_option
@_with(sim_options)
@click.option("--jobs", type=int, default=None,
              help="Parallel workers (default: GRASPSCAPE_THREADS or 1).")
def cmd_map(scene_path, policy, seed, out_dir, figures, dt, mu_friction,
            euler_standard, jobs):
    """Sweep the pose grid and write map CSV, manifold JSON, and PGM."""
    scene = _load_scene(scene_path, dt, mu_friction, euler_standard, seed)
    jobs = jobs if jobs is not None else _default_jobs()
    policy = policy or scene.synthesis.policy
    _info(f"sweeping {scene.grid.nx}x{scene.grid.ny} grid with the "
          f"{policy} policy on {jobs} worker(s)")
    bmap = sweep(scene, policy=policy, jobs=jobs)
    out = Path(out_dir)
    paths = [_write(out, "map.csv", map_to_csv(bmap)),
             _write(out, "manifolds.json", manifold_summary_text(bmap)),
             _write(out, "mu_s.pgm", mu_s_pgm(bmap))]
    if figures:
        from .report import render_map_figure
        fig = out / "map.png"
        render_map_figure(bmap, str(fig))
        paths.append(fig)
    _info(f"{len(bmap.viable_cells)} viable cells, "
          f"{len(bmap.manifolds)} manifolds")
    click.echo(json.dumps({"outputs": [str(p) for p in paths],
                           "viable_cells": len(bmap.viable_cells),
                           "manifolds": len(bmap.manifolds)}, sort_keys=True))


def _compare_csv(report, scene: Scene) -> str:
    lines = [_provenance(scene),
             "type_features,type_closure,v_c_cm3,v_s_cm3,containment,"
             "best_mu_c,best_mu_s,volume_increase"]
    for key, t in report.per_type.items():
        inc = (t.v_s - t.v_c) / t.v_c if t.v_c > 0 else 0.0
        lines.append(",".join([
            "+".join(key[0]), key[1], f"{t.v_c:.9g}", f"{t.v_s:.9g}",
            str(int(t.containment)), f"{t.best_mu_c:.9g}",
            f"{t.best_mu_s:.9g}", f"{inc:.9g}"]))
    lines.append(f"# mean_volume_increase={report.mean_volume_increase:.9g}")
    return "\n".join(lines) + "\n"


@main.command()
@scene_option
@seed_option
@out_option
@figures_option
@_with(sim_options)
@click.option("--jobs", type=int, default=None)
def compare(scene_path, seed, out_dir, figures, dt, mu_friction,
            euler_standard, jobs):
    """Sweep both policies on the same grid and compare their manifolds."""
    scene = _load_scene(scene_path, dt, mu_friction, euler_standard, seed)
    jobs = jobs if jobs is not None else _default_jobs()
    _info("sweeping the baseline policy")
    map_c = sweep(scene, policy="baseline", jobs=jobs)
    _info("sweeping the shape-informed policy")
    map_s = sweep(scene, policy="shape", jobs=jobs)
    report = compare_policies(map_c, map_s)
    out = Path(out_dir)
    paths = [_write(out, "compare.csv", _compare_csv(report, scene))]
    if figures:
        from .report import render_compare_figure
        fig = out / "compare.png"
        render_compare_figure(report, str(fig))
        paths.append(fig)
    click.echo(json.dumps({
        "outputs": [str(p) for p in paths],
        "shared_types": len(report.per_type),
        "all_contained": report.all_contained,
        "mean_volume_increase": report.mean_volume_increase}, sort_keys=True))


@main.command()
@scene_option
@policy_option
@seed_option
@out_option
@figures_option
@_with(sim_options)
@click.option("--budget", type=int, default=40,
              help="Objective evaluations per metric search.")
@click.option("--tau-hi", type=float, default=4.0,
              help="Upper bisection bracket [N.m].")
def resilience(scene_path, policy, seed, out_dir, figures, dt, mu_friction,
               euler_standard, budget, tau_hi):
    """Minimum holding torque of the best grasp under each metric."""
    scene = _load_scene(scene_path, dt, mu_friction, euler_standard, seed)
    policy = policy or scene.synthesis.policy
    rows = []
    for metric in ("mu_s", "mu_g", "mu_f", "mu_m"):
        _info(f"searching the best {metric} grasp")
        trace = local_search(scene, policy=policy, metric=metric,
                             budget=budget, seed=scene.seed)
        out = trace.best_outcome
        if out is None or not out.viable:
            rows.append((metric, trace.best_value, "", float("nan")))
            continue
        traj = scene.trajectory_for(out.state.gripper.base_pose)
        try:
            tau = min_torque_search(out.state, traj, scene.params,
                                    scene.gripper, scene.obj, tau_hi=tau_hi)
        except BracketError as exc:
            _info(f"{metric}: {exc}")
            tau = float("nan")
        rows.append((metric, trace.best_value,
                     "+".join(sorted(out.grasp_type.features))
                     + f"|{out.grasp_type.closure}", tau))
    lines = [_provenance(scene), "metric,best_value,grasp_type,tau_min"]
    for metric, val, key, tau in rows:
        lines.append(f"{metric},{val:.9g},{key},{tau:.9g}")
    paths = [_write(Path(out_dir), "resilience.csv",
                    "\n".join(lines) + "\n")]
    click.echo(json.dumps({"outputs": [str(p) for p in paths],
                           "tau_min": {m: t for m, _, _, t in rows}},
                          sort_keys=True))


@main.command()
@scene_option
@policy_option
@metric_option
@seed_option
@out_option
@figures_option
@_with(sim_options)
@click.option("--budget", type=int, default=100)
@click.option("--sigma", type=float, default=0.02,
              help="Gaussian step size [m].")
@click.option("--torque-sweep", "torque_sweep", default=None,
              help="Comma-separated tau values: run the torque-sweep "
                   "experiment instead of a single search.")
def optimize(scene_path, policy, metric_flag, seed, out_dir, figures, dt,
             mu_friction, euler_standard, budget, sigma, torque_sweep):
    """Hill-climb the metric over the pose slice (or sweep torque caps)."""
    scene = _load_scene(scene_path, dt, mu_friction, euler_standard, seed)
    policy = policy or scene.synthesis.policy
    metric = _METRIC_NAMES[metric_flag]
    out = Path(out_dir)
    if torque_sweep is not None:
        try:
            taus = [float(t) for t in torque_sweep.split(",") if t.strip()]
        except ValueError:
            raise click.UsageError("--torque-sweep wants comma-separated "
                                   "numbers")
        rows = torque_sweep_experiment(scene, metric, taus, policy=policy,
                                       budget=budget, step_sigma=sigma,
                                       seed=scene.seed)
        payload = _provenance(scene) + "\n" + torque_sweep_csv(rows)
        paths = [_write(out, "torque_sweep.csv", payload)]
        if figures:
            from .report import render_torque_curve
            fig = out / "torque_sweep.png"
            render_torque_curve(rows, str(fig))
            paths.append(fig)
        click.echo(json.dumps({
            "outputs": [str(p) for p in paths],
            "types": {f"{r.tau:g}": list(r.grasp_type) if r.grasp_type
                      else None for r in rows}}, sort_keys=True, default=str))
        return
    trace = local_search(scene, policy=policy, metric=metric, budget=budget,
                         step_sigma=sigma, seed=scene.seed)
    payload = _provenance(scene) + "\n" + trace_to_csv(trace)
    paths = [_write(out, "trace.csv", payload)]
    if figures:
        from .report import render_trace_figure
        fig = out / "trace.png"
        render_trace_figure(trace, None, str(fig))
        paths.append(fig)
    click.echo(json.dumps({
        "outputs": [str(p) for p in paths],
        "best_value": trace.best_value,
        "best_position": None if trace.best_position is None
        else [round(v, 9) for v in trace.best_position]}, sort_keys=True))


if __name__ == "__main__":
    main()
