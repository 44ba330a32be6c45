"""Behavioral maps over the relative pose space.

A map is built by sweeping a horizontal slice of candidate base positions
around the object, running a synthesis policy at every in-range cell, and
scoring the resulting grasps.  Viable cells are then grouped into
"behavioral manifolds": face-connected regions whose cells produce the same
grasp type.  The module also provides level-set extraction, per-manifold
extrema, and the policy comparison operators (volumes, containment).

The sweep samples a planar slice; the two free dimensions are the base x and
y offsets from the object, the attitude is resolved per cell by the tangent
rule (or held fixed).  Reported volumes treat the slice as a slab of
configurable thickness, so they are in cm^3 like a 3-D sweep would be.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace, asdict, is_dataclass
from typing import Optional

import numpy as np

from . import __version__
from .geometry import Pose, Shape, quat_from_mat, surface_query
from .catalog import GridConfig, Scene
from .metrics import mu_f, mu_g, mu_m, mu_s
from .synthesis import GraspOutcome, OutOfDomainError, synthesize


class MappingError(ValueError):
    pass


_WORLD_UP = np.array([0.0, 0.0, 1.0])
_LEVELS = tuple(round(0.1 * k, 1) for k in range(1, 10))


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoseGrid:
    """Sampled slice of the pose space, centered on the object.

    ``xs``/``ys`` are world coordinates of the cell centers; ``z`` is the
    slice height.  ``cell_volume`` is dx * dy * thickness (m^3).
    """

    nx: int
    ny: int
    xs: np.ndarray
    ys: np.ndarray
    z: float
    dx: float
    dy: float
    thickness: float
    attitude: str
    exploration_radius: float
    fixed_quaternion: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_config(cls, cfg: GridConfig, center: np.ndarray) -> "PoseGrid":
        if cfg.nx < 2 or cfg.ny < 2:
            raise MappingError("grid resolution must be at least 2 per axis")
        xs = np.linspace(cfg.x_range[0], cfg.x_range[1], cfg.nx) + center[0]
        ys = np.linspace(cfg.y_range[0], cfg.y_range[1], cfg.ny) + center[1]
        dx = float(xs[1] - xs[0])
        dy = float(ys[1] - ys[0])
        thickness = cfg.cell_thickness if cfg.cell_thickness is not None else dx
        return cls(cfg.nx, cfg.ny, xs, ys, float(center[2] + cfg.height),
                   dx, dy, float(thickness), cfg.attitude,
                   cfg.exploration_radius)

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.thickness

    def position(self, ix: int, iy: int) -> np.ndarray:
        return np.array([self.xs[ix], self.ys[iy], self.z])

    def indices(self):
        for iy in range(self.ny):
            for ix in range(self.nx):
                yield ix, iy


def tangent_aligned_attitude(shape: Shape, shape_pose: Pose,
                             position: np.ndarray) -> np.ndarray:
    """Palm-facing orientation at ``position``: the approach axis points at
    the closest surface point and the dual-digit side is rolled upward.

    Returns a quaternion whose base +z (palm normal) equals minus the
    object's outward surface normal; the roll about that axis puts base +x
    (the dual-digit mounts) along the projection of world up.  Near-vertical
    normals fall back to world +x for the roll reference.
    """
    q = surface_query(shape, shape_pose, np.asarray(position, dtype=float))
    z_axis = -q.normal
    x_axis = _WORLD_UP - (_WORLD_UP @ z_axis) * z_axis
    nrm = np.linalg.norm(x_axis)
    if nrm < 1e-6:
        ref = np.array([1.0, 0.0, 0.0])
        x_axis = ref - (ref @ z_axis) * z_axis
        nrm = np.linalg.norm(x_axis)
    x_axis = x_axis / nrm
    y_axis = np.cross(z_axis, x_axis)
    return quat_from_mat(np.column_stack([x_axis, y_axis, z_axis]))


def cell_pose(grid: PoseGrid, scene: Scene, ix: int, iy: int) -> Pose:
    pos = grid.position(ix, iy)
    if grid.attitude == "tangent":
        quat = tangent_aligned_attitude(scene.obj.shape, scene.object_pose, pos)
    else:
        quat = grid.fixed_quaternion
    return Pose(pos, quat)


# ---------------------------------------------------------------------------
# Cells and manifolds
# ---------------------------------------------------------------------------

@dataclass
class MapCell:
    index: tuple[int, int, int]
    position: np.ndarray
    status: str                       # out-of-domain | non-viable | viable
    distance: float = float("nan")    # base-to-surface distance at the start
    pose: Optional[Pose] = None
    outcome: Optional[GraspOutcome] = None
    type_key: Optional[tuple] = None
    mu_s: float = 0.0
    mu_g: float = 0.0
    mu_f: float = 0.0
    mu_m: float = 0.0
    n_contacts: int = 0
    manifold_id: int = -1

    @property
    def viable(self) -> bool:
        return self.status == "viable"


@dataclass
class BehavioralManifold:
    manifold_id: int
    type_key: tuple
    members: tuple[tuple[int, int, int], ...]
    volume_cm3: float
    mu_s_min: float
    mu_s_max: float
    mu_s_mean: float
    maxima: tuple[tuple[int, int, int], ...]
    boundary: tuple[tuple[int, int, int], ...]


@dataclass
class BehavioralMap:
    grid: PoseGrid
    cells: dict[tuple[int, int, int], MapCell]
    manifolds: list[BehavioralManifold]
    provenance: dict

    def cell(self, ix: int, iy: int) -> MapCell:
        return self.cells[(ix, iy, 0)]

    @property
    def viable_cells(self) -> list[MapCell]:
        return [c for c in self.cells.values() if c.viable]

    def type_ids(self) -> dict[tuple, int]:
        """Deterministic small integers for the grasp types present."""
        keys = sorted({c.type_key for c in self.viable_cells})
        return {k: i for i, k in enumerate(keys)}


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

def evaluate_cell(scene: Scene, pose: Pose, policy: str,
                  include_digits: bool = False) -> MapCell:
    """Run one policy at one pose and score the result.

    Failures of any kind inside the cell are recorded as non-viable; they
    never propagate.  Out-of-domain poses raise, callers filter those first.
    """
    cell = MapCell((0, 0, 0), pose.position.copy(), "non-viable", pose=pose)
    cfg = replace(scene.synthesis, policy=policy)
    try:
        out = synthesize(pose, scene, cfg)
    except OutOfDomainError:
        raise
    except Exception as exc:  # per-cell isolation: record, keep sweeping
        cell.outcome = GraspOutcome(False, diagnostics={"failure": repr(exc)})
        return cell
    cell.outcome = out
    if not out.viable:
        out.state = None  # drop the simulator state, maps get large
        return cell
    cell.status = "viable"
    cell.type_key = out.grasp_type.key(include_digits)
    cell.n_contacts = len(out.contacts)
    com = out.state.object_position
    rho = scene.characteristic_length
    mu = scene.obj.friction if scene.obj.friction is not None \
        else scene.params.friction
    try:
        cell.mu_g = mu_g(out.contacts, com, rho)
        cell.mu_f = mu_f(out.contacts, rho)
        cell.mu_m = mu_m(out.contacts, com, rho, mu)
        traj = scene.trajectory_for(out.state.gripper.base_pose)
        score = mu_s(out.state, traj, scene.params, scene.gripper, scene.obj,
                     samples=scene.metric.samples,
                     hold_torque=cfg.closing_torque,
                     probe=scene.metric.probe, window=scene.metric.window)
        cell.mu_s = score.mu_s
        out.scores = score
    except Exception as exc:
        cell.outcome.diagnostics["scoring_failure"] = repr(exc)
        cell.mu_s = 0.0
    out.state = None
    return cell


_POOL_SCENE: Optional[Scene] = None
_POOL_POLICY = ""
_POOL_DIGITS = False


def _pool_init(scene: Scene, policy: str, include_digits: bool) -> None:
    global _POOL_SCENE, _POOL_POLICY, _POOL_DIGITS
    _POOL_SCENE = scene
    _POOL_POLICY = policy
    _POOL_DIGITS = include_digits


def _pool_eval(task):
    index, pose = task
    cell = evaluate_cell(_POOL_SCENE, pose, _POOL_POLICY, _POOL_DIGITS)
    cell.index = index
    return index, cell


def sweep(scene: Scene, policy: Optional[str] = None,
          grid: Optional[GridConfig] = None, jobs: int = 1,
          include_digits: bool = False) -> BehavioralMap:
    """Evaluate the policy over the whole grid and extract manifolds.

    Cells are independent; results are reduced in grid order, so the output
    is identical for any ``jobs`` value.
    """
    policy = policy or scene.synthesis.policy
    cfg = grid or scene.grid
    pgrid = PoseGrid.from_config(cfg, scene.object_pose.position)

    cells: dict[tuple[int, int, int], MapCell] = {}
    tasks = []
    for ix, iy in pgrid.indices():
        index = (ix, iy, 0)
        pose = cell_pose(pgrid, scene, ix, iy)
        q = surface_query(scene.obj.shape, scene.object_pose, pose.position)
        if q.distance <= 0.0 or q.distance > pgrid.exploration_radius:
            cells[index] = MapCell(index, pose.position.copy(),
                                   "out-of-domain", distance=q.distance)
            continue
        cells[index] = MapCell(index, pose.position.copy(), "non-viable",
                               distance=q.distance, pose=pose)
        tasks.append((index, pose))

    if jobs <= 1:
        results = [_eval_serial(scene, policy, include_digits, t)
                   for t in tasks]
    else:
        with ProcessPoolExecutor(
                max_workers=jobs, initializer=_pool_init,
                initargs=(scene, policy, include_digits)) as pool:
            results = list(pool.map(_pool_eval, tasks, chunksize=1))

    for index, cell in sorted(results, key=lambda r: r[0]):
        cell.distance = cells[index].distance
        cells[index] = cell

    manifolds = extract_manifolds(cells, pgrid)
    prov = {
        "scene": _scene_fingerprint(scene),
        "config": _config_fingerprint(cfg, policy, scene.metric,
                                      include_digits),
        "seed": scene.seed,
        "version": __version__,
    }
    return BehavioralMap(pgrid, cells, manifolds, prov)


def _eval_serial(scene, policy, include_digits, task):
    index, pose = task
    cell = evaluate_cell(scene, pose, policy, include_digits)
    cell.index = index
    return index, cell


# ---------------------------------------------------------------------------
# Manifold extraction
# ---------------------------------------------------------------------------

def _neighbors(index):
    ix, iy, iz = index
    yield ix - 1, iy, iz
    yield ix + 1, iy, iz
    yield ix, iy - 1, iz
    yield ix, iy + 1, iz


def extract_manifolds(cells: dict, grid: PoseGrid) -> list[BehavioralManifold]:
    """Connected components of viable cells sharing a grasp type.

    Face adjacency only (4 neighbors in the slice); ordering is by volume
    descending, ties broken by smallest member index, so the result is
    deterministic.
    """
    unvisited = {i for i, c in cells.items() if c.viable}
    components = []
    for start in sorted(unvisited):
        if start not in unvisited:
            continue
        key = cells[start].type_key
        stack = [start]
        unvisited.discard(start)
        members = []
        while stack:
            cur = stack.pop()
            members.append(cur)
            for nb in _neighbors(cur):
                if nb in unvisited and cells[nb].type_key == key:
                    unvisited.discard(nb)
                    stack.append(nb)
        components.append((key, tuple(sorted(members))))

    components.sort(key=lambda c: (-len(c[1]), c[1][0]))
    manifolds = []
    for mid, (key, members) in enumerate(components):
        mset = set(members)
        vals = np.array([cells[m].mu_s for m in members])
        maxima = []
        boundary = []
        for m in members:
            nb_in = [n for n in _neighbors(m) if n in mset]
            if len(nb_in) < 4:
                boundary.append(m)
            if all(cells[n].mu_s <= cells[m].mu_s for n in nb_in):
                maxima.append(m)
        manifolds.append(BehavioralManifold(
            mid, key, members,
            volume_cm3=len(members) * grid.cell_volume * 1e6,
            mu_s_min=float(vals.min()), mu_s_max=float(vals.max()),
            mu_s_mean=float(vals.mean()),
            maxima=tuple(maxima), boundary=tuple(boundary)))
        for m in members:
            cells[m].manifold_id = mid
    return manifolds


def manifold_volume(manifold: BehavioralManifold, grid: PoseGrid) -> float:
    """Member count times cell volume, in cm^3 (slice area times thickness)."""
    return len(manifold.members) * grid.cell_volume * 1e6


def validate_partition(bmap: BehavioralMap) -> list[str]:
    """Check that the manifolds partition the viable cells correctly.

    Returns a list of violation descriptions (empty when the partition is
    sound): manifolds must be pairwise disjoint, cover every viable cell and
    nothing else, carry one grasp type each that matches every member cell,
    and agree with the per-cell manifold ids.
    """
    problems = []
    seen: dict[tuple, int] = {}
    for m in bmap.manifolds:
        for idx in m.members:
            if idx in seen:
                problems.append(f"cell {idx} in manifolds {seen[idx]} "
                                f"and {m.manifold_id}")
            seen[idx] = m.manifold_id
            cell = bmap.cells.get(idx)
            if cell is None:
                problems.append(f"manifold {m.manifold_id} references "
                                f"missing cell {idx}")
                continue
            if not cell.viable:
                problems.append(f"manifold {m.manifold_id} contains "
                                f"non-viable cell {idx}")
            elif cell.type_key != m.type_key:
                problems.append(f"cell {idx} type {cell.type_key} != "
                                f"manifold {m.manifold_id} type {m.type_key}")
            if cell is not None and cell.manifold_id != m.manifold_id:
                problems.append(f"cell {idx} labeled manifold "
                                f"{cell.manifold_id}, listed in "
                                f"{m.manifold_id}")
    for c in bmap.viable_cells:
        if c.index not in seen:
            problems.append(f"viable cell {c.index} not covered by any "
                            f"manifold")
    return problems


# ---------------------------------------------------------------------------
# Level sets and extrema
# ---------------------------------------------------------------------------

def level_sets_and_extrema(manifold: BehavioralManifold, cells: dict,
                           grid: PoseGrid, levels=_LEVELS):
    """Marching-squares contours of mu_s inside one manifold plus its
    strictly dominating cells.

    Returns ``(contours, maxima)`` where contours maps each level to a list
    of polylines in world xy coordinates.  A cell counts as a maximum when
    no in-manifold neighbor exceeds it; plateaus therefore flag every
    plateau cell rather than an arbitrary one.
    """
    mset = set(manifold.members)
    vals = np.full((grid.ny, grid.nx), np.nan)
    for (ix, iy, _iz) in manifold.members:
        vals[iy, ix] = cells[(ix, iy, 0)].mu_s
    contours = {}
    for level in levels:
        segs = _marching_squares(vals, grid, float(level))
        if segs:
            contours[float(level)] = _chain_segments(segs)
    return contours, list(manifold.maxima)


def _marching_squares(vals: np.ndarray, grid: PoseGrid, level: float):
    ny, nx = vals.shape
    segs = []

    def interp(pa, va, pb, vb):
        t = (level - va) / (vb - va)
        return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))

    for iy in range(ny - 1):
        for ix in range(nx - 1):
            corners = vals[iy:iy + 2, ix:ix + 2]
            if np.isnan(corners).any():
                continue
            # Corner order: a=(ix,iy) b=(ix+1,iy) c=(ix+1,iy+1) d=(ix,iy+1)
            pa = (grid.xs[ix], grid.ys[iy])
            pb = (grid.xs[ix + 1], grid.ys[iy])
            pc = (grid.xs[ix + 1], grid.ys[iy + 1])
            pd = (grid.xs[ix], grid.ys[iy + 1])
            va, vb = vals[iy, ix], vals[iy, ix + 1]
            vc, vd = vals[iy + 1, ix + 1], vals[iy + 1, ix]
            code = ((va > level) | (vb > level) << 1 |
                    (vc > level) << 2 | (vd > level) << 3)
            if code in (0, 15):
                continue
            ab = (pa, va, pb, vb)
            bc = (pb, vb, pc, vc)
            cd = (pc, vc, pd, vd)
            da = (pd, vd, pa, va)
            edge_pairs = {
                1: [(da, ab)], 2: [(ab, bc)], 3: [(da, bc)],
                4: [(bc, cd)], 6: [(ab, cd)], 7: [(da, cd)],
                8: [(cd, da)], 9: [(cd, ab)], 11: [(cd, bc)],
                12: [(bc, da)], 13: [(bc, ab)], 14: [(ab, da)],
            }
            if code in (5, 10):
                center = 0.25 * (va + vb + vc + vd)
                if code == 5:
                    pairs = [(da, ab), (bc, cd)] if center <= level \
                        else [(da, cd), (bc, ab)]
                else:
                    pairs = [(ab, bc), (cd, da)] if center <= level \
                        else [(ab, da), (cd, bc)]
            else:
                pairs = edge_pairs[code]
            for (e1, e2) in pairs:
                p1 = interp(e1[0], e1[1], e1[2], e1[3])
                p2 = interp(e2[0], e2[1], e2[2], e2[3])
                segs.append((p1, p2))
    return segs


def _chain_segments(segs, tol: float = 1e-9):
    """Join contour segments end to end into polylines."""
    def key(p):
        return (round(p[0] / tol) if tol else p[0],
                round(p[1] / tol) if tol else p[1])

    remaining = list(segs)
    polylines = []
    while remaining:
        a, b = remaining.pop(0)
        line = [a, b]
        extended = True
        while extended:
            extended = False
            for i, (p, q) in enumerate(remaining):
                if key(p) == key(line[-1]):
                    line.append(q)
                elif key(q) == key(line[-1]):
                    line.append(p)
                elif key(p) == key(line[0]):
                    line.insert(0, q)
                elif key(q) == key(line[0]):
                    line.insert(0, p)
                else:
                    continue
                remaining.pop(i)
                extended = True
                break
        polylines.append(np.array(line))
    return polylines


# ---------------------------------------------------------------------------
# Policy comparison
# ---------------------------------------------------------------------------

@dataclass
class TypeComparison:
    type_key: tuple
    v_c: float          # cm^3, baseline policy
    v_s: float          # cm^3, shape-informed policy
    containment: bool   # baseline cells subset of shape cells
    best_mu_c: float
    best_mu_s: float


@dataclass
class ComparisonReport:
    per_type: dict[tuple, TypeComparison]
    mean_volume_increase: float

    @property
    def all_contained(self) -> bool:
        return all(t.containment for t in self.per_type.values())


def _cells_by_type(bmap: BehavioralMap) -> dict[tuple, set]:
    by_type: dict[tuple, set] = {}
    for c in bmap.viable_cells:
        by_type.setdefault(c.type_key, set()).add(c.index)
    return by_type


def compare_policies(map_c: BehavioralMap,
                     map_s: BehavioralMap) -> ComparisonReport:
    """Per shared grasp type: volumes under each policy, whether the
    baseline region is contained in the shape-informed one, and the best
    score each achieves."""
    gc, gs = map_c.grid, map_s.grid
    if (gc.nx, gc.ny) != (gs.nx, gs.ny) or \
            not np.allclose(gc.xs, gs.xs) or not np.allclose(gc.ys, gs.ys) \
            or abs(gc.z - gs.z) > 1e-12:
        raise MappingError("maps were built on different grids")
    cells_c = _cells_by_type(map_c)
    cells_s = _cells_by_type(map_s)
    per_type = {}
    increases = []
    for key in sorted(set(cells_c) & set(cells_s)):
        sc, ss = cells_c[key], cells_s[key]
        v_c = len(sc) * gc.cell_volume * 1e6
        v_s = len(ss) * gs.cell_volume * 1e6
        best_c = max(map_c.cells[i].mu_s for i in sc)
        best_s = max(map_s.cells[i].mu_s for i in ss)
        per_type[key] = TypeComparison(key, v_c, v_s, sc <= ss, best_c, best_s)
        if v_c > 0:
            increases.append((v_s - v_c) / v_c)
    mean_inc = float(np.mean(increases)) if increases else 0.0
    return ComparisonReport(per_type, mean_inc)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def provenance_comment(bmap: BehavioralMap) -> str:
    p = bmap.provenance
    return (f"# scene={p['scene']} config={p['config']} "
            f"seed={p['seed']} version={p['version']}")


def map_to_csv(bmap: BehavioralMap) -> str:
    """Cell table: ix,iy,iz,x,y,z,viable,type_id,mu_s,mu_g,n_contacts,manifold_id."""
    ids = bmap.type_ids()
    buf = io.StringIO()
    buf.write(provenance_comment(bmap) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["ix", "iy", "iz", "x", "y", "z", "viable", "type_id",
                     "mu_s", "mu_g", "n_contacts", "manifold_id"])
    for index in sorted(bmap.cells):
        c = bmap.cells[index]
        tid = ids[c.type_key] if c.viable else -1
        writer.writerow([index[0], index[1], index[2],
                         f"{c.position[0]:.9g}", f"{c.position[1]:.9g}",
                         f"{c.position[2]:.9g}", int(c.viable), tid,
                         f"{c.mu_s:.9g}", f"{c.mu_g:.9g}",
                         c.n_contacts, c.manifold_id])
    return buf.getvalue()


def mu_s_pgm(bmap: BehavioralMap) -> bytes:
    """16-bit P5 heatmap of mu_s: round(mu_s * 65535), row-major with y
    increasing downward (first row = largest y)."""
    grid = bmap.grid
    img = np.zeros((grid.ny, grid.nx), dtype=np.uint16)
    for (ix, iy, _iz), c in bmap.cells.items():
        img[iy, ix] = int(round(min(max(c.mu_s, 0.0), 1.0) * 65535))
    img = img[::-1]  # row 0 at max y
    header = (f"P5\n{provenance_comment(bmap)}\n"
              f"{grid.nx} {grid.ny}\n65535\n").encode()
    return header + img.astype(">u2").tobytes()


def manifold_summary(bmap: BehavioralMap) -> dict:
    ids = bmap.type_ids()
    entries = []
    for m in bmap.manifolds:
        entries.append({
            "manifold_id": m.manifold_id,
            "type_id": ids[m.type_key],
            "type": {"features": list(m.type_key[0]),
                     "closure": m.type_key[1]},
            "cell_count": len(m.members),
            "volume_cm3": round(m.volume_cm3, 9),
            "mu_s": {"min": round(m.mu_s_min, 9),
                     "max": round(m.mu_s_max, 9),
                     "mean": round(m.mu_s_mean, 9)},
            "maxima": [list(i) for i in m.maxima],
        })
    viable = len(bmap.viable_cells)
    return {
        "provenance": bmap.provenance,
        "grid": {"nx": bmap.grid.nx, "ny": bmap.grid.ny,
                 "cell_volume_cm3": round(bmap.grid.cell_volume * 1e6, 12),
                 "thickness_m": bmap.grid.thickness},
        "viable_cells": viable,
        "manifolds": entries,
    }


def manifold_summary_text(bmap: BehavioralMap) -> str:
    return json.dumps(manifold_summary(bmap), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Provenance
# ---------------------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Pose):
        return {"position": obj.position.tolist(),
                "quaternion": obj.quaternion.tolist()}
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _digest(payload) -> str:
    text = json.dumps(_plain(payload), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _scene_fingerprint(scene: Scene) -> str:
    return _digest({
        "object": scene.catalog_object.name,
        "mass": scene.obj.mass,
        "friction": scene.obj.friction,
        "com": scene.obj.com_offset,
        "inertia": scene.obj.inertia,
        "pose": scene.object_pose,
        "sim": scene.params,
        "synthesis": scene.synthesis,
        "trajectory": scene.trajectory,
        "seed": scene.seed,
    })


def _config_fingerprint(grid: GridConfig, policy: str, metric,
                        include_digits: bool) -> str:
    return _digest({"grid": grid, "policy": policy, "metric": metric,
                    "include_digits": include_digits})
