"""Signed-distance geometry: primitives, composites, triangle meshes.

All shapes are immutable and evaluated in their own local frame; world-frame
queries go through :func:`surface_query` / :func:`shape_distance` with an
explicit pose.  SDF evaluation is vectorized over points (``(..., 3)`` in,
``(...)`` out).  Units are SI meters throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_EPS_GRAD = 1e-6
# Deterministic fallback direction for medial-axis singularities
# (lexicographically smallest unit axis direction).
_TIEBREAK_DIR = np.array([-1.0, 0.0, 0.0])


class GeometryError(ValueError):
    """Invalid shape parameters or malformed mesh input."""


# ---------------------------------------------------------------------------
# Quaternions and poses
# ---------------------------------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(q)
    if n == 0.0:
        raise GeometryError("zero quaternion")
    return q / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_mat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def quat_from_rotvec(rv: np.ndarray) -> np.ndarray:
    rv = np.asarray(rv, dtype=float)
    angle = np.linalg.norm(rv)
    if angle < 1e-14:
        # First-order expansion keeps small-rotation charts smooth.
        q = np.concatenate(([1.0], 0.5 * rv))
        return quat_normalize(q)
    return quat_from_axis_angle(rv, angle)


def quat_from_mat(m: np.ndarray) -> np.ndarray:
    # Shepperd's method; branch on the largest diagonal term for stability.
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array([(m[2, 1] - m[1, 2]) / s, 0.25 * s,
                      (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array([(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s,
                      0.25 * s, (m[1, 2] + m[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array([(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s, 0.25 * s])
    return quat_normalize(q)


def quat_integrate(q: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    """Advance orientation by body-fixed-independent world angular velocity."""
    return quat_normalize(quat_mul(quat_from_rotvec(np.asarray(omega) * dt), q))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: world = R(q) * local + p, quaternion as (w, x, y, z)."""

    position: np.ndarray
    quaternion: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        q = np.asarray(self.quaternion, dtype=float).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            q = quat_normalize(q)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "quaternion", q)

    @classmethod
    def _fast(cls, position, quaternion, matrix=None) -> "Pose":
        """Internal constructor bypassing validation; inputs must be clean."""
        self = object.__new__(cls)
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "quaternion", quaternion)
        if matrix is not None:
            object.__setattr__(self, "_matrix", matrix)
        return self

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def from_translation(p) -> "Pose":
        return Pose(np.asarray(p, dtype=float), np.array([1.0, 0.0, 0.0, 0.0]))

    @property
    def matrix(self) -> np.ndarray:
        cached = self.__dict__.get("_matrix")
        if cached is None:
            cached = quat_to_mat(self.quaternion)
            object.__setattr__(self, "_matrix", cached)
        return cached

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return Pose._fast(self.position + self.matrix @ other.position,
                          quat_mul(self.quaternion, other.quaternion),
                          self.matrix @ other.matrix)

    def inverse(self) -> "Pose":
        qi = quat_conj(self.quaternion)
        return Pose(-(quat_to_mat(qi) @ self.position), qi)

    def transform(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix.T + self.position

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=float) @ self.matrix.T


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------

class Shape:
    """Base class: local-frame SDF with vectorized evaluation."""

    def sdf(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def bounding_radius(self) -> float:
        raise NotImplementedError

    def surface_samples(self, n: int = 200) -> np.ndarray:
        """Deterministic quasi-uniform points on (or near) the surface.

        Default implementation projects a Fibonacci sphere of seed points
        onto the zero level set along the SDF gradient.
        """
        seeds = _fibonacci_sphere(n) * self.bounding_radius
        return project_to_surface(self, seeds)

    def _validate_positive(self, **params: float) -> None:
        for name, value in params.items():
            if not value > 0.0:
                raise GeometryError(f"{type(self).__name__}: {name} must be > 0, got {value}")


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n, dtype=float)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def sdf_gradient(shape: Shape, points: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of the SDF, vectorized."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    grad = np.empty_like(pts)
    for k in range(3):
        dp = np.zeros(3)
        dp[k] = h
        grad[:, k] = (shape.sdf(pts + dp) - shape.sdf(pts - dp)) / (2 * h)
    if np.asarray(points).ndim == 1:
        return grad[0]
    return grad


def project_to_surface(shape: Shape, points: np.ndarray, iters: int = 4) -> np.ndarray:
    """Move points onto the zero level set by sphere-tracing the gradient."""
    pts = np.array(np.atleast_2d(points), dtype=float)
    for _ in range(iters):
        d = shape.sdf(pts)
        g = sdf_gradient(shape, pts)
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        g = np.where(norms > 1e-12, g / np.maximum(norms, 1e-12), _TIEBREAK_DIR)
        pts = pts - d[:, None] * g
    return pts


@dataclass(frozen=True)
class Sphere(Shape):
    radius: float

    def __post_init__(self):
        self._validate_positive(radius=self.radius)

    def sdf(self, points):
        pts = np.asarray(points, dtype=float)
        return np.linalg.norm(pts, axis=-1) - self.radius

    @property
    def bounding_radius(self):
        return self.radius


@dataclass(frozen=True)
class Box(Shape):
    half_extents: tuple[float, float, float]

    def __post_init__(self):
        hx, hy, hz = self.half_extents
        self._validate_positive(hx=hx, hy=hy, hz=hz)

    def sdf(self, points):
        pts = np.asarray(points, dtype=float)
        q = np.abs(pts) - np.asarray(self.half_extents)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    @property
    def bounding_radius(self):
        return float(np.linalg.norm(self.half_extents))

    def surface_samples(self, n: int = 200) -> np.ndarray:
        # Area-weighted deterministic grid over the six faces.
        h = np.asarray(self.half_extents)
        areas = np.array([h[1] * h[2], h[1] * h[2], h[0] * h[2],
                          h[0] * h[2], h[0] * h[1], h[0] * h[1]])
        counts = np.maximum(1, np.round(n * areas / areas.sum()).astype(int))
        pts = []
        for face in range(6):
            axis, sign = divmod(face, 2)
            sign = 1.0 if sign == 0 else -1.0
            m = counts[face]
            side = max(1, int(np.ceil(np.sqrt(m))))
            u = (np.arange(side) + 0.5) / side * 2.0 - 1.0
            uu, vv = np.meshgrid(u, u)
            others = [k for k in range(3) if k != axis]
            p = np.zeros((side * side, 3))
            p[:, axis] = sign * h[axis]
            p[:, others[0]] = uu.ravel() * h[others[0]]
            p[:, others[1]] = vv.ravel() * h[others[1]]
            pts.append(p)
        return np.concatenate(pts, axis=0)


@dataclass(frozen=True)
class Capsule(Shape):
    """Segment from origin to (0, 0, length) swept by a sphere of ``radius``."""

    radius: float
    length: float

    def __post_init__(self):
        self._validate_positive(radius=self.radius, length=self.length)

    def sdf(self, points):
        pts = np.asarray(points, dtype=float)
        z = np.clip(pts[..., 2], 0.0, self.length)
        closest = np.zeros_like(pts)
        closest[..., 2] = z
        return np.linalg.norm(pts - closest, axis=-1) - self.radius

    @property
    def bounding_radius(self):
        return self.length + self.radius


@dataclass(frozen=True)
class Cylinder(Shape):
    """Finite cylinder along local z, centered at the origin."""

    radius: float
    height: float

    def __post_init__(self):
        self._validate_positive(radius=self.radius, height=self.height)

    def sdf(self, points):
        pts = np.asarray(points, dtype=float)
        rho = np.hypot(pts[..., 0], pts[..., 1])
        dx = rho - self.radius
        dz = np.abs(pts[..., 2]) - 0.5 * self.height
        outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dz, 0.0))
        inside = np.minimum(np.maximum(dx, dz), 0.0)
        return outside + inside

    @property
    def bounding_radius(self):
        return float(np.hypot(self.radius, 0.5 * self.height))


@dataclass(frozen=True)
class Torus(Shape):
    """Torus with its ring in the local x-z plane (ring axis along y)."""

    major_radius: float
    minor_radius: float

    def __post_init__(self):
        self._validate_positive(major_radius=self.major_radius,
                                minor_radius=self.minor_radius)

    def sdf(self, points):
        pts = np.asarray(points, dtype=float)
        ring = np.hypot(pts[..., 0], pts[..., 2]) - self.major_radius
        return np.hypot(ring, pts[..., 1]) - self.minor_radius

    @property
    def bounding_radius(self):
        return self.major_radius + self.minor_radius


@dataclass(frozen=True)
class Composite(Shape):
    """Union of posed child shapes: SDF = min over children.

    Exact Euclidean distance outside; inside, min-of-children is an accepted
    lower-bound approximation (shallow penetrations only are ever resolved).
    """

    children: tuple[tuple[Shape, Pose], ...]

    def __post_init__(self):
        if not self.children:
            raise GeometryError("Composite needs at least one child")
        object.__setattr__(self, "children", tuple(self.children))
        inv = tuple(pose.inverse() for _, pose in self.children)
        object.__setattr__(self, "_inv_poses", inv)

    def sdf(self, points):
        pts = np.asarray(points, dtype=float)
        best = None
        for (child, _), inv in zip(self.children, self._inv_poses):
            d = child.sdf(inv.transform(pts))
            best = d if best is None else np.minimum(best, d)
        return best

    def child_sdfs(self, points) -> np.ndarray:
        """Per-child SDF values, shape (n_children, ...)."""
        pts = np.asarray(points, dtype=float)
        return np.stack([child.sdf(inv.transform(pts))
                         for (child, _), inv in zip(self.children, self._inv_poses)])

    @property
    def bounding_radius(self):
        return max(np.linalg.norm(pose.position) + child.bounding_radius
                   for child, pose in self.children)


class TriMesh(Shape):
    """Watertight triangle mesh with pseudonormal signed distance.

    Sign is decided by the angle-weighted pseudonormal at the closest
    feature, which is robust for closed, consistently oriented meshes.
    Distance queries are accelerated by a KD-tree over triangle centroids.
    """

    def __init__(self, vertices: np.ndarray, faces: np.ndarray):
        from scipy.spatial import cKDTree

        v = np.asarray(vertices, dtype=float)
        f = np.asarray(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or f.ndim != 2 or f.shape[1] != 3:
            raise GeometryError("TriMesh expects (n,3) vertices and (m,3) faces")
        self.vertices = v
        self.faces = f
        self._face_normals = self._compute_face_normals()
        self._validate_watertight()
        self._vertex_normals = self._angle_weighted_vertex_normals()
        self._edge_normals = self._edge_pseudonormals()
        self._centroids = v[f].mean(axis=1)
        self._tri_radius = np.linalg.norm(
            v[f] - self._centroids[:, None, :], axis=-1).max(axis=1)
        self._tree = cKDTree(self._centroids)
        self._bounding_radius = float(np.linalg.norm(v, axis=1).max())

    def _compute_face_normals(self) -> np.ndarray:
        tri = self.vertices[self.faces]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        area2 = np.linalg.norm(n, axis=1)
        if np.any(area2 < 1e-14):
            raise GeometryError("mesh contains zero-area triangles")
        return n / area2[:, None]

    def _validate_watertight(self) -> None:
        # Every directed edge must appear exactly once, and its reverse once.
        edges = {}
        for fi, (a, b, c) in enumerate(self.faces):
            for u, v in ((a, b), (b, c), (c, a)):
                if (u, v) in edges:
                    raise GeometryError("mesh is not consistently oriented "
                                        f"(duplicate directed edge {u}->{v})")
                edges[(u, v)] = fi
        for (u, v) in edges:
            if (v, u) not in edges:
                raise GeometryError(f"mesh is not watertight (open edge {u}->{v})")
        self._edge_to_face = edges

    def _angle_weighted_vertex_normals(self) -> np.ndarray:
        normals = np.zeros_like(self.vertices)
        tri = self.vertices[self.faces]
        for k in range(3):
            e1 = tri[:, (k + 1) % 3] - tri[:, k]
            e2 = tri[:, (k + 2) % 3] - tri[:, k]
            cosang = np.einsum("ij,ij->i", e1, e2) / (
                np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1))
            ang = np.arccos(np.clip(cosang, -1.0, 1.0))
            np.add.at(normals, self.faces[:, k], ang[:, None] * self._face_normals)
        n = np.linalg.norm(normals, axis=1, keepdims=True)
        return normals / np.maximum(n, 1e-14)

    def _edge_pseudonormals(self) -> dict:
        out = {}
        for (u, v), fi in self._edge_to_face.items():
            if u < v:
                fj = self._edge_to_face[(v, u)]
                n = self._face_normals[fi] + self._face_normals[fj]
                out[(u, v)] = n / max(np.linalg.norm(n), 1e-14)
        return out

    @property
    def bounding_radius(self):
        return self._bounding_radius

    def sdf(self, points):
        pts = np.asarray(points, dtype=float)
        flat = np.atleast_2d(pts.reshape(-1, 3))
        out = np.array([self._signed_distance_one(p) for p in flat])
        return out.reshape(pts.shape[:-1])

    def _candidate_faces(self, p: np.ndarray) -> np.ndarray:
        d0, i0 = self._tree.query(p)
        # Any triangle whose centroid ball could beat the current best.
        bound = d0 + self._tri_radius[i0] + self._tri_radius.max()
        return np.asarray(self._tree.query_ball_point(p, bound), dtype=np.int64)

    def _signed_distance_one(self, p: np.ndarray) -> float:
        cand = self._candidate_faces(p)
        tri = self.vertices[self.faces[cand]]
        closest, region = _closest_point_on_triangles(p, tri)
        d2 = np.einsum("ij,ij->i", closest - p, closest - p)
        k = int(np.argmin(d2))
        fi = cand[k]
        cp = closest[k]
        normal = self._pseudonormal(fi, region[k], cp)
        dist = float(np.sqrt(d2[k]))
        sign = 1.0 if np.dot(p - cp, normal) >= 0.0 else -1.0
        return sign * dist

    def _pseudonormal(self, fi: int, region: int, cp: np.ndarray) -> np.ndarray:
        face = self.faces[fi]
        if region == 0:  # interior
            return self._face_normals[fi]
        if region in (1, 2, 3):  # vertex a/b/c
            return self._vertex_normals[face[region - 1]]
        # edge regions 4,5,6 -> edges (a,b), (b,c), (c,a)
        pairs = [(face[0], face[1]), (face[1], face[2]), (face[2], face[0])]
        u, v = pairs[region - 4]
        key = (u, v) if u < v else (v, u)
        return self._edge_normals[key]

    def surface_samples(self, n: int = 200) -> np.ndarray:
        # Deterministic area-weighted triangle sampling (Halton-free: stride).
        tri = self.vertices[self.faces]
        areas = 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        cum = np.cumsum(areas)
        targets = (np.arange(n) + 0.5) / n * cum[-1]
        idx = np.searchsorted(cum, targets)
        # Fixed barycentric offsets cycle through a small deterministic set.
        bary = np.array([[1 / 3, 1 / 3, 1 / 3], [0.6, 0.2, 0.2],
                         [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]])
        b = bary[np.arange(n) % len(bary)]
        t = tri[idx]
        return np.einsum("nk,nkj->nj", b, t)


def _closest_point_on_triangles(p: np.ndarray, tri: np.ndarray):
    """Closest point on each triangle to p; returns (points, region codes).

    Region codes: 0 interior, 1/2/3 vertices a/b/c, 4/5/6 edges ab/bc/ca.
    Vectorized version of the Ericson real-time collision detection routine.
    """
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp_ = p - c
    d5 = np.einsum("ij,ij->i", ab, cp_)
    d6 = np.einsum("ij,ij->i", ac, cp_)

    n = len(tri)
    out = np.empty((n, 3))
    region = np.empty(n, dtype=np.int64)
    done = np.zeros(n, dtype=bool)

    m = (d1 <= 0) & (d2 <= 0)
    out[m], region[m], done[m] = a[m], 1, True

    m = (~done) & (d3 >= 0) & (d4 <= d3)
    out[m], region[m], done[m] = b[m], 2, True

    vc = d1 * d4 - d3 * d2
    m = (~done) & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
    out[m] = a[m] + v[m, None] * ab[m]
    region[m], done[m] = 4, True

    m = (~done) & (d6 >= 0) & (d5 <= d6)
    out[m], region[m], done[m] = c[m], 3, True

    vb = d5 * d2 - d1 * d6
    m = (~done) & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
    out[m] = a[m] + w[m, None] * ac[m]
    region[m], done[m] = 6, True

    va = d3 * d6 - d5 * d4
    m = (~done) & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where((d4 - d3) + (d5 - d6) != 0,
                     (d4 - d3) / ((d4 - d3) + (d5 - d6)), 0.0)
    out[m] = b[m] + w[m, None] * (c[m] - b[m])
    region[m], done[m] = 5, True

    m = ~done
    denom = va + vb + vc
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(denom != 0, vb / denom, 1 / 3)
        w = np.where(denom != 0, vc / denom, 1 / 3)
    out[m] = a[m] + v[m, None] * ab[m] + w[m, None] * ac[m]
    region[m] = 0
    return out, region


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceQuery:
    """Signed distance plus closest surface point and outward normal (world)."""

    distance: float
    closest_point: np.ndarray
    normal: np.ndarray


def signed_distance(shape: Shape, point: np.ndarray) -> float:
    """Signed distance of a local-frame point: negative inside the shape."""
    return float(shape.sdf(np.asarray(point, dtype=float)))


def surface_query(shape: Shape, shape_pose: Pose, point: np.ndarray) -> SurfaceQuery:
    """World-frame closest-point query against a posed shape."""
    local = shape_pose.inverse().transform(np.asarray(point, dtype=float))
    d = float(shape.sdf(local))
    g = sdf_gradient(shape, local)
    gn = np.linalg.norm(g)
    if gn < 1e-9:
        g = _TIEBREAK_DIR.copy()
        gn = 1.0
    n_local = g / gn
    closest_local = local - d * n_local
    # Re-evaluate the normal at the surface point itself, which is exact for
    # primitives and removes interior-gradient skew.
    g2 = sdf_gradient(shape, closest_local)
    g2n = np.linalg.norm(g2)
    if g2n > 1e-9:
        n_local = g2 / g2n
    return SurfaceQuery(
        distance=d,
        closest_point=shape_pose.transform(closest_local),
        normal=shape_pose.rotate(n_local),
    )


_SEED_CACHE: dict = {}


def _surface_seeds(shape: Shape, n: int = 200) -> np.ndarray:
    key = (id(shape), n)
    if key not in _SEED_CACHE:
        _SEED_CACHE[key] = shape.surface_samples(n)
    return _SEED_CACHE[key]


def shape_distance(a: Shape, pose_a: Pose, b: Shape, pose_b: Pose,
                   seeds: int = 200, refine_iters: int = 20):
    """Shortest surface-to-surface distance between two posed shapes.

    Returns ``(distance, point_on_a, point_on_b)`` in world frame; negative
    distance is the penetration depth of the deepest sampled witness.
    Seeded by precomputed surface samples of ``a`` evaluated against the SDF
    of ``b``, refined by alternating closest-point projections.
    """
    inv_b = pose_b.inverse()
    pts_a_world = pose_a.transform(_surface_seeds(a, seeds))
    d_b = b.sdf(inv_b.transform(pts_a_world))
    k = int(np.argmin(d_b))
    p = pts_a_world[k]

    if d_b[k] < 0.0:
        # Penetrating: minimize b's SDF over a's surface by tangent-projected
        # gradient descent with backtracking.
        step = 0.25 * min(a.bounding_radius, b.bounding_radius)
        best_p, best_d = p, float(d_b[k])
        for _ in range(2 * refine_iters):
            g = pose_b.rotate(sdf_gradient(b, inv_b.transform(best_p)))
            gn = np.linalg.norm(g)
            if gn < 1e-12 or step < 1e-10:
                break
            n_a = np.asarray(surface_query(a, pose_a, best_p).normal)
            t = -(g / gn - np.dot(g / gn, n_a) * n_a)
            tn = np.linalg.norm(t)
            if tn < 1e-10:
                break
            cand = np.asarray(surface_query(
                a, pose_a, best_p + (step / tn) * t).closest_point)
            d = float(b.sdf(inv_b.transform(cand)))
            if d < best_d:
                best_p, best_d = cand, d
            else:
                step *= 0.5
        qb = surface_query(b, pose_b, best_p)
        return best_d, best_p, np.asarray(qb.closest_point)

    # Separated: alternating projections converge to a witness pair.
    q = np.asarray(surface_query(b, pose_b, p).closest_point)
    for _ in range(refine_iters):
        p = np.asarray(surface_query(a, pose_a, q).closest_point)
        q = np.asarray(surface_query(b, pose_b, p).closest_point)
    dist = float(np.linalg.norm(q - p))
    return dist, p, q


# ---------------------------------------------------------------------------
# Mesh loading (ASCII OBJ, ASCII/binary STL)
# ---------------------------------------------------------------------------

def load_mesh(path: str, scale: float = 1.0) -> TriMesh:
    """Load a watertight triangle mesh from OBJ or STL and scale it."""
    if not scale > 0.0:
        raise GeometryError(f"scale must be > 0, got {scale}")
    lower = str(path).lower()
    try:
        if lower.endswith(".obj"):
            v, f = _load_obj(path)
        elif lower.endswith(".stl"):
            v, f = _load_stl(path)
        else:
            raise GeometryError(f"unsupported mesh format: {path}")
    except OSError as exc:
        raise GeometryError(f"cannot read mesh file {path}: {exc}") from exc
    return TriMesh(v * scale, f)


def _load_obj(path: str):
    verts: list = []
    faces: list = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts or not faces:
        raise GeometryError(f"OBJ file {path} has no geometry")
    return np.asarray(verts, dtype=float), np.asarray(faces, dtype=np.int64)


def _load_stl(path: str):
    with open(path, "rb") as fh:
        head = fh.read(5)
        fh.seek(0)
        data = fh.read()
    if head == b"solid" and b"facet" in data[:1000]:
        tris = _parse_stl_ascii(data.decode("utf-8", errors="replace"))
    else:
        tris = _parse_stl_binary(data)
    return _weld_triangle_soup(tris)


def _parse_stl_ascii(text: str) -> np.ndarray:
    tris = []
    current: list = []
    for line in text.splitlines():
        parts = line.split()
        if parts[:1] == ["vertex"]:
            current.append([float(x) for x in parts[1:4]])
            if len(current) == 3:
                tris.append(current)
                current = []
    if not tris:
        raise GeometryError("ASCII STL contains no facets")
    return np.asarray(tris, dtype=float)


def _parse_stl_binary(data: bytes) -> np.ndarray:
    import struct

    if len(data) < 84:
        raise GeometryError("binary STL too short")
    (count,) = struct.unpack_from("<I", data, 80)
    if len(data) < 84 + 50 * count:
        raise GeometryError("binary STL truncated")
    rec = np.frombuffer(data[84:84 + 50 * count], dtype=np.dtype([
        ("normal", "<f4", (3,)), ("verts", "<f4", (3, 3)), ("attr", "<u2")]))
    return rec["verts"].astype(float)


def _weld_triangle_soup(tris: np.ndarray, tol: float = 1e-9):
    flat = tris.reshape(-1, 3)
    keys = np.round(flat / tol).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                   return_counts=True)
    del counts
    first = {}
    verts = []
    remap = np.empty(len(flat), dtype=np.int64)
    for i, key in enumerate(inverse):
        if key not in first:
            first[key] = len(verts)
            verts.append(flat[i])
        remap[i] = first[key]
    faces = remap.reshape(-1, 3)
    return np.asarray(verts, dtype=float), faces
