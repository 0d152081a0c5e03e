"""Polytopes, polygons and space-time obstacles."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.spatial import ConvexHull

from .conic import ConeKind, ConicProgram, Status, solve_conic

GEOM_TOL = 1e-9


class GeometryError(ValueError):
    pass


def _as_point(p, dim: int | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if not np.all(np.isfinite(p)):
        raise GeometryError("point has non-finite coordinates")
    if dim is not None and p.shape[0] != dim:
        raise GeometryError(f"expected a {dim}-dimensional point, got {p.shape[0]}")
    return p


def _polytope_lp(A: np.ndarray, d: np.ndarray, c: np.ndarray):
    """min c.x over {A x <= d}."""
    prog = ConicProgram(A.shape[1], c)
    prog.add_block(A, d, ConeKind.NONNEG)
    return solve_conic(prog)


class HPolytope:
    """Convex polytope ``{x : A x <= d}`` with unit-norm facet normals.

    Construction certifies nonemptiness with an LP unless ``check=False``.
    """

    def __init__(self, A, d, check: bool = True):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        d = np.asarray(d, dtype=float).reshape(-1)
        if A.shape[0] != d.shape[0]:
            raise GeometryError("A and d have different row counts")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms < 1e-14):
            raise GeometryError("zero facet normal")
        self.A = A / norms[:, None]
        self.d = d / norms
        self.A.setflags(write=False)
        self.d.setflags(write=False)
        if check:
            sol = _polytope_lp(self.A, self.d, np.zeros(self.dim))
            if sol.status is Status.INFEASIBLE:
                raise GeometryError("polytope is empty")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def num_facets(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_box(cls, lo, hi) -> "HPolytope":
        lo = _as_point(lo)
        hi = _as_point(hi, lo.shape[0])
        if np.any(hi <= lo):
            raise GeometryError("box must have hi > lo")
        eye = np.eye(lo.shape[0])
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @classmethod
    def from_vertices(cls, points) -> "HPolytope":
        hull = ConvexHull(np.asarray(points, dtype=float))
        eq = hull.equations
        # drop duplicate facets produced by triangulated hull faces
        key = np.round(eq, 12)
        _, idx = np.unique(key, axis=0, return_index=True)
        eq = eq[np.sort(idx)]
        return cls(eq[:, :-1], -eq[:, -1], check=False)

    def contains(self, p, tol: float = 0.0) -> bool:
        return point_in_hpolytope(self, p, tol)

    def is_bounded(self) -> bool:
        return self._bounded

    @cached_property
    def _bounded(self) -> bool:
        for k in range(self.dim):
            for sign in (1.0, -1.0):
                c = np.zeros(self.dim)
                c[k] = sign
                if _polytope_lp(self.A, self.d, c).status is not Status.OPTIMAL:
                    return False
        return True

    def intersect(self, other: "HPolytope") -> "HPolytope":
        return HPolytope(np.vstack([self.A, other.A]), np.concatenate([self.d, other.d]))

    def chebyshev_center(self) -> tuple[np.ndarray, float]:
        """Center and radius of the largest inscribed ball (LP)."""
        n = self.dim
        c = np.zeros(n + 1)
        c[-1] = -1.0
        A = np.hstack([self.A, np.ones((self.num_facets, 1))])
        prog = ConicProgram(n + 1, c)
        prog.add_block(A, self.d, ConeKind.NONNEG)
        prog.add_block(sp.csr_matrix(([-1.0], ([0], [n])), shape=(1, n + 1)), [0.0], ConeKind.NONNEG)
        sol = solve_conic(prog)
        if sol.status is Status.UNBOUNDED:
            raise GeometryError("polytope is unbounded")
        if not sol.optimal:
            raise GeometryError(f"Chebyshev center LP failed: {sol.status.value}")
        return sol.primal[:n], float(sol.primal[n])

    @cached_property
    def vertices(self) -> np.ndarray:
        """Vertex enumeration of a bounded, full-dimensional polytope."""
        from scipy.spatial import HalfspaceIntersection

        center, radius = self.chebyshev_center()
        if radius <= 1e-12:
            raise GeometryError("polytope has empty interior")
        hs = HalfspaceIntersection(np.hstack([self.A, -self.d[:, None]]), center)
        pts = hs.intersections
        pts = pts[np.all(np.isfinite(pts), axis=1)]
        return np.unique(np.round(pts, 12), axis=0)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "d": self.d.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "HPolytope":
        return cls(data["A"], data["d"], check=False)

    def __repr__(self) -> str:
        return f"HPolytope(dim={self.dim}, facets={self.num_facets})"


def point_in_hpolytope(H: HPolytope, p, tol: float = 0.0) -> bool:
    if tol < 0:
        raise GeometryError("tol must be non-negative")
    p = _as_point(p)
    if p.shape[0] != H.dim:
        raise GeometryError(f"dimension mismatch: point {p.shape[0]}, polytope {H.dim}")
    return bool(np.all(H.A @ p <= H.d + tol))


def hpolytopes_touch(H1: HPolytope, H2: HPolytope, tol: float = 1e-7) -> bool:
    """True iff the two polytopes share a point after relaxing both by ``tol``."""
    if H1.dim != H2.dim:
        raise GeometryError("polytopes have different dimensions")
    try:
        if H1.is_bounded() and H2.is_bounded():
            lo1, hi1 = H1.vertices.min(axis=0), H1.vertices.max(axis=0)
            lo2, hi2 = H2.vertices.min(axis=0), H2.vertices.max(axis=0)
            if np.any(lo1 > hi2 + tol + 1e-6) or np.any(lo2 > hi1 + tol + 1e-6):
                return False
    except (GeometryError, ValueError, RuntimeError):
        pass  # no usable vertex list; fall through to the LP
    # smallest uniform relaxation s making the two systems jointly feasible;
    # always feasible, and bounded below by the s >= -1 row
    A = np.vstack([H1.A, H2.A])
    n = H1.dim
    G = np.block([[A, -np.ones((A.shape[0], 1))], [np.zeros((1, n)), -np.ones((1, 1))]])
    h = np.concatenate([H1.d, H2.d, [1.0]])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    prog = ConicProgram(n + 1, c)
    prog.add_block(G, h, ConeKind.NONNEG)
    sol = solve_conic(prog)
    if sol.status is Status.NUMERICAL_ERROR:
        sol = solve_conic(prog, feas_tol=1e-7, gap_tol=1e-7)
    if not sol.optimal:
        raise GeometryError("touch test LP failed numerically")
    return bool(sol.objective_value <= tol)


@dataclass(frozen=True, eq=False)
class ConvexPolygon2D:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("polygon needs >= 3 two-dimensional vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon has non-finite vertices")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.all(cross < -GEOM_TOL):
            v = v[::-1].copy()
        elif not np.all(cross > GEOM_TOL):
            raise GeometryError("polygon is not strictly convex")
        e = np.roll(v, -1, axis=0) - v
        ang = np.arctan2(e[:, 1], e[:, 0])
        turning = np.mod(np.roll(ang, -1) - ang, 2 * np.pi).sum()
        if abs(turning - 2 * np.pi) > 1e-6:
            raise GeometryError("polygon winds more than once")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def edges_hrep(self) -> tuple[np.ndarray, np.ndarray]:
        """Outward unit normals and offsets of the edges (CCW order)."""
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        n = np.column_stack([e[:, 1], -e[:, 0]])
        n /= np.linalg.norm(n, axis=1)[:, None]
        return n, np.einsum("ij,ij->i", n, v)

    def distance(self, p) -> float:
        """Euclidean distance from ``p`` to the polygon (0 inside)."""
        p = _as_point(p, 2)
        n, off = self.edges_hrep()
        if np.all(n @ p <= off):
            return 0.0
        v = self.vertices
        a = v
        b = np.roll(v, -1, axis=0)
        ab = b - a
        s = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
        closest = a + s[:, None] * ab
        return float(np.min(np.linalg.norm(closest - p, axis=1)))

    def translated(self, offset) -> "ConvexPolygon2D":
        return ConvexPolygon2D(self.vertices + _as_point(offset, 2))


def point_in_polygon(poly: ConvexPolygon2D, p, margin: float = 0.0) -> bool:
    if margin < 0:
        raise GeometryError("margin must be non-negative")
    return poly.distance(p) <= margin


def square(center, side: float) -> ConvexPolygon2D:
    cx, cy = _as_point(center, 2)
    h = side / 2
    return ConvexPolygon2D([[cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]])


@dataclass(frozen=True, eq=False)
class SpaceTimeObstacle:
    start_polygon: ConvexPolygon2D
    end_polygon: ConvexPolygon2D
    t_start: float
    t_end: float
    prism_vertices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        k = len(self.start_polygon)
        if len(self.end_polygon) != k:
            raise GeometryError("start and end polygons need equal vertex counts")
        if not self.t_end > self.t_start:
            raise GeometryError("obstacle duration must be positive")
        lo = np.column_stack([self.start_polygon.vertices, np.full(k, float(self.t_start))])
        hi = np.column_stack([self.end_polygon.vertices, np.full(k, float(self.t_end))])
        prism = np.vstack([lo, hi])
        prism.setflags(write=False)
        object.__setattr__(self, "prism_vertices", prism)

    @property
    def is_static(self) -> bool:
        return bool(np.array_equal(self.start_polygon.vertices, self.end_polygon.vertices))

    @cached_property
    def hull(self) -> HPolytope:
        return HPolytope.from_vertices(self.prism_vertices)

    def contains(self, p, tol: float = 0.0) -> bool:
        """Membership in the convex hull of the prism (3D points)."""
        return point_in_hpolytope(self.hull, p, tol)


def extrude_obstacle(start: ConvexPolygon2D, end: ConvexPolygon2D, t_start: float, t_end: float) -> SpaceTimeObstacle:
    return SpaceTimeObstacle(start, end, float(t_start), float(t_end))


def obstacle_cross_section(o: SpaceTimeObstacle, t: float) -> ConvexPolygon2D:
    if not o.t_start <= t <= o.t_end:
        raise GeometryError(f"t={t} outside obstacle lifetime [{o.t_start}, {o.t_end}]")
    if t == o.t_start:
        return o.start_polygon
    if t == o.t_end:
        return o.end_polygon
    frac = (t - o.t_start) / (o.t_end - o.t_start)
    v = (1.0 - frac) * o.start_polygon.vertices + frac * o.end_polygon.vertices
    return ConvexPolygon2D(v)
