"""Convex free-space regions by iterative inflation.

Each region grows from a seed by alternating two steps: cut every obstacle
off with a hyperplane tangent to it in the metric of the current ellipsoid,
then replace the ellipsoid with the largest one inscribed in the resulting
polytope. Previously built regions are treated as obstacles so regions only
touch at their boundaries.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
import scipy.sparse as sp

from .conic import ConeKind, ConicProgram, Status, solve_conic
from .geometry import (
    ConvexPolygon2D,
    GeometryError,
    HPolytope,
    SpaceTimeObstacle,
    point_in_hpolytope,
)

log = logging.getLogger(__name__)


class SeedRejected(GeometryError):
    """Seed lies inside an obstacle or an existing region."""


class TerminalInObstacle(GeometryError):
    pass


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """The set ``{center + shape @ u : ||u|| <= 1}``."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        C = np.asarray(self.shape, dtype=float)
        if C.shape != (c.shape[0], c.shape[0]):
            raise GeometryError("ellipsoid shape must be square and match the center")
        C = 0.5 * (C + C.T)
        if np.min(np.linalg.eigvalsh(C)) <= 1e-12:
            raise GeometryError("ellipsoid shape must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", C)

    @property
    def log_det(self) -> float:
        return float(np.linalg.slogdet(self.shape)[1])

    def metric_norm(self, points) -> np.ndarray:
        """``||C^-1 (x - c)||`` for each row of ``points``."""
        u = np.linalg.solve(self.shape, (np.atleast_2d(points) - self.center).T)
        return np.linalg.norm(u, axis=0)


@dataclass
class IrisParams:
    max_iterations: int = 10
    termination_growth: float = 0.02
    boundary_tol: float = 1e-9
    seed_rejection_tol: float = 1e-9
    min_region_radius: float = 1e-6
    snap_tol: float = 1e-3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.termination_growth <= 0:
            raise ValueError("termination_growth must be positive")


@dataclass
class Environment:
    """Axis-aligned configuration-space box plus obstacles.

    ``lo``/``hi`` are 2D for static planning and 3D (x, y, t) for
    space-time planning; in 2D only static obstacles are allowed.
    """

    lo: np.ndarray
    hi: np.ndarray
    obstacles: list = field(default_factory=list)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.shape[0] not in (2, 3):
            raise GeometryError("bounds must be 2D or 3D boxes")
        if np.any(self.hi <= self.lo):
            raise GeometryError("bounds must have hi > lo")
        for o in self.obstacles:
            if self.dim == 2 and isinstance(o, SpaceTimeObstacle) and not o.is_static:
                raise GeometryError("moving obstacles need a space-time environment")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def bounds(self) -> HPolytope:
        return HPolytope.from_box(self.lo, self.hi)

    def obstacle_points(self) -> list[np.ndarray]:
        """Vertex representation of each obstacle in this environment's space."""
        pts = []
        for o in self.obstacles:
            if isinstance(o, ConvexPolygon2D):
                if self.dim == 3:
                    raise GeometryError("space-time environments need SpaceTimeObstacle entries")
                pts.append(o.vertices)
            elif self.dim == 2:
                pts.append(o.start_polygon.vertices)
            else:
                pts.append(o.prism_vertices)
        return pts

    def obstacle_hulls(self) -> list[HPolytope]:
        return [HPolytope.from_vertices(p) for p in self.obstacle_points()]


# -- inscribed ellipsoid -----------------------------------------------------


def _sym_basis(n: int) -> np.ndarray:
    basis = []
    for i, j in combinations_with_replacement(range(n), 2):
        E = np.zeros((n, n))
        E[i, j] = E[j, i] = 1.0
        basis.append(E)
    return np.array(basis)


def _mvie_newton(A, d, c0, C0, tol=1e-9, gap=1e-7, max_newton=100):
    """Barrier method for max log det C s.t. ||C a_i|| + a_i.c <= d_i."""
    m, n = A.shape
    E = _sym_basis(n)  # K x n x n
    K = E.shape[0]
    M = np.einsum("kab,ib->iak", E, A)  # m x n x K, M[i] @ p == C a_i
    p = np.array([C0[i, j] for i, j in combinations_with_replacement(range(n), 2)])
    x = np.concatenate([p, c0])

    def unpack(x):
        return np.einsum("k,kab->ab", x[:K], E), x[K:]

    def slack(x):
        C, c = unpack(x)
        u = M @ x[:K]
        return d - A @ c - np.linalg.norm(u, axis=1), u, C

    def barrier(x, t):
        s, _, C = slack(x)
        if np.any(s <= 0):
            return np.inf
        try:
            L = np.linalg.cholesky(C)
        except np.linalg.LinAlgError:
            return np.inf
        return -t * 2.0 * np.sum(np.log(np.diag(L))) - np.sum(np.log(s))

    t = 1.0
    while True:
        for _ in range(max_newton):
            s, u, C = slack(x)
            Ci = np.linalg.inv(C)
            nu = np.linalg.norm(u, axis=1)
            uh = u / nu[:, None]
            CiE = np.einsum("ab,kbc->kac", Ci, E)
            g = np.zeros(K + n)
            g[:K] = -t * np.einsum("kaa->k", CiE)
            H = np.zeros((K + n, K + n))
            H[:K, :K] = t * np.einsum("kab,lba->kl", CiE, CiE)
            q = np.concatenate([np.einsum("iak,ia->ik", M, uh), A], axis=1)
            g += np.sum(q / s[:, None], axis=0)
            H += np.einsum("ik,il->kl", q / s[:, None], q / s[:, None])
            proj = np.eye(n)[None] - np.einsum("ia,ib->iab", uh, uh)
            Hn = np.einsum("iak,iab,ibl->ikl", M, proj, M) / (nu * s)[:, None, None]
            H[:K, :K] += Hn.sum(axis=0)
            step = -np.linalg.solve(H, g)
            dec = -g @ step
            if dec / 2 < tol:
                break
            f0 = barrier(x, t)
            alpha = 1.0
            while barrier(x + alpha * step, t) > f0 - 0.25 * alpha * dec and alpha >= 1e-12:
                alpha *= 0.5
            if alpha < 1e-12:
                break
            x = x + alpha * step
        if m / t < gap:
            break
        t *= 50.0
    C, c = unpack(x)
    return c, C


def inscribed_ellipsoid(H: HPolytope) -> Ellipsoid:
    """Maximum-volume ellipsoid inscribed in a bounded polytope.

    Solved to a duality gap of 1e-7 in log det by a barrier method; if the
    Newton iteration breaks down the Chebyshev ball is returned instead.
    """
    try:
        center, radius = H.chebyshev_center()
    except GeometryError as exc:
        raise GeometryError(f"cannot inscribe an ellipsoid: {exc}") from exc
    if radius <= 0:
        raise GeometryError("polytope has empty interior")
    if not H.is_bounded():
        raise GeometryError("polytope is unbounded")
    n = H.dim
    C0 = 0.5 * radius * np.eye(n)
    try:
        c, C = _mvie_newton(H.A, H.d, center, C0)
        return Ellipsoid(c, C)
    except (np.linalg.LinAlgError, GeometryError, FloatingPointError):
        log.warning("MVIE Newton iteration failed; using the Chebyshev ball")
        return Ellipsoid(center, radius * np.eye(n))


# -- separating hyperplanes --------------------------------------------------


def _closest_in_hull(e: Ellipsoid, V: np.ndarray) -> tuple[np.ndarray, float]:
    """Point of conv(V) closest to the center in the ellipsoid metric.

    Variables are the convex-combination weights and an epigraph scalar.
    """
    m, n = V.shape
    U = np.linalg.solve(e.shape, (V - e.center).T)  # n x m
    nv = m + 1
    cost = np.zeros(nv)
    cost[m] = 1.0
    prog = ConicProgram(nv, cost)
    prog.add_block(sp.csr_matrix(np.concatenate([np.ones(m), [0.0]])[None, :]), [1.0], ConeKind.ZERO)
    prog.add_block(sp.hstack([-sp.eye(m), sp.csr_matrix((m, 1))]), np.zeros(m), ConeKind.NONNEG)
    G = np.zeros((n + 1, nv))
    G[0, m] = -1.0
    G[1:, :m] = -U
    prog.add_block(G, np.zeros(n + 1), ConeKind.SOC)
    sol = solve_conic(prog)
    if not sol.optimal:
        raise GeometryError(f"closest-point subproblem failed: {sol.status.value}")
    lam = np.clip(sol.primal[:m], 0.0, None)
    lam /= lam.sum()
    return lam @ V, float(sol.primal[m])


def _closest_in_hpolytope(e: Ellipsoid, H: HPolytope) -> tuple[np.ndarray, float]:
    n = H.dim
    Ci = np.linalg.inv(e.shape)
    nv = n + 1
    cost = np.zeros(nv)
    cost[n] = 1.0
    prog = ConicProgram(nv, cost)
    prog.add_block(np.hstack([H.A, np.zeros((H.num_facets, 1))]), H.d, ConeKind.NONNEG)
    G = np.zeros((n + 1, nv))
    G[0, n] = -1.0
    G[1:, :n] = -Ci
    prog.add_block(G, np.concatenate([[0.0], -Ci @ e.center]), ConeKind.SOC)
    sol = solve_conic(prog)
    if not sol.optimal:
        raise GeometryError(f"closest-point subproblem failed: {sol.status.value}")
    return sol.primal[:n], float(sol.primal[n])


def _tangent_plane(e: Ellipsoid, x_star: np.ndarray) -> tuple[np.ndarray, float]:
    Ci = np.linalg.inv(e.shape)
    a = Ci.T @ Ci @ (x_star - e.center)
    a /= np.linalg.norm(a)
    return a, float(a @ x_star)


def separating_hyperplane(e: Ellipsoid, obstacle_vertices, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Halfspace ``a.x <= b`` keeping the center, tangent to the obstacle hull.

    Raises :class:`SeedRejected` when the center lies inside the hull.
    """
    V = np.atleast_2d(np.asarray(obstacle_vertices, dtype=float))
    x_star, dist = _closest_in_hull(e, V)
    if dist <= tol:
        raise SeedRejected("ellipsoid center is inside the obstacle")
    return _tangent_plane(e, x_star)


# -- region inflation --------------------------------------------------------


@dataclass
class _Blocker:
    vertices: np.ndarray
    hull: HPolytope
    is_region: bool = False


def _blockers(env: Environment, existing: list[HPolytope], hulls) -> list[_Blocker]:
    out = [_Blocker(V, H) for V, H in zip(env.obstacle_points(), hulls)]
    out += [_Blocker(R.vertices, R, True) for R in existing]
    return out


def _snap_to_facet(a: np.ndarray, b: float, x_star: np.ndarray, H: HPolytope, tol: float):
    """Replace a tangent plane by the blocker facet it approximates.

    Interior-point solutions leave tangent planes slightly tilted; snapping
    keeps regions flush with the facets they were cut against.
    """
    active = np.abs(H.A @ x_star - H.d) <= 1e-6
    for j in np.flatnonzero(active):
        if np.linalg.norm(a + H.A[j]) <= tol:
            return -H.A[j].copy(), float(-H.d[j])
    return a, b


def _inflate(seed, env: Environment, existing: list[HPolytope], params: IrisParams, hulls=None):
    seed = np.asarray(seed, dtype=float).reshape(-1)
    bounds = env.bounds
    if seed.shape[0] != env.dim:
        raise GeometryError("seed dimension does not match the environment")
    if not point_in_hpolytope(bounds, seed, params.boundary_tol):
        raise GeometryError("seed is outside the bounds")
    if hulls is None:
        hulls = env.obstacle_hulls()
    for k, hull in enumerate(hulls):
        if point_in_hpolytope(hull, seed, params.seed_rejection_tol):
            raise SeedRejected(f"seed inside obstacle {k}")
    for k, R in enumerate(existing):
        if point_in_hpolytope(R, seed, params.seed_rejection_tol):
            raise SeedRejected(f"seed inside existing region {k}")

    blockers = _blockers(env, existing, hulls)
    ell = Ellipsoid(seed, 1e-3 * np.eye(env.dim))
    history = [ell]
    region = None
    for _ in range(params.max_iterations):
        order = sorted(range(len(blockers)), key=lambda k: float(np.min(ell.metric_norm(blockers[k].vertices))))
        normals, offsets = [], []
        for k in order:
            b = blockers[k]
            if normals and np.any(np.all(b.vertices @ np.array(normals).T >= np.array(offsets) - 1e-12, axis=0)):
                continue
            if b.is_region:
                x_star, dist = _closest_in_hpolytope(ell, b.hull)
            else:
                x_star, dist = _closest_in_hull(ell, b.vertices)
            if dist <= params.seed_rejection_tol:
                raise SeedRejected("ellipsoid center reached a blocker")
            a, off = _tangent_plane(ell, x_star)
            a, off = _snap_to_facet(a, off, x_star, b.hull, params.snap_tol)
            normals.append(a)
            offsets.append(off)
        A = np.vstack([bounds.A] + [np.atleast_2d(a) for a in normals])
        d = np.concatenate([bounds.d, offsets])
        candidate = HPolytope(A, d, check=False)
        if not point_in_hpolytope(candidate, seed, params.boundary_tol):
            break
        region = candidate
        new_ell = inscribed_ellipsoid(region)
        growth = np.exp(new_ell.log_det - ell.log_det) - 1.0
        ell = new_ell
        history.append(ell)
        if growth < params.termination_growth:
            break
    if region is None:
        raise SeedRejected("no region containing the seed could be formed")
    return region, history


def inflate_region(seed, env: Environment, existing: list[HPolytope], params: IrisParams | None = None) -> HPolytope:
    region, _ = _inflate(seed, env, existing, params or IrisParams())
    return region


def inflate_region_trace(seed, env, existing, params=None) -> tuple[HPolytope, list[Ellipsoid]]:
    """Like :func:`inflate_region` but also returns the ellipsoid after each step."""
    return _inflate(seed, env, existing, params or IrisParams())


def generate_regions(
    env: Environment,
    start,
    goal,
    n_samples: int,
    rng_seed: int,
    params: IrisParams | None = None,
) -> list[HPolytope]:
    """Seed at start, goal, then ``n_samples`` uniform samples over the bounds.

    The sample stream is drawn in one call so a run with more samples sees
    the same first samples as a run with fewer.
    """
    params = params or IrisParams()
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    hulls = env.obstacle_hulls()
    for name, p in (("start", start), ("goal", goal)):
        for k, hull in enumerate(hulls):
            if point_in_hpolytope(hull, p, 0.0) and np.min(hull.d - hull.A @ p) > params.seed_rejection_tol:
                raise TerminalInObstacle(f"{name} lies inside obstacle {k}")
    rng = np.random.default_rng(rng_seed)
    samples = rng.uniform(env.lo, env.hi, size=(n_samples, env.dim))
    regions: list[HPolytope] = []
    for seed in [start, goal, *samples]:
        if any(point_in_hpolytope(R, seed, params.seed_rejection_tol) for R in regions):
            continue
        try:
            region, _ = _inflate(seed, env, regions, params, hulls)
        except SeedRejected:
            continue
        try:
            _, radius = region.chebyshev_center()
        except GeometryError:
            continue
        if radius < params.min_region_radius:
            continue
        regions.append(region)
    log.info("generated %d regions from %d samples", len(regions), n_samples)
    return regions
