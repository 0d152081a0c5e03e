import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from stgcs.geometry import (
    ConvexPolygon2D,
    GeometryError,
    HPolytope,
    extrude_obstacle,
    point_in_hpolytope,
    square,
)
from stgcs.iris import (
    Ellipsoid,
    Environment,
    IrisParams,
    SeedRejected,
    TerminalInObstacle,
    generate_regions,
    inflate_region,
    inflate_region_trace,
    inscribed_ellipsoid,
    separating_hyperplane,
)

RECT = ConvexPolygon2D([[0.3, 0.2], [0.6, 0.2], [0.6, 0.4], [0.3, 0.4]])


def moving_env():
    o = extrude_obstacle(square([0, 0.5], 0.2), square([1, 0.5], 0.2), 0.0, 1.0)
    return Environment([0, 0, 0], [1, 1, 1], [o])


def static_env():
    return Environment([0, 0], [1, 1], [RECT])


def prism_grid(obstacle, n=11):
    """Dense samples over a space-time prism: n^3 points."""
    pts = []
    for t in np.linspace(obstacle.t_start, obstacle.t_end, n):
        f = (t - obstacle.t_start) / (obstacle.t_end - obstacle.t_start)
        V = (1 - f) * obstacle.start_polygon.vertices + f * obstacle.end_polygon.vertices
        w = np.linspace(0, 1, n)
        for a in w:
            for b in w:
                # bilinear fill of the quadrilateral cross section
                p = (1 - a) * ((1 - b) * V[0] + b * V[3]) + a * ((1 - b) * V[1] + b * V[2])
                pts.append([p[0], p[1], t])
    return np.array(pts)


def strictly_overlap(H1, H2, delta=1e-6):
    A = np.vstack([H1.A, H2.A])
    d = np.concatenate([H1.d, H2.d]) - delta
    res = linprog(np.zeros(A.shape[1]), A_ub=A, b_ub=d, bounds=[(None, None)] * A.shape[1], method="highs")
    return res.status == 0


def test_mvie_unit_square():
    e = inscribed_ellipsoid(HPolytope.from_box([0, 0], [1, 1]))
    assert np.allclose(e.center, [0.5, 0.5], atol=1e-6)
    assert np.allclose(e.shape, 0.5 * np.eye(2), atol=1e-5)


def test_mvie_box():
    e = inscribed_ellipsoid(HPolytope.from_box([0, 0], [2, 1]))
    assert np.allclose(e.center, [1.0, 0.5], atol=1e-6)
    assert np.allclose(np.sort(np.linalg.eigvalsh(e.shape)), [0.5, 1.0], atol=1e-5)


def test_mvie_unbounded():
    with pytest.raises(GeometryError):
        inscribed_ellipsoid(HPolytope([[-1.0, 0.0]], [0.0]))


def test_mvie_triangle_volume():
    # the maximum-volume ellipse in a triangle has area pi/(3 sqrt 3) times the triangle's
    tri = HPolytope.from_vertices([[0, 0], [1, 0], [0, 1]])
    e = inscribed_ellipsoid(tri)
    area = np.pi * np.exp(e.log_det)
    assert area == pytest.approx(np.pi / (3 * np.sqrt(3)) * 0.5, rel=1e-5)
    assert np.allclose(e.center, [1 / 3, 1 / 3], atol=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_mvie_stays_inside(seed):
    rng = np.random.default_rng(seed)
    H = HPolytope.from_vertices(rng.normal(size=(10, 3)))
    e = inscribed_ellipsoid(H)
    # support function of the ellipsoid along each facet normal
    lhs = np.linalg.norm(H.A @ e.shape, axis=1) + H.A @ e.center
    assert np.all(lhs <= H.d + 1e-7)


def test_separating_plane_unit_ball():
    e = Ellipsoid(np.zeros(2), np.eye(2))
    a, b = separating_hyperplane(e, [[2, 0], [3, 1], [3, -1]])
    a_unit = a / np.linalg.norm(a)
    assert np.allclose(a_unit, [1, 0], atol=1e-6)
    assert b / np.linalg.norm(a) == pytest.approx(2.0, abs=1e-6)


def test_separating_plane_center_inside():
    e = Ellipsoid(np.array([2.5, 0.0]), np.eye(2))
    with pytest.raises(SeedRejected):
        separating_hyperplane(e, [[2, 0], [3, 1], [3, -1]])


def test_separating_plane_uses_metric():
    # a wide ellipse: the metric-closest point of a slanted segment differs from the Euclidean one
    e = Ellipsoid(np.zeros(2), np.diag([4.0, 1.0]))
    a, b = separating_hyperplane(e, [[2, 2], [4, 1.5]])
    # the plane touches the obstacle and keeps the center on its side
    assert b > 0
    V = np.array([[2, 2], [4, 1.5]])
    assert np.min(V @ a) == pytest.approx(b, abs=1e-6)


def test_empty_environment_returns_bounds():
    env = Environment([0, 0], [1, 2])
    R = inflate_region([0.2, 0.3], env, [])
    lo = R.vertices.min(axis=0)
    hi = R.vertices.max(axis=0)
    assert np.allclose(lo, [0, 0], atol=1e-9) and np.allclose(hi, [1, 2], atol=1e-9)
    assert len(R.d) == 4


def test_seed_in_obstacle_rejected():
    with pytest.raises(SeedRejected):
        inflate_region([0.45, 0.3], static_env(), [])


def test_seed_in_existing_region_rejected():
    env = Environment([0, 0], [1, 1])
    with pytest.raises(SeedRejected):
        inflate_region([0.5, 0.5], env, [HPolytope.from_box([0.4, 0.4], [0.6, 0.6])])


def test_region_beside_moving_obstacle_is_free():
    env = moving_env()
    R = inflate_region([0.5, 0.9, 0.5], env, [])
    assert point_in_hpolytope(R, [0.5, 0.9, 0.5], 1e-9)
    grid = prism_grid(env.obstacles[0])
    inside = (grid @ R.A.T) < R.d - 1e-7
    assert not np.any(np.all(inside, axis=1))


def test_terminal_in_obstacle():
    with pytest.raises(TerminalInObstacle):
        generate_regions(static_env(), [0.45, 0.3], [0.5, 1.0], 5, 0)


def test_zero_samples_seeds_terminals_only():
    env = static_env()
    regions = generate_regions(env, [0.5, 0.0], [0.5, 1.0], 0, 0)
    assert 1 <= len(regions) <= 2
    assert point_in_hpolytope(regions[0], [0.5, 0.0], 1e-9)
    assert any(point_in_hpolytope(R, [0.5, 1.0], 1e-9) for R in regions)


def test_open_box_single_region():
    regions = generate_regions(Environment([0, 0], [1, 1]), [0.1, 0.1], [0.9, 0.9], 0, 0)
    assert len(regions) == 1


def test_deterministic():
    env = moving_env()
    r1 = generate_regions(env, [0.5, 0, 0], [0.5, 1, 1], 30, 7)
    r2 = generate_regions(env, [0.5, 0, 0], [0.5, 1, 1], 30, 7)
    assert len(r1) == len(r2)
    for a, b in zip(r1, r2):
        assert np.array_equal(a.A, b.A) and np.array_equal(a.d, b.d)


def test_prefix_consistent_sampling():
    env = static_env()
    small = generate_regions(env, [0.5, 0.0], [0.5, 1.0], 10, 3)
    large = generate_regions(env, [0.5, 0.0], [0.5, 1.0], 40, 3)
    assert len(large) >= len(small)
    for a, b in zip(small, large):
        assert np.array_equal(a.A, b.A) and np.array_equal(a.d, b.d)


@pytest.fixture(scope="module")
def moving_regions():
    env = moving_env()
    return env, generate_regions(env, [0.5, 0, 0], [0.5, 1, 1], 40, 0)


def test_regions_collision_free(moving_regions):
    env, regions = moving_regions
    grid = prism_grid(env.obstacles[0])
    for R in regions:
        inside = np.all(grid @ R.A.T < R.d - 1e-7, axis=1)
        assert not np.any(inside)


def test_regions_pairwise_disjoint_interiors(moving_regions):
    _, regions = moving_regions
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            assert not strictly_overlap(regions[i], regions[j])


def test_terminals_covered(moving_regions):
    _, regions = moving_regions
    assert point_in_hpolytope(regions[0], [0.5, 0, 0], 1e-9)
    assert any(point_in_hpolytope(R, [0.5, 1, 1], 1e-9) for R in regions)


def test_grid_sampled_environment_regions_free():
    # several static obstacles, checked against a dense point grid of each
    obstacles = [square([0.25, 0.5], 0.2), square([0.7, 0.3], 0.15), ConvexPolygon2D([[0.5, 0.7], [0.8, 0.75], [0.6, 0.95]])]
    env = Environment([0, 0], [1, 1], obstacles)
    regions = generate_regions(env, [0.05, 0.05], [0.95, 0.95], 25, 1)
    w = np.linspace(0, 1, 32)
    for o in obstacles:
        V = o.vertices
        pts = np.array([V.mean(axis=0) + (1 - s) * (V[k] - V.mean(axis=0)) * r for k in range(len(V)) for s in w for r in w])
        for R in regions:
            assert not np.any(np.all(pts @ R.A.T < R.d - 1e-7, axis=1))


@pytest.mark.parametrize("seed", [[0.1, 0.1], [0.8, 0.5], [0.45, 0.6]])
def test_ellipsoid_volume_nondecreasing(seed):
    _, history = inflate_region_trace(seed, static_env(), [], IrisParams(max_iterations=10, termination_growth=1e-6))
    logdets = [e.log_det for e in history]
    assert all(b >= a - 1e-9 for a, b in zip(logdets, logdets[1:]))


def test_params_validation():
    with pytest.raises(ValueError):
        IrisParams(max_iterations=0)
    with pytest.raises(ValueError):
        IrisParams(termination_growth=0.0)


def test_environment_rejects_moving_obstacle_in_2d():
    o = extrude_obstacle(square([0, 0.5], 0.2), square([1, 0.5], 0.2), 0.0, 1.0)
    with pytest.raises(GeometryError):
        Environment([0, 0], [1, 1], [o])
