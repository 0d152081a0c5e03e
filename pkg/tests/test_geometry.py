import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stgcs.geometry import (
    ConvexPolygon2D,
    GeometryError,
    HPolytope,
    extrude_obstacle,
    hpolytopes_touch,
    obstacle_cross_section,
    point_in_hpolytope,
    point_in_polygon,
    square,
)

UNIT = HPolytope.from_box([0, 0], [1, 1])
RECT = ConvexPolygon2D([[0.3, 0.2], [0.6, 0.2], [0.6, 0.4], [0.3, 0.4]])


@pytest.mark.parametrize(
    "p, tol, inside",
    [((0.5, 0.5), 0.0, True), ((1.5, 0.5), 0.0, False), ((1.0, 0.5), 1e-9, True)],
)
def test_point_in_hpolytope(p, tol, inside):
    assert point_in_hpolytope(UNIT, p, tol) is inside


def test_point_dimension_mismatch():
    with pytest.raises(GeometryError):
        point_in_hpolytope(UNIT, (0.5, 0.5, 0.5))


def test_normals_unit_length():
    H = HPolytope([[3.0, 4.0], [-1.0, 0.0], [0.0, -2.0]], [5.0, 0.0, 0.0])
    assert np.allclose(np.linalg.norm(H.A, axis=1), 1.0, atol=1e-9)
    assert np.allclose(H.d, [1.0, 0.0, 0.0])


def test_empty_polytope_rejected():
    with pytest.raises(GeometryError):
        HPolytope([[1.0], [-1.0]], [0.0, -1.0])  # x <= 0 and x >= 1


@pytest.mark.parametrize(
    "other, touching",
    [
        (HPolytope.from_box([1, 0], [2, 1]), True),
        (HPolytope.from_box([1.5, 0], [2.5, 1]), False),
        (HPolytope.from_box([0, 0], [1, 1]), True),
        (HPolytope.from_box([1, 1], [2, 2]), True),  # corner contact
    ],
)
def test_touch(other, touching):
    assert hpolytopes_touch(UNIT, other) is touching
    assert hpolytopes_touch(other, UNIT) is touching


def test_touch_respects_tolerance():
    near = HPolytope.from_box([1 + 5e-8, 0], [2, 1])
    far = HPolytope.from_box([1 + 5e-7, 0], [2, 1])
    assert hpolytopes_touch(UNIT, near)
    assert not hpolytopes_touch(UNIT, far)


def test_extrude_moving_square():
    o = extrude_obstacle(square([0, 0.5], 0.2), square([1, 0.5], 0.2), 0.0, 1.0)
    assert o.prism_vertices.shape == (8, 3)
    assert np.allclose(o.prism_vertices[0], [-0.1, 0.4, 0.0])
    assert np.allclose(o.prism_vertices[4], [0.9, 0.4, 1.0])


def test_extrude_static_rectangle_is_vertical():
    o = extrude_obstacle(RECT, RECT, 0.0, 1.0)
    assert o.is_static
    assert np.array_equal(o.prism_vertices[:4, :2], o.prism_vertices[4:, :2])


def test_extrude_needs_positive_duration():
    with pytest.raises(GeometryError):
        extrude_obstacle(RECT, RECT, 1.0, 1.0)


def test_extrude_needs_matching_vertex_counts():
    tri = ConvexPolygon2D([[0, 0], [1, 0], [0, 1]])
    with pytest.raises(GeometryError):
        extrude_obstacle(RECT, tri, 0.0, 1.0)


def test_cross_section_midway():
    o = extrude_obstacle(square([0, 0.5], 0.2), square([1, 0.5], 0.2), 0.0, 1.0)
    mid = obstacle_cross_section(o, 0.5)
    assert np.allclose(mid.vertices.mean(axis=0), [0.5, 0.5])
    assert np.allclose(mid.vertices, square([0.5, 0.5], 0.2).vertices)


def test_cross_section_outside_lifetime():
    o = extrude_obstacle(RECT, RECT, 0.0, 1.0)
    with pytest.raises(GeometryError):
        obstacle_cross_section(o, 1.5)


def test_polygon_orientation_normalised():
    cw = ConvexPolygon2D([[0, 0], [0, 1], [1, 1], [1, 0]])
    e = np.roll(cw.vertices, -1, axis=0) - cw.vertices
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    assert np.all(cross > 0)


@pytest.mark.parametrize(
    "verts",
    [
        [[0, 0], [1, 0]],
        [[0, 0], [1, 0], [2, 0]],
        [[0, 0], [2, 0], [0, 2], [2, 2]],  # self-intersecting order
    ],
)
def test_bad_polygons(verts):
    with pytest.raises(GeometryError):
        ConvexPolygon2D(verts)


@pytest.mark.parametrize(
    "p, margin, inside",
    [
        ((0.45, 0.3), 0.0, True),
        ((0.65, 0.3), 0.1, True),  # 0.05 outside the right facet
        ((0.65, 0.3), 0.0, False),
        ((0.3, 0.2), 0.0, True),  # a vertex
    ],
)
def test_point_in_polygon(p, margin, inside):
    assert point_in_polygon(RECT, p, margin) is inside


def test_polygon_distance_at_corner():
    assert RECT.distance((0.6 + 0.03, 0.4 + 0.04)) == pytest.approx(0.05)


def test_chebyshev_and_vertices():
    H = HPolytope.from_box([0, 0, 0], [2, 1, 1])
    c, r = H.chebyshev_center()
    assert r == pytest.approx(0.5)
    assert H.vertices.shape == (8, 3)


def test_dict_round_trip():
    H = HPolytope.from_vertices([[0, 0], [2, 0], [1, 1.5]])
    back = HPolytope.from_dict(H.to_dict())
    assert np.array_equal(back.A, H.A) and np.array_equal(back.d, H.d)


points_2d = st.lists(
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=4, max_size=12, unique=True
)


@settings(max_examples=40, deadline=None)
@given(points_2d)
def test_vertices_inside_their_hull(pts):
    pts = np.array(pts)
    # skip nearly collinear clouds, which have no 2D hull
    if np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-3) < 2:
        return
    try:
        H = HPolytope.from_vertices(pts)
    except GeometryError:
        return
    for p in pts:
        assert point_in_hpolytope(H, p, 1e-9)


boxes = st.tuples(
    st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 2), st.floats(0.1, 2)
).map(lambda t: HPolytope.from_box([t[0], t[1]], [t[0] + t[2], t[1] + t[3]]))


@settings(max_examples=40, deadline=None)
@given(boxes, boxes)
def test_touch_symmetric(H1, H2):
    assert hpolytopes_touch(H1, H2) == hpolytopes_touch(H2, H1)


convex_quads = st.tuples(
    st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 1), st.floats(0, 2 * np.pi)
).map(
    lambda t: ConvexPolygon2D(
        np.array([t[0], t[1]])
        + t[2] * np.column_stack([np.cos(t[3] + np.arange(4) * np.pi / 2), np.sin(t[3] + np.arange(4) * np.pi / 2)])
    )
)


@settings(max_examples=40, deadline=None)
@given(convex_quads, st.tuples(st.floats(-2, 2), st.floats(-2, 2)), st.floats(0, 1))
def test_cross_sections_convex_and_exact_at_ends(poly, shift, frac):
    end = poly.translated(shift)
    o = extrude_obstacle(poly, end, 0.0, 2.0)
    assert obstacle_cross_section(o, 0.0) is poly
    assert np.array_equal(obstacle_cross_section(o, 2.0).vertices, end.vertices)
    mid = obstacle_cross_section(o, 2.0 * frac)
    assert len(mid) == len(poly)
