import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stgcs.formulation import FormulationParams, Mode, VariableMap
from stgcs.geometry import HPolytope
from stgcs.graph import GcsGraph, Terminals, build_graph, locate_terminals
from stgcs.solver import (
    BnBOptions,
    DeadEnd,
    Infeasible,
    convex_restriction,
    extract_path,
    solve_gcs,
)
from stgcs.spline import arc_length_bounds

from conftest import brute_force, grid_graph

ST = FormulationParams(order=3, v_max=2.0, epsilon=1e-3, mode=Mode.SPACETIME_3D)
STATIC = FormulationParams(order=3, v_max=None, epsilon=None, mode=Mode.STATIC_2D)


def chain3():
    # A -> B -> C plus a side branch A -> D
    boxes = [HPolytope.from_box([0, 0], [1, 1]) for _ in range(4)]
    g = GcsGraph(boxes, [(0, 1), (1, 2), (0, 3)])
    return g, Terminals(0, 2, np.zeros(2), np.zeros(2))


def flows(g, edge_vals):
    vm = VariableMap(g.num_vertices, g.num_edges, 1, g.dim)
    y = np.zeros(vm.num_core_vars)
    for e, val in edge_vals.items():
        y[vm.y_edge(e)] = val
    return y


def test_extract_integral_path():
    g, t = chain3()
    assert extract_path(flows(g, {0: 1.0, 1: 1.0}), g, t) == [0, 1, 2]


def test_extract_follows_larger_flow():
    g, t = chain3()
    y = flows(g, {0: 0.6, 1: 0.6, 2: 0.4})
    assert extract_path(y, g, t) == [0, 1, 2]
    g2 = GcsGraph(g.vertices, [(0, 3), (3, 2), (0, 1), (1, 2)])
    y2 = flows(g2, {0: 0.6, 1: 0.6, 2: 0.4, 3: 0.4})
    assert extract_path(y2, g2, t) == [0, 3, 2]


def test_extract_dead_end():
    g, t = chain3()
    with pytest.raises(DeadEnd):
        extract_path(flows(g, {0: 5e-4, 2: 1e-4}), g, t)


def test_restriction_straight_line():
    g = GcsGraph([HPolytope.from_box([0, 0, 0], [1, 1, 1])])
    t = Terminals(0, 0, np.array([0.5, 0, 0]), np.array([0.5, 1, 1]))
    pts, cost = convex_restriction(g, [0], ST, t)
    assert cost == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(pts[0][:, 0], 0.5, atol=1e-6)


def test_restriction_fixture_chain(planned):
    res = planned("spacetime_rectangle")
    _, cost = convex_restriction(res.graph, res.solution.path, res.scenario.formulation_params(), res.terminals)
    assert cost == pytest.approx(1.0318, abs=1e-3)


def test_restriction_too_slow_infeasible():
    g = GcsGraph([HPolytope.from_box([0, 0, 0], [1, 1, 1])])
    t = Terminals(0, 0, np.array([0.5, 0, 0]), np.array([0.5, 1, 1]))
    slow = FormulationParams(order=3, v_max=0.9, epsilon=1e-3, mode=Mode.SPACETIME_3D)
    with pytest.raises(Infeasible):
        convex_restriction(g, [0], slow, t)


def test_unreachable_sink():
    g = build_graph([HPolytope.from_box([0, 0], [1, 1]), HPolytope.from_box([2, 0], [3, 1])])
    t = locate_terminals(g, [0.5, 0.5], [2.5, 0.5])
    with pytest.raises(Infeasible):
        solve_gcs(g, t, STATIC)


@pytest.mark.parametrize(
    "name, expected", [("spacetime_rectangle", 1.0318), ("static_rectangle", 1.0318), ("moving_square", 1.0)]
)
def test_fixture_costs(planned, name, expected):
    sol = planned(name).solution
    assert sol.cost == pytest.approx(expected, abs=1e-3)
    assert sol.cost >= sol.lower_bound - 1e-6
    assert not sol.node_limit_hit


def test_solution_invariants(planned):
    for name in ("static_rectangle", "spacetime_rectangle", "moving_square"):
        res = planned(name)
        sol, g, t = res.solution, res.graph, res.terminals
        assert sol.path[0] == t.source_id and sol.path[-1] == t.sink_id
        assert all(g.has_edge(a, b) for a, b in zip(sol.path[:-1], sol.path[1:]))
        assert sol.cost >= sol.stats.root_bound - 1e-6
        assert sol.cost == pytest.approx(arc_length_bounds(sol.trajectory)[1], abs=1e-6)
        cont, diff = sol.trajectory.junction_residuals()
        assert cont <= 1e-6 and diff <= 1e-6


def test_spacetime_outputs_time_increasing(planned):
    for name in ("spacetime_rectangle", "moving_square"):
        traj = planned(name).solution.trajectory
        s = np.linspace(0, len(traj.segments), 2001)
        times = np.array([traj.evaluate(r)[-1] for r in s])
        assert np.all(np.diff(times) > 0)


def test_histories_monotone(planned):
    for name in ("static_rectangle", "spacetime_rectangle", "moving_square"):
        st_ = planned(name).solution.stats
        inc, bnd = st_.incumbent_history, st_.bound_history
        assert all(b <= a + 1e-12 for a, b in zip(inc, inc[1:]))
        assert all(b >= a - 1e-9 for a, b in zip(bnd, bnd[1:]))


def test_deterministic(planned):
    res = planned("spacetime_rectangle")
    opts = res.scenario.bnb_options()
    a = solve_gcs(res.graph, res.terminals, res.scenario.formulation_params(), opts)
    b = solve_gcs(res.graph, res.terminals, res.scenario.formulation_params(), opts)
    assert a.path == b.path and a.cost == b.cost


def test_options_validation():
    with pytest.raises(ValueError):
        BnBOptions(gap_tol=0.0)
    with pytest.raises(ValueError):
        BnBOptions(max_nodes=0)


# grid graphs small enough to enumerate every simple path

GRIDS_2D = [
    ([0, 0.5, 1], [0, 0.5, 1], {(1, 0)}, [0.25, 0.1], [0.9, 0.6]),
    ([0, 0.3, 0.7, 1], [0, 0.4, 1], {(1, 0)}, [0.1, 0.1], [0.9, 0.1]),
    ([0, 0.2, 0.8, 1], [0, 0.5, 1], {(1, 1)}, [0.1, 0.9], [0.9, 0.9]),
]


@pytest.mark.parametrize("heuristic", [50, 0])
@pytest.mark.parametrize("xs, ys, removed, start, goal", GRIDS_2D)
def test_matches_brute_force_2d(xs, ys, removed, start, goal, heuristic):
    g = grid_graph(xs, ys, removed)
    assert g.num_vertices <= 6
    t = locate_terminals(g, start, goal)
    sol = solve_gcs(g, t, STATIC, BnBOptions(heuristic_paths=heuristic))
    assert sol.cost == pytest.approx(brute_force(g, t, STATIC), abs=1e-5)
    assert not sol.node_limit_hit


GRIDS_3D = [
    ([0, 0.5, 1], [0, 1], [0, 0.5, 1], set(), [0.2, 0.5, 0.0], [0.8, 0.5, 1.0]),
    ([0, 0.5, 1], [0, 0.5, 1], [0, 1], {(1, 0, 0)}, [0.25, 0.1, 0.0], [0.9, 0.6, 1.0]),
]


@pytest.mark.parametrize("heuristic", [50, 0])
@pytest.mark.parametrize("xs, ys, ts, removed, start, goal", GRIDS_3D)
def test_matches_brute_force_3d(xs, ys, ts, removed, start, goal, heuristic):
    g = grid_graph(xs, ys, removed, ts)
    assert g.num_vertices <= 6
    t = locate_terminals(g, start, goal)
    sol = solve_gcs(g, t, ST, BnBOptions(heuristic_paths=heuristic))
    assert sol.cost == pytest.approx(brute_force(g, t, ST), abs=1e-5)


@settings(max_examples=10, deadline=None)
@given(
    st.floats(0.2, 0.8),
    st.floats(0.2, 0.8),
    st.integers(0, 3),
    st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99)),
    st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99)),
)
def test_brute_force_property(x, y, hole, start, goal):
    cells = [(0, 0), (0, 1), (1, 0), (1, 1)]
    g = grid_graph([0, x, 1], [0, y, 1], {cells[hole]})
    try:
        t = locate_terminals(g, start, goal)
    except LookupError:
        return
    sol = solve_gcs(g, t, STATIC)
    assert sol.cost == pytest.approx(brute_force(g, t, STATIC), abs=1e-5)
