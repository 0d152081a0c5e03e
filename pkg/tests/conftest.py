from itertools import product
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

from stgcs.geometry import HPolytope
from stgcs.graph import GcsGraph, Terminals, build_graph, locate_terminals
from stgcs.pipeline import plan
from stgcs.scenario import load_scenario
from stgcs.solver import Infeasible, convex_restriction

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
FIXTURES = ("static_rectangle", "spacetime_rectangle", "moving_square")


@pytest.fixture(scope="session")
def scenario_path():
    return lambda name: SCENARIOS / f"{name}.json"


@pytest.fixture(scope="session")
def planned():
    """Planned results of the three scenario fixtures, computed once."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = plan(load_scenario(SCENARIOS / f"{name}.json"))
        return cache[name]

    return get


def grid_graph(xs, ys, removed=(), ts=None):
    """Boxes of a tensor grid minus the ``removed`` cells, as a GcsGraph.

    ``ts`` adds a time axis split (space-time boxes).
    """
    cells = []
    axes = [xs, ys] + ([ts] if ts is not None else [])
    for idx in product(*[range(len(a) - 1) for a in axes]):
        if idx in removed:
            continue
        lo = [a[i] for a, i in zip(axes, idx)]
        hi = [a[i + 1] for a, i in zip(axes, idx)]
        cells.append(HPolytope.from_box(lo, hi))
    return build_graph(cells)


def ring():
    # four boxes around a hole, each touching exactly two others
    return [
        HPolytope.from_box([0.0, 0.0], [0.3, 1.0]),
        HPolytope.from_box([0.3, 0.0], [0.6, 0.2]),
        HPolytope.from_box([0.6, 0.0], [1.0, 1.0]),
        HPolytope.from_box([0.3, 0.4], [0.6, 1.0]),
    ]


def brute_force(g: GcsGraph, t: Terminals, params):
    """Cheapest convex restriction over every simple source-sink path."""
    D = nx.DiGraph()
    D.add_nodes_from(range(g.num_vertices))
    D.add_edges_from(e for e in g.edges if e[1] != t.source_id and e[0] != t.sink_id)
    best = np.inf
    for path in nx.all_simple_paths(D, t.source_id, t.sink_id):
        try:
            best = min(best, convex_restriction(g, path, params, t)[1])
        except Infeasible:
            pass
    if t.source_id == t.sink_id:
        best = min(best, convex_restriction(g, [t.source_id], params, t)[1])
    return best


def terminals_for(g, start, goal):
    return locate_terminals(g, start, goal)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line; all lines are repeated in the terminal summary."""

    def report(name: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
