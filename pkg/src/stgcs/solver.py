"""Branch-and-bound over the relaxed indicators.

Every node solves the relaxation under its fixings, extracts a source-sink
path from the fractional flow and certifies it with the convex restriction
(the upper bound). Nodes are explored best-first by parent bound.
"""
from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .conic import Status, solve_conic
from .formulation import FormulationParams, Relaxation, VariableMap
from .graph import GcsGraph, Terminals
from .spline import Trajectory

log = logging.getLogger(__name__)

RETRY_TOL = 1e-7


class Infeasible(RuntimeError):
    pass


class DeadEnd(RuntimeError):
    pass


class NodeLimitExceeded(RuntimeError):
    pass


@dataclass
class BnBOptions:
    integrality_tol: float = 1e-4
    gap_tol: float = 1e-6
    max_nodes: int = 10000
    node_order: str = "best_first"
    branch_rule: str = "most_fractional_edge"
    path_threshold: float = 1e-3
    # geometric candidate paths restricted up front to seed the incumbent
    heuristic_paths: int = 50
    verbose: bool = False

    def __post_init__(self):
        for name in ("integrality_tol", "gap_tol"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.heuristic_paths < 0:
            raise ValueError("heuristic_paths must be >= 0")


@dataclass
class SolveStats:
    nodes_explored: int = 0
    relaxations_solved: int = 0
    restrictions_solved: int = 0
    root_bound: float = float("nan")
    relaxation_time: float = 0.0
    restriction_time: float = 0.0
    wall_time: float = 0.0
    incumbent_history: list = field(default_factory=list)
    bound_history: list = field(default_factory=list)
    max_flow_residual: float = 0.0


@dataclass
class Solution:
    path: list[int]
    trajectory: Trajectory
    control_points: list[np.ndarray]
    cost: float
    lower_bound: float
    stats: SolveStats
    node_limit_hit: bool = False
    inexact: bool = False


def extract_path(y: np.ndarray, g: GcsGraph, t: Terminals, threshold: float = 1e-3, vmap: VariableMap | None = None) -> list[int]:
    """Greedy walk from the source along the largest outgoing flow."""
    vm = vmap or VariableMap(g.num_vertices, g.num_edges, 1, g.dim)
    path = [t.source_id]
    visited = {t.source_id}
    while path[-1] != t.sink_id:
        best, best_val = None, threshold
        for e in g.out_edges(path[-1]):
            b = g.edges[e][1]
            val = y[vm.y_edge(e)]
            if b not in visited and val >= best_val and (best is None or val > best_val):
                best, best_val = b, val
        if best is None:
            raise DeadEnd(f"no admissible edge out of vertex {path[-1]}")
        path.append(best)
        visited.add(best)
    return path


def _chain(g: GcsGraph, path: list[int]) -> GcsGraph:
    for a, b in zip(path[:-1], path[1:]):
        if not g.has_edge(a, b):
            raise ValueError(f"({a}, {b}) is not an edge of the graph")
    if len(set(path)) != len(path):
        raise ValueError("path revisits a vertex")
    return GcsGraph([g.vertices[v] for v in path], [(k, k + 1) for k in range(len(path) - 1)])


def convex_restriction(g: GcsGraph, path: list[int], params: FormulationParams, t: Terminals) -> tuple[list[np.ndarray], float]:
    """Optimal control points and cost along a fixed source-sink chain.

    Raises :class:`Infeasible` when the chain admits no trajectory.
    """
    if path[0] != t.source_id or path[-1] != t.sink_id:
        raise ValueError("path must run from source to sink")
    chain = _chain(g, path)
    ct = Terminals(0, len(path) - 1, t.start, t.goal)
    relax = Relaxation(chain, ct, params)
    fix = {k: 1 for k in relax.vmap.y_indices()}
    prog = relax.program(fix)
    sol = solve_conic(prog)
    if sol.status is Status.NUMERICAL_ERROR:
        sol = solve_conic(prog, feas_tol=RETRY_TOL, gap_tol=RETRY_TOL)
    if sol.status is Status.INFEASIBLE:
        raise Infeasible("chain cannot satisfy the constraints")
    if not sol.optimal:
        raise Infeasible(f"restriction solve failed: {sol.status.value}")
    pts = [relax.vmap.control_points(sol.primal, k).copy() for k in range(len(path))]
    return pts, control_polygon_cost(pts)


def candidate_paths(
    g: GcsGraph,
    t: Terminals,
    k: int,
    edge_flow: np.ndarray | None = None,
    vertex_flow: np.ndarray | None = None,
) -> list[list[int]]:
    """Up to ``k`` simple source-sink paths, cheapest first.

    With relaxed flows an edge (a, b) costs ``-log y_e``, plus ``-10 log y_b``
    when vertex flows are given (vertex flows stay informative when edge
    flow is spread over short cycles). Without flows, the xy distance
    between region centers is used.
    """
    if k == 0:
        return []
    if edge_flow is None:
        centers = [H.chebyshev_center()[0][:2] for H in g.vertices]
        weight = lambda e, a, b: float(np.linalg.norm(centers[a] - centers[b]))  # noqa: E731
    else:
        ye = -np.log(np.clip(edge_flow, 1e-9, 1.0))
        yv = np.zeros(g.num_vertices) if vertex_flow is None else -10.0 * np.log(np.clip(vertex_flow, 1e-9, 1.0))
        weight = lambda e, a, b: float(ye[e] + yv[b])  # noqa: E731
    G = nx.DiGraph()
    G.add_nodes_from(range(g.num_vertices))
    for e, (a, b) in enumerate(g.edges):
        if b != t.source_id and a != t.sink_id:
            G.add_edge(a, b, weight=weight(e, a, b))
    out = []
    try:
        for path in nx.shortest_simple_paths(G, t.source_id, t.sink_id, weight="weight"):
            out.append(list(path))
            if len(out) == k:
                break
    except nx.NetworkXNoPath:
        pass
    return out


def control_polygon_cost(points: list[np.ndarray]) -> float:
    return float(sum(np.sum(np.linalg.norm(np.diff(P[:, :2], axis=0), axis=1)) for P in points))


def flow_residual(y: np.ndarray, g: GcsGraph, t: Terminals) -> float:
    worst = 0.0
    V = g.num_vertices
    for v in range(V):
        ins = sum(y[V + e] for e in g.in_edges(v)) + (1.0 if v == t.source_id else 0.0)
        outs = sum(y[V + e] for e in g.out_edges(v)) + (1.0 if v == t.sink_id else 0.0)
        worst = max(worst, abs(ins - y[v]), abs(outs - y[v]))
    return worst


@dataclass(order=True)
class _Node:
    # bounds closer than gap_tol count as tied; ties go deepest first
    key: tuple
    bound: float = field(compare=False)
    seq: int = field(compare=False)
    fix: dict = field(compare=False)


def _node(bound: float, seq: int, fix: dict, gap_tol: float) -> _Node:
    level = np.floor(bound / gap_tol) if np.isfinite(bound) else -np.inf
    return _Node((level, -len(fix), -seq), bound, seq, fix)


def solve_gcs(g: GcsGraph, t: Terminals, params: FormulationParams, opts: BnBOptions | None = None) -> Solution:
    opts = opts or BnBOptions()
    t_wall = time.perf_counter()
    relax = Relaxation(g, t, params)
    vm = relax.vmap
    stats = SolveStats()
    edge_vars = [vm.y_edge(e) for e in range(g.num_edges)]

    best_cost, best_path, best_pts = np.inf, None, None
    inexact = False
    seq = 0
    heap = [_node(-np.inf, seq, {}, opts.gap_tol)]
    # smallest bound among nodes closed without being branched
    closed = np.inf
    hit_limit = False
    restricted: dict[tuple, tuple | None] = {}

    def try_path(path):
        nonlocal best_cost, best_path, best_pts
        key = tuple(path)
        if key not in restricted:
            tic = time.perf_counter()
            try:
                restricted[key] = convex_restriction(g, path, params, t)
                stats.restrictions_solved += 1
            except Infeasible:
                restricted[key] = None
            stats.restriction_time += time.perf_counter() - tic
        if restricted[key] is not None and restricted[key][1] < best_cost:
            best_pts, best_cost = restricted[key]
            best_path = list(path)
            stats.incumbent_history.append(best_cost)

    while heap:
        if stats.nodes_explored >= opts.max_nodes:
            hit_limit = True
            break
        node = heapq.heappop(heap)
        if node.bound >= best_cost - opts.gap_tol:
            closed = min(closed, node.bound)
            continue
        stats.nodes_explored += 1
        tic = time.perf_counter()
        prog = relax.program(node.fix)
        sol = solve_conic(prog)
        if sol.status is Status.NUMERICAL_ERROR:
            # interior-point stalls just short of 1e-8 on larger graphs
            sol = solve_conic(prog, feas_tol=RETRY_TOL, gap_tol=RETRY_TOL)
        stats.relaxation_time += time.perf_counter() - tic
        stats.relaxations_solved += 1
        if sol.status is Status.INFEASIBLE:
            continue
        if not sol.optimal:
            inexact = True
            closed = min(closed, node.bound)
            log.warning("node %d: relaxation %s", node.seq, sol.status.value)
            if node.seq == 0:
                for path in candidate_paths(g, t, opts.heuristic_paths):
                    try_path(path)
            continue
        y = sol.primal[: vm.num_vertices + vm.num_edges]
        bound = sol.objective_value
        stats.max_flow_residual = max(stats.max_flow_residual, flow_residual(y, g, t))
        if node.seq == 0:
            stats.root_bound = bound
        if node.seq == 0:
            yv, ye = y[: vm.num_vertices], y[vm.num_vertices :]
            paths = candidate_paths(g, t, opts.heuristic_paths, ye)
            paths += candidate_paths(g, t, opts.heuristic_paths, ye, yv)
        else:
            paths = candidate_paths(g, t, opts.heuristic_paths // 5, y[vm.num_vertices :])
        for path in paths:
            try_path(path)

        path = None
        try:
            path = extract_path(y, g, t, opts.path_threshold, vm)
        except DeadEnd:
            pass
        if path is not None:
            try_path(path)

        frac = np.minimum(y[edge_vars], 1.0 - y[edge_vars]) if edge_vars else np.zeros(0)
        max_frac = float(frac.max()) if frac.size else 0.0
        if opts.verbose:
            log.info("node %d bound %.6f incumbent %.6f max_frac %.3g", node.seq, bound, best_cost, max_frac)

        branch = None
        if bound < best_cost - opts.gap_tol:
            free = [j for j in range(len(edge_vars)) if edge_vars[j] not in node.fix]
            if max_frac > opts.integrality_tol:
                branch = max(free, key=lambda j: (frac[j], -j))
            else:
                # integral flow still below the incumbent: a detached cycle
                # carries flow, so cut one of its edges
                on_path = set(zip(path[:-1], path[1:])) if path else set()
                cands = [j for j in free if y[edge_vars[j]] > 0.5 and g.edges[j] not in on_path]
                branch = cands[0] if cands else None
        if branch is None:
            closed = min(closed, bound)
        else:
            for val in (0, 1):
                seq += 1
                heapq.heappush(heap, _node(bound, seq, {**node.fix, edge_vars[branch]: val}, opts.gap_tol))
        lower = min(best_cost, closed, min((n.bound for n in heap), default=np.inf))
        prev = stats.bound_history[-1] if stats.bound_history else -np.inf
        stats.bound_history.append(max(prev, lower))

    if best_path is None:
        if hit_limit:
            raise NodeLimitExceeded("node limit reached without an incumbent")
        raise Infeasible("no feasible source-sink path in the graph")
    lower = min(best_cost, closed, min((n.bound for n in heap), default=np.inf))
    stats.wall_time = time.perf_counter() - t_wall
    traj = Trajectory(tuple(best_pts), spacetime=params.mode.dim == 3)
    return Solution(best_path, traj, best_pts, best_cost, lower, stats, hit_limit, inexact)
