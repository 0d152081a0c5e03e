"""Relaxed mixed-integer conic program over a graph of convex sets.

Every vertex carries a Bezier curve of order ``n``; the bilinear products of
indicators and control points are replaced by ``z = y * x`` so that each
constraint is written in multiplied form (``A z <= d y``) and stays convex
for fractional ``y``. Edge constraints follow one recipe: write the constraint
for a single active edge, multiply by ``y_e``, sum over a vertex's edges,
simplify with flow conservation and substitute the bilinear variables.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .conic import ConeKind, ConicProgram
from .graph import GcsGraph, Terminals

Fixings = dict  # y variable index -> 0 or 1


class Mode(enum.Enum):
    STATIC_2D = "static"
    SPACETIME_3D = "spacetime"

    @property
    def dim(self) -> int:
        return 2 if self is Mode.STATIC_2D else 3


class FormulationError(ValueError):
    pass


@dataclass(frozen=True)
class FormulationParams:
    order: int = 3
    v_max: float | None = None
    epsilon: float | None = 1e-3
    mode: Mode = Mode.SPACETIME_3D

    def __post_init__(self):
        if self.order < 1:
            raise FormulationError("spline order must be >= 1")
        if self.mode is Mode.SPACETIME_3D:
            if self.v_max is None or self.v_max <= 0:
                raise FormulationError("space-time mode needs v_max > 0")
            if self.epsilon is None or self.epsilon <= 0:
                raise FormulationError("space-time mode needs epsilon > 0")


@dataclass(frozen=True)
class VariableMap:
    """Index layout: y_v | y_e | z_ctrl | z_edge_first | z_edge_diff | cost aux."""

    num_vertices: int
    num_edges: int
    order: int
    dim: int

    @property
    def _z0(self) -> int:
        return self.num_vertices + self.num_edges

    @property
    def _first0(self) -> int:
        return self._z0 + self.num_vertices * (self.order + 1) * self.dim

    @property
    def _diff0(self) -> int:
        return self._first0 + self.num_edges * self.dim

    @property
    def _cost0(self) -> int:
        return self._diff0 + self.num_edges * self.dim

    @property
    def num_core_vars(self) -> int:
        return self._cost0

    @property
    def num_vars(self) -> int:
        return self._cost0 + self.num_vertices * self.order

    def y_vertex(self, v: int) -> int:
        return v

    def y_edge(self, e: int) -> int:
        return self.num_vertices + e

    def z_ctrl(self, v: int, i: int) -> np.ndarray:
        start = self._z0 + (v * (self.order + 1) + i) * self.dim
        return np.arange(start, start + self.dim)

    def z_edge_first(self, e: int) -> np.ndarray:
        start = self._first0 + e * self.dim
        return np.arange(start, start + self.dim)

    def z_edge_diff(self, e: int) -> np.ndarray:
        start = self._diff0 + e * self.dim
        return np.arange(start, start + self.dim)

    def cost_aux(self, v: int, i: int) -> int:
        return self._cost0 + v * self.order + i

    def y_indices(self) -> range:
        return range(self.num_vertices + self.num_edges)

    def control_points(self, x: np.ndarray, v: int) -> np.ndarray:
        """``z`` control points of vertex ``v`` as an (order+1, dim) array."""
        start = self._z0 + v * (self.order + 1) * self.dim
        return x[start : start + (self.order + 1) * self.dim].reshape(self.order + 1, self.dim)


class _Rows:
    """Triplet accumulator for one cone kind (rows read ``G x <= h`` style)."""

    def __init__(self):
        self.r: list[np.ndarray] = []
        self.c: list[np.ndarray] = []
        self.v: list[np.ndarray] = []
        self.h: list[float] = []

    def add(self, cols, vals, rhs: float) -> None:
        row = len(self.h)
        cols = np.atleast_1d(np.asarray(cols, dtype=int))
        self.r.append(np.full(cols.shape[0], row))
        self.c.append(cols)
        self.v.append(np.broadcast_to(np.asarray(vals, dtype=float), cols.shape))
        self.h.append(rhs)

    def matrix(self, n: int) -> tuple[sp.csr_matrix, np.ndarray]:
        if not self.h:
            return sp.csr_matrix((0, n)), np.zeros(0)
        G = sp.csr_matrix(
            (np.concatenate(self.v), (np.concatenate(self.r), np.concatenate(self.c))),
            shape=(len(self.h), n),
        )
        return G, np.asarray(self.h)


def _check_inputs(g: GcsGraph, t: Terminals, params: FormulationParams) -> None:
    if g.num_vertices == 0:
        raise FormulationError("graph has no vertices")
    if g.dim != params.mode.dim:
        raise FormulationError(f"{params.mode.value} mode needs {params.mode.dim}D sets, graph is {g.dim}D")
    for p in (t.start, t.goal):
        if np.asarray(p).shape != (g.dim,):
            raise FormulationError("terminal dimension does not match the graph")
    for k in (t.source_id, t.sink_id):
        if not 0 <= k < g.num_vertices:
            raise FormulationError("terminal vertex id out of range")


def _base_program(g: GcsGraph, t: Terminals, params: FormulationParams) -> tuple[ConicProgram, VariableMap]:
    _check_inputs(g, t, params)
    n, d = params.order, g.dim
    vm = VariableMap(g.num_vertices, g.num_edges, n, d)
    N = vm.num_vars
    src, snk = t.source_id, t.sink_id
    spacetime = params.mode is Mode.SPACETIME_3D
    eq, le = _Rows(), _Rows()

    # bounds on indicators
    for k in vm.y_indices():
        le.add(k, -1.0, 0.0)
        le.add(k, 1.0, 1.0)
    # no flow into the source or out of the sink
    for e, (a, b) in enumerate(g.edges):
        if b == src or a == snk:
            eq.add(vm.y_edge(e), 1.0, 0.0)

    out_edges = [g.out_edges(v) for v in range(g.num_vertices)]
    in_edges = [g.in_edges(v) for v in range(g.num_vertices)]

    # flow conservation
    for v in range(g.num_vertices):
        yv = vm.y_vertex(v)
        ins = [vm.y_edge(e) for e in in_edges[v]]
        outs = [vm.y_edge(e) for e in out_edges[v]]
        eq.add(ins + [yv], [1.0] * len(ins) + [-1.0], -1.0 if v == src else 0.0)
        eq.add(outs + [yv], [1.0] * len(outs) + [-1.0], -1.0 if v == snk else 0.0)

    # control points inside their set: A z <= d y
    for v, H in enumerate(g.vertices):
        yv = vm.y_vertex(v)
        for i in range(n + 1):
            zi = vm.z_ctrl(v, i)
            for row, rhs in zip(H.A, H.d):
                le.add(np.append(zi, yv), np.append(row, -rhs), 0.0)

    # edge auxiliaries: first and second control point of the head set,
    # both scaled by the edge indicator
    for e, (a, b) in enumerate(g.edges):
        H = g.vertices[b]
        ye = vm.y_edge(e)
        z0, zd = vm.z_edge_first(e), vm.z_edge_diff(e)
        for row, rhs in zip(H.A, H.d):
            le.add(np.append(z0, ye), np.append(row, -rhs), 0.0)
            le.add(np.concatenate([z0, zd, [ye]]), np.concatenate([row, row, [-rhs]]), 0.0)

    # continuity and differentiability, aggregated over outgoing edges
    # (every vertex but the sink) and incoming edges (every vertex but the source)
    for v in range(g.num_vertices):
        last, prev = vm.z_ctrl(v, n), vm.z_ctrl(v, n - 1)
        first, second = vm.z_ctrl(v, 0), vm.z_ctrl(v, 1)
        if v != snk:
            for k in range(d):
                aux = [vm.z_edge_first(e)[k] for e in out_edges[v]]
                eq.add([last[k]] + aux, [1.0] + [-1.0] * len(aux), 0.0)
                aux = [vm.z_edge_diff(e)[k] for e in out_edges[v]]
                eq.add([last[k], prev[k]] + aux, [1.0, -1.0] + [-1.0] * len(aux), 0.0)
        if v != src:
            for k in range(d):
                aux = [vm.z_edge_first(e)[k] for e in in_edges[v]]
                eq.add([first[k]] + aux, [1.0] + [-1.0] * len(aux), 0.0)
                aux = [vm.z_edge_diff(e)[k] for e in in_edges[v]]
                eq.add([second[k], first[k]] + aux, [1.0, -1.0] + [-1.0] * len(aux), 0.0)

    # terminal anchoring
    for v, i, point in ((src, 0, t.start), (snk, n, t.goal)):
        zi = vm.z_ctrl(v, i)
        for k in range(d):
            eq.add([zi[k], vm.y_vertex(v)], [1.0, -float(point[k])], 0.0)

    soc = _Rows()
    soc_sizes: list[int] = []

    def cone(t_cols, t_vals, xy_terms):
        # slack = (t_vals . x[t_cols], xy differences); G = -coefficients
        soc.add(t_cols, -np.asarray(t_vals, dtype=float), 0.0)
        for cols, vals in xy_terms:
            soc.add(cols, -np.asarray(vals, dtype=float), 0.0)
        soc_sizes.append(1 + len(xy_terms))

    # cost epigraph per consecutive control-point pair (xy components only)
    for v in range(g.num_vertices):
        for i in range(n):
            a, b = vm.z_ctrl(v, i), vm.z_ctrl(v, i + 1)
            cone([vm.cost_aux(v, i)], [1.0], [([b[k], a[k]], [1.0, -1.0]) for k in range(2)])

    if spacetime:
        vmax, eps = float(params.v_max), float(params.epsilon)
        for v in range(g.num_vertices):
            yv = vm.y_vertex(v)
            for i in range(n):
                a, b = vm.z_ctrl(v, i), vm.z_ctrl(v, i + 1)
                cone([b[2], a[2]], [vmax, -vmax], [([b[k], a[k]], [1.0, -1.0]) for k in range(2)])
                le.add([b[2], a[2], yv], [-1.0, 1.0, eps], 0.0)
        for e in range(g.num_edges):
            zd, ye = vm.z_edge_diff(e), vm.y_edge(e)
            cone([zd[2]], [vmax], [([zd[k]], [1.0]) for k in range(2)])
            le.add([zd[2], ye], [-1.0, eps], 0.0)

    c = np.zeros(N)
    c[vm._cost0 :] = 1.0
    prog = ConicProgram(N, c)
    G, h = eq.matrix(N)
    prog.add_block(G, h, ConeKind.ZERO)
    G, h = le.matrix(N)
    prog.add_block(G, h, ConeKind.NONNEG)
    G, h = soc.matrix(N)
    prog.add_block(G, h, ConeKind.SOC, soc_sizes)
    return prog, vm


def add_fixings(prog: ConicProgram, vm: VariableMap, fix: Fixings) -> ConicProgram:
    """Copy of ``prog`` with each fixed indicator pinned by an equality block."""
    out = ConicProgram(prog.num_vars, prog.objective, list(prog.blocks))
    if fix:
        valid = set(vm.y_indices())
        rows = []
        vals = []
        for k, val in sorted(fix.items()):
            if k not in valid:
                raise FormulationError(f"fixing key {k} is not an indicator variable")
            if val not in (0, 1):
                raise FormulationError("fixings must be 0 or 1")
            rows.append(k)
            vals.append(float(val))
        G = sp.csr_matrix((np.ones(len(rows)), (np.arange(len(rows)), rows)), shape=(len(rows), prog.num_vars))
        out.add_block(G, vals, ConeKind.ZERO)
    return out


def assemble_relaxation(
    g: GcsGraph, t: Terminals, params: FormulationParams, fix: Fixings | None = None
) -> tuple[ConicProgram, VariableMap]:
    prog, vm = _base_program(g, t, params)
    return add_fixings(prog, vm, fix or {}), vm


class Relaxation:
    """Base program assembled once; node programs add only their fixings."""

    def __init__(self, g: GcsGraph, t: Terminals, params: FormulationParams):
        self.graph, self.terminals, self.params = g, t, params
        self.base, self.vmap = _base_program(g, t, params)

    def program(self, fix: Fixings | None = None) -> ConicProgram:
        return add_fixings(self.base, self.vmap, fix or {})
