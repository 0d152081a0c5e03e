"""Standard-form conic programs and the solver contract.

A program is ``minimize c @ x`` subject to ``G_k @ x + s_k = h_k`` with each
slack ``s_k`` in a cone: ZERO (equality), NONNEG (inequality) or SOC(k), the
second-order cone ``{(t, u) : ||u||_2 <= t}`` of total size k.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import TextIO

import clarabel
import numpy as np
import scipy.sparse as sp


class ConeKind(enum.Enum):
    ZERO = "zero"
    NONNEG = "nonneg"
    SOC = "soc"


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class ConeBlock:
    """Rows ``G x + s = h`` with ``s`` in the cone.

    An SOC block may stack several second-order cones back to back; their
    sizes are listed in ``soc_sizes`` (a single cone when left empty).
    """

    G: sp.csr_matrix
    h: np.ndarray
    kind: ConeKind
    soc_sizes: tuple[int, ...] = ()

    @property
    def size(self) -> int:
        return self.G.shape[0]

    def cone_sizes(self) -> tuple[int, ...]:
        if self.kind is ConeKind.SOC:
            return self.soc_sizes or (self.size,)
        return (self.size,)


@dataclass
class ConicProgram:
    num_vars: int
    objective: np.ndarray
    blocks: list[ConeBlock] = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.num_vars,):
            raise ValueError("objective length must equal num_vars")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective has non-finite entries")

    def add_block(self, G, h, kind: ConeKind, soc_sizes=()) -> None:
        G = sp.csr_matrix(G, dtype=float)
        h = np.atleast_1d(np.asarray(h, dtype=float))
        if G.ndim != 2 or G.shape[1] != self.num_vars:
            raise ValueError(f"block has {G.shape[1]} columns, expected {self.num_vars}")
        if G.shape[0] != h.shape[0]:
            raise ValueError("block row count does not match h")
        soc_sizes = tuple(int(k) for k in soc_sizes)
        if kind is ConeKind.SOC:
            sizes = soc_sizes or (G.shape[0],)
            if min(sizes) < 2 or sum(sizes) != G.shape[0]:
                raise ValueError("second-order cones need size >= 2 and must cover the block")
        elif soc_sizes:
            raise ValueError("soc_sizes only applies to SOC blocks")
        if not (np.all(np.isfinite(G.data)) and np.all(np.isfinite(h))):
            raise ValueError("block has non-finite entries")
        self.blocks.append(ConeBlock(G, h, kind, soc_sizes))

    def stacked(self) -> tuple[sp.csc_matrix, np.ndarray]:
        if not self.blocks:
            return sp.csc_matrix((0, self.num_vars)), np.zeros(0)
        G = sp.vstack([b.G for b in self.blocks], format="csc")
        h = np.concatenate([b.h for b in self.blocks])
        return G, h

    def violation(self, x: np.ndarray) -> float:
        """Largest cone violation of ``h - G x`` over all blocks."""
        worst = 0.0
        for b in self.blocks:
            s = b.h - b.G @ x
            if b.kind is ConeKind.ZERO:
                v = np.max(np.abs(s), initial=0.0)
            elif b.kind is ConeKind.NONNEG:
                v = max(0.0, -np.min(s, initial=0.0))
            else:
                v, r = 0.0, 0
                for k in b.cone_sizes():
                    v = max(v, np.linalg.norm(s[r + 1 : r + k]) - s[r])
                    r += k
            worst = max(worst, float(v))
        return worst


@dataclass
class ConicSolution:
    status: Status
    primal: np.ndarray | None
    objective_value: float
    solve_time: float

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


_STATUS_MAP = {
    "Solved": Status.OPTIMAL,
    "PrimalInfeasible": Status.INFEASIBLE,
    "AlmostPrimalInfeasible": Status.INFEASIBLE,
    "DualInfeasible": Status.UNBOUNDED,
    "AlmostDualInfeasible": Status.UNBOUNDED,
}


def _clarabel_cones(blocks: list[ConeBlock]) -> list:
    cones = []
    for b in blocks:
        if b.kind is ConeKind.ZERO:
            cones.append(clarabel.ZeroConeT(b.size))
        elif b.kind is ConeKind.NONNEG:
            cones.append(clarabel.NonnegativeConeT(b.size))
        else:
            cones.extend(clarabel.SecondOrderConeT(k) for k in b.cone_sizes())
    return cones


def solve_conic(
    program: ConicProgram,
    feas_tol: float = 1e-8,
    gap_tol: float = 1e-8,
    max_iter: int = 200,
) -> ConicSolution:
    """Solve ``program`` with the Clarabel interior-point method.

    Failures are reported through ``status``; nothing is raised for
    infeasible or unbounded programs.
    """
    n = program.num_vars
    G, h = program.stacked()
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = feas_tol
    settings.tol_gap_abs = gap_tol
    settings.tol_gap_rel = gap_tol
    settings.max_iter = max_iter
    P = sp.csc_matrix((n, n))
    t0 = time.perf_counter()
    try:
        solver = clarabel.DefaultSolver(
            P, program.objective, G, h, _clarabel_cones(program.blocks), settings
        )
        raw = solver.solve()
    except Exception:  # backend raises on malformed numerics
        return ConicSolution(Status.NUMERICAL_ERROR, None, float("nan"), time.perf_counter() - t0)
    elapsed = time.perf_counter() - t0
    status = _STATUS_MAP.get(str(raw.status), Status.NUMERICAL_ERROR)
    if status is not Status.OPTIMAL:
        return ConicSolution(status, None, float("nan"), elapsed)
    x = np.asarray(raw.x, dtype=float)
    return ConicSolution(status, x, float(program.objective @ x), elapsed)


def dump_program(program: ConicProgram, stream: TextIO) -> None:
    """Write ``program`` as sparse triplets, one nonzero per line.

    Header lines start with ``#``: ``# vars N`` then ``# block K KIND SIZE``
    per block, with a trailing comma-separated cone-size list for stacked
    SOC blocks. Body lines are ``block row col value``. Objective entries use
    block ``-1`` (row 0) and right-hand sides use column ``-1``.
    """
    stream.write(f"# vars {program.num_vars}\n")
    for k, b in enumerate(program.blocks):
        sizes = ",".join(map(str, b.soc_sizes))
        stream.write(f"# block {k} {b.kind.value} {b.size} {sizes}".rstrip() + "\n")
    for j in np.flatnonzero(program.objective):
        stream.write(f"-1 0 {j} {float(program.objective[j])!r}\n")
    for k, b in enumerate(program.blocks):
        coo = b.G.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            stream.write(f"{k} {r} {c} {float(v)!r}\n")
        for r in np.flatnonzero(b.h):
            stream.write(f"{k} {r} -1 {float(b.h[r])!r}\n")


def load_program(stream: TextIO) -> ConicProgram:
    num_vars = None
    kinds: list[tuple[ConeKind, int, tuple]] = []
    trip: dict[int, list[tuple[int, int, float]]] = {}
    for line in stream:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[0] == "vars":
                num_vars = int(parts[1])
            elif parts[0] == "block":
                sizes = tuple(int(k) for k in parts[4].split(",")) if len(parts) > 4 else ()
                kinds.append((ConeKind(parts[2]), int(parts[3]), sizes))
            continue
        k, r, c, v = line.split()
        trip.setdefault(int(k), []).append((int(r), int(c), float(v)))
    if num_vars is None:
        raise ValueError("missing '# vars' header")
    c_vec = np.zeros(num_vars)
    for _, j, v in trip.get(-1, []):
        c_vec[j] = v
    prog = ConicProgram(num_vars, c_vec)
    for k, (kind, size, sizes) in enumerate(kinds):
        G = sp.lil_matrix((size, num_vars))
        h = np.zeros(size)
        for r, c, v in trip.get(k, []):
            if c == -1:
                h[r] = v
            else:
                G[r, c] = v
        prog.add_block(G, h, kind, sizes)
    return prog
