"""Directed graph of convex sets built from touching regions."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .geometry import HPolytope, hpolytopes_touch, point_in_hpolytope


class NoContainingSet(LookupError):
    def __init__(self, which: str):
        super().__init__(f"no region contains the {which} point")
        self.which = which


@dataclass
class GcsGraph:
    vertices: list[HPolytope]
    edges: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.vertices)
        self.edges = [(int(a), int(b)) for a, b in self.edges]
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-edge at vertex {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) references a missing vertex")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges")
        self._edge_index = {e: k for k, e in enumerate(self.edges)}

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def dim(self) -> int:
        return self.vertices[0].dim

    def edge_id(self, a: int, b: int) -> int:
        return self._edge_index[(a, b)]

    def has_edge(self, a: int, b: int) -> bool:
        return (a, b) in self._edge_index

    def out_edges(self, v: int) -> list[int]:
        return [k for k, (a, _) in enumerate(self.edges) if a == v]

    def in_edges(self, v: int) -> list[int]:
        return [k for k, (_, b) in enumerate(self.edges) if b == v]

    def to_dict(self) -> dict:
        return {
            "vertices": [H.to_dict() for H in self.vertices],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GcsGraph":
        return cls([HPolytope.from_dict(v) for v in data["vertices"]], [tuple(e) for e in data["edges"]])


@dataclass(frozen=True)
class Terminals:
    source_id: int
    sink_id: int
    start: np.ndarray
    goal: np.ndarray


def build_graph(regions: list[HPolytope], tol: float = 1e-7) -> GcsGraph:
    """Connect every touching pair of regions in both directions."""
    edges = []
    for a, b in combinations(range(len(regions)), 2):
        if hpolytopes_touch(regions[a], regions[b], tol):
            edges += [(a, b), (b, a)]
    edges.sort()
    return GcsGraph(list(regions), edges)


def locate_terminals(g: GcsGraph, start, goal, tol: float = 1e-9) -> Terminals:
    """Lowest-id region containing each terminal."""
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    ids = {}
    for name, p in (("start", start), ("goal", goal)):
        hit = next((k for k, H in enumerate(g.vertices) if point_in_hpolytope(H, p, tol)), None)
        if hit is None:
            raise NoContainingSet(name)
        ids[name] = hit
    return Terminals(ids["start"], ids["goal"], start, goal)
