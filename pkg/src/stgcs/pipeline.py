"""Scenario to certified trajectory: regions, graph, solve, validate."""
from __future__ import annotations

import time
from dataclasses import dataclass, replace

from .geometry import HPolytope
from .graph import GcsGraph, Terminals, build_graph, locate_terminals
from .iris import generate_regions
from .scenario import Scenario
from .solver import Solution, solve_gcs
from .validation import ValidationReport, validate_solution


@dataclass
class PlanResult:
    scenario: Scenario
    regions: list[HPolytope]
    graph: GcsGraph
    terminals: Terminals
    solution: Solution
    report: ValidationReport
    iris_time: float
    solve_time: float


def plan(scenario: Scenario, samples: int | None = None, seed: int | None = None, order: int | None = None) -> PlanResult:
    """Raises solver.Infeasible / graph.NoContainingSet when no plan exists."""
    overrides = {}
    if samples is not None:
        overrides["samples"] = samples
    if seed is not None:
        overrides["seed"] = seed
    if order is not None:
        overrides["spline_order"] = order
    if overrides:
        scenario = replace(scenario, **overrides)
    start, goal = scenario.terminals()
    tic = time.perf_counter()
    regions = generate_regions(
        scenario.environment(), start, goal, scenario.samples, scenario.seed, scenario.iris_params()
    )
    g = build_graph(regions)
    term = locate_terminals(g, start, goal)
    iris_time = time.perf_counter() - tic
    tic = time.perf_counter()
    sol = solve_gcs(g, term, scenario.formulation_params(), scenario.bnb_options())
    solve_time = time.perf_counter() - tic
    report = validate_solution(sol.trajectory, scenario)
    return PlanResult(scenario, regions, g, term, sol, report, iris_time, solve_time)
