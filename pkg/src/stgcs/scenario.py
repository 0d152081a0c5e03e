"""Planning scenarios and their JSON file format."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formulation import FormulationParams, Mode
from .geometry import ConvexPolygon2D, GeometryError, SpaceTimeObstacle, extrude_obstacle, square
from .iris import Environment, IrisParams
from .solver import BnBOptions

log = logging.getLogger(__name__)


class ScenarioError(ValueError):
    pass


_TOP_KEYS = {
    "mode", "bounds", "time", "start", "goal", "v_max", "epsilon",
    "spline_order", "obstacles", "iris", "solver",
}
_REQUIRED = {"mode", "bounds", "start", "goal"}
_IRIS_KEYS = {"samples", "seed", "max_iterations", "termination_growth"}
_SOLVER_KEYS = {"integrality_tol", "gap_tol", "max_nodes"}


@dataclass
class Scenario:
    mode: Mode
    bounds_min: tuple[float, float]
    bounds_max: tuple[float, float]
    start: tuple[float, float]
    goal: tuple[float, float]
    t0: float = 0.0
    tf: float = 1.0
    v_max: float | None = None
    epsilon: float = 1e-3
    spline_order: int = 3
    obstacles: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    samples: int = 100
    seed: int = 0
    max_iterations: int = 10
    termination_growth: float = 0.02
    integrality_tol: float = 1e-4
    gap_tol: float = 1e-6
    max_nodes: int = 10000

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        lo, hi = np.asarray(self.bounds_min, float), np.asarray(self.bounds_max, float)
        if lo.shape != (2,) or hi.shape != (2,) or np.any(hi <= lo):
            raise ScenarioError("bounds: need 2D min < max")
        for name in ("start", "goal"):
            p = np.asarray(getattr(self, name), float)
            if p.shape != (2,):
                raise ScenarioError(f"{name}: need a 2D point")
            if np.any(p < lo) or np.any(p > hi):
                raise ScenarioError(f"{name}: outside bounds")
        if np.array_equal(np.asarray(self.start, float), np.asarray(self.goal, float)):
            raise ScenarioError("start and goal coincide")
        if not self.tf > self.t0:
            raise ScenarioError("time: need end > start")
        if self.mode is Mode.SPACETIME_3D:
            if self.v_max is None or not self.v_max > 0:
                raise ScenarioError("v_max: required and positive in spacetime mode")
            reach = self.v_max * (self.tf - self.t0)
            gap = float(np.linalg.norm(np.subtract(self.goal, self.start)))
            if reach < gap:
                log.warning("goal unreachable at v_max: %.4g < %.4g", reach, gap)
        if not self.epsilon > 0:
            raise ScenarioError("epsilon: must be positive")
        if self.spline_order < 1:
            raise ScenarioError("spline_order: must be >= 1")
        for k, (a, b) in enumerate(self.obstacles):
            try:
                pa, pb = ConvexPolygon2D(a), ConvexPolygon2D(b)
            except GeometryError as exc:
                raise ScenarioError(f"obstacles[{k}]: {exc}") from None
            if len(pa) != len(pb):
                raise ScenarioError(f"obstacles[{k}]: start/end vertex counts differ")
            if self.mode is Mode.STATIC_2D and not np.array_equal(np.asarray(a, float), np.asarray(b, float)):
                raise ScenarioError(f"obstacles[{k}]: static mode needs identical start and end polygons")
        if self.samples < 0:
            raise ScenarioError("iris.samples: must be >= 0")
        try:
            self.iris_params()
            self.bnb_options()
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None

    # -- derived objects -----------------------------------------------------

    @property
    def spacetime(self) -> bool:
        return self.mode is Mode.SPACETIME_3D

    def polygons(self) -> list[tuple[ConvexPolygon2D, ConvexPolygon2D]]:
        return [(ConvexPolygon2D(a), ConvexPolygon2D(b)) for a, b in self.obstacles]

    def space_time_obstacles(self) -> list[SpaceTimeObstacle]:
        return [extrude_obstacle(a, b, self.t0, self.tf) for a, b in self.polygons()]

    def environment(self) -> Environment:
        if self.spacetime:
            lo = [*self.bounds_min, self.t0]
            hi = [*self.bounds_max, self.tf]
            return Environment(lo, hi, self.space_time_obstacles())
        return Environment(self.bounds_min, self.bounds_max, [a for a, _ in self.polygons()])

    def terminals(self) -> tuple[np.ndarray, np.ndarray]:
        s, g = np.asarray(self.start, float), np.asarray(self.goal, float)
        if self.spacetime:
            return np.append(s, self.t0), np.append(g, self.tf)
        return s, g

    def formulation_params(self) -> FormulationParams:
        return FormulationParams(
            order=self.spline_order,
            v_max=self.v_max if self.spacetime else None,
            epsilon=self.epsilon,
            mode=self.mode,
        )

    def iris_params(self) -> IrisParams:
        return IrisParams(max_iterations=self.max_iterations, termination_growth=self.termination_growth)

    def bnb_options(self) -> BnBOptions:
        return BnBOptions(integrality_tol=self.integrality_tol, gap_tol=self.gap_tol, max_nodes=self.max_nodes)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode.value,
            "bounds": {"min": list(map(float, self.bounds_min)), "max": list(map(float, self.bounds_max))},
            "time": {"start": float(self.t0), "end": float(self.tf)},
            "start": list(map(float, self.start)),
            "goal": list(map(float, self.goal)),
            "epsilon": float(self.epsilon),
            "spline_order": int(self.spline_order),
            "obstacles": [
                {"vertices_start": np.asarray(a, float).tolist(), "vertices_end": np.asarray(b, float).tolist()}
                for a, b in self.obstacles
            ],
            "iris": {
                "samples": int(self.samples),
                "seed": int(self.seed),
                "max_iterations": int(self.max_iterations),
                "termination_growth": float(self.termination_growth),
            },
            "solver": {
                "integrality_tol": float(self.integrality_tol),
                "gap_tol": float(self.gap_tol),
                "max_nodes": int(self.max_nodes),
            },
        }
        if self.v_max is not None:
            out["v_max"] = float(self.v_max)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError("scenario must be a JSON object")
        _check_keys(data, _TOP_KEYS, "", _REQUIRED)
        try:
            mode = Mode(data["mode"])
        except ValueError:
            raise ScenarioError(f"mode: expected 'static' or 'spacetime', got {data['mode']!r}") from None
        bounds = data["bounds"]
        _check_keys(bounds, {"min", "max"}, "bounds.", {"min", "max"})
        time_ = data.get("time", {"start": 0.0, "end": 1.0})
        _check_keys(time_, {"start", "end"}, "time.", {"start", "end"})
        iris = data.get("iris", {})
        _check_keys(iris, _IRIS_KEYS, "iris.")
        solver = data.get("solver", {})
        _check_keys(solver, _SOLVER_KEYS, "solver.")
        obstacles = []
        for k, o in enumerate(data.get("obstacles", [])):
            _check_keys(o, {"vertices_start", "vertices_end"}, f"obstacles[{k}].", {"vertices_start"})
            a = _array(o["vertices_start"], f"obstacles[{k}].vertices_start")
            b = _array(o.get("vertices_end", o["vertices_start"]), f"obstacles[{k}].vertices_end")
            obstacles.append((a, b))
        defaults = cls.__dataclass_fields__
        return cls(
            mode=mode,
            bounds_min=_point(bounds["min"], "bounds.min"),
            bounds_max=_point(bounds["max"], "bounds.max"),
            start=_point(data["start"], "start"),
            goal=_point(data["goal"], "goal"),
            t0=_num(time_["start"], "time.start"),
            tf=_num(time_["end"], "time.end"),
            v_max=None if data.get("v_max") is None else _num(data["v_max"], "v_max"),
            epsilon=_num(data.get("epsilon", defaults["epsilon"].default), "epsilon"),
            spline_order=_int(data.get("spline_order", defaults["spline_order"].default), "spline_order"),
            obstacles=obstacles,
            samples=_int(iris.get("samples", defaults["samples"].default), "iris.samples"),
            seed=_int(iris.get("seed", defaults["seed"].default), "iris.seed"),
            max_iterations=_int(iris.get("max_iterations", defaults["max_iterations"].default), "iris.max_iterations"),
            termination_growth=_num(
                iris.get("termination_growth", defaults["termination_growth"].default), "iris.termination_growth"
            ),
            integrality_tol=_num(
                solver.get("integrality_tol", defaults["integrality_tol"].default), "solver.integrality_tol"
            ),
            gap_tol=_num(solver.get("gap_tol", defaults["gap_tol"].default), "solver.gap_tol"),
            max_nodes=_int(solver.get("max_nodes", defaults["max_nodes"].default), "solver.max_nodes"),
        )


def _check_keys(obj, allowed: set, prefix: str, required: set = frozenset()) -> None:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{prefix.rstrip('.') or 'scenario'}: expected an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ScenarioError(f"{prefix}{extra[0]}: unknown key")
    missing = sorted(required - set(obj))
    if missing:
        raise ScenarioError(f"{prefix}{missing[0]}: missing required key")


def _num(v, name: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(f"{name}: expected a finite number")
    return float(v)


def _int(v, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{name}: expected an integer")
    return v


def _point(v, name: str) -> tuple[float, float]:
    if not isinstance(v, list) or len(v) != 2:
        raise ScenarioError(f"{name}: expected [x, y]")
    return (_num(v[0], name), _num(v[1], name))


def _array(v, name: str) -> np.ndarray:
    if not isinstance(v, list) or not all(isinstance(p, list) for p in v):
        raise ScenarioError(f"{name}: expected a list of [x, y] vertices")
    return np.array([_point(p, name) for p in v], dtype=float)


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return Scenario.from_dict(data)


def dump_scenario(scenario: Scenario, path=None) -> str:
    text = json.dumps(scenario.to_dict(), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def cluttered_scenario(
    seed: int,
    n_obstacles: int = 20,
    side: float = 0.1,
    v_max: float = 3.0,
    samples: int = 80,
    max_nodes: int = 10,
) -> Scenario:
    """Random constant-velocity squares in the middle band of the unit square.

    Centers at both ends of the horizon are drawn uniformly from
    [0, 1] x [0.2, 0.8], so start (0.5, 0) and goal (0.5, 1) stay clear.
    The relaxation bound is far from tight on these graphs, so the search
    stops after ``max_nodes`` nodes with its best incumbent.
    """
    rng = np.random.default_rng(seed)
    lo, hi = np.array([0.0, 0.2]), np.array([1.0, 0.8])
    obstacles = []
    for _ in range(n_obstacles):
        c0, c1 = rng.uniform(lo, hi), rng.uniform(lo, hi)
        obstacles.append((square(c0, side).vertices.copy(), square(c1, side).vertices.copy()))
    return Scenario(
        mode=Mode.SPACETIME_3D,
        bounds_min=(0.0, 0.0),
        bounds_max=(1.0, 1.0),
        start=(0.5, 0.0),
        goal=(0.5, 1.0),
        v_max=v_max,
        obstacles=obstacles,
        samples=samples,
        seed=seed,
        max_nodes=max_nodes,
    )
