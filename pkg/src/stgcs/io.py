"""Solution files: trajectory CSV, solution JSON and an SVG top view."""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .geometry import HPolytope, obstacle_cross_section
from .scenario import Scenario
from .spline import Trajectory, _casteljau
from .validation import ValidationReport, positions_at_times

TIMING_KEYS = ("relaxation_time", "restriction_time", "wall_time", "iris_time", "solve_time")


def sample_trajectory(traj: Trajectory, scenario: Scenario, steps: int = 1000) -> np.ndarray:
    """(steps+1, 3) rows of t, x, y at a uniform step.

    Static plans have no clock, so the spline parameter is spread
    uniformly over the scenario horizon.
    """
    if traj.spacetime:
        times = np.linspace(traj.start_time, traj.end_time, steps + 1)
        return np.column_stack([times, positions_at_times(traj, times)])
    times = np.linspace(scenario.t0, scenario.tf, steps + 1)
    r = np.linspace(0.0, len(traj.segments), steps + 1)
    j = np.minimum(np.floor(r).astype(int), len(traj.segments) - 1)
    pts = np.empty((steps + 1, 2))
    for k, seg in enumerate(traj.segments):
        m = j == k
        pts[m] = _casteljau(seg.control_points, r[m] - k)[:, :2]
    return np.column_stack([times, pts])


def write_csv(rows: np.ndarray, path) -> None:
    np.savetxt(path, rows, fmt="%.9g", delimiter=",", header="t,x,y", comments="")


def solution_dict(result) -> dict:
    sol = result.solution
    stats = asdict(sol.stats)
    timing = {k: stats.pop(k) for k in ("relaxation_time", "restriction_time", "wall_time")}
    timing["iris_time"] = result.iris_time
    timing["solve_time"] = result.solve_time
    return {
        "path": [int(v) for v in sol.path],
        "control_points": [P.tolist() for P in sol.control_points],
        "spacetime": sol.trajectory.spacetime,
        "cost": sol.cost,
        "lower_bound": sol.lower_bound,
        "node_limit_hit": sol.node_limit_hit,
        "inexact": sol.inexact,
        "stats": stats,
        "timing": timing,
        "report": result.report.to_dict(),
        "num_regions": len(result.regions),
        "num_edges": result.graph.num_edges,
        "regions": [R.to_dict() for R in result.regions],
        "scenario": result.scenario.to_dict(),
    }


def load_solution(path) -> dict:
    return json.loads(Path(path).read_text())


def trajectory_from_dict(data: dict) -> Trajectory:
    return Trajectory(tuple(np.array(P, dtype=float) for P in data["control_points"]), spacetime=data["spacetime"])


def _xy_outline(points: np.ndarray) -> np.ndarray:
    xy = np.asarray(points)[:, :2]
    try:
        return xy[ConvexHull(xy).vertices]
    except QhullError:
        return xy


def _pts(xy) -> str:
    return " ".join(f"{x:.6g},{y:.6g}" for x, y in xy)


def render_svg(data: dict, cross_section: float | None = None, size: int = 500) -> str:
    """Top view: regions, obstacles (at t0 and tf, or at one time) and the path.

    Obstacles and the trajectory are ``<path>`` elements, one each.
    """
    sc = Scenario.from_dict(data["scenario"])
    lo, hi = np.array(sc.bounds_min), np.array(sc.bounds_max)
    scale = size / float(np.max(hi - lo))

    def tr(xy):
        xy = np.atleast_2d(xy)
        return np.column_stack([(xy[:, 0] - lo[0]) * scale, (hi[1] - xy[:, 1]) * scale])

    w, h = (hi - lo) * scale
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" viewBox="0 0 {w:.6g} {h:.6g}">',
        f'<rect x="0" y="0" width="{w:.6g}" height="{h:.6g}" fill="white" stroke="black"/>',
    ]
    for R in data.get("regions", []):
        V = HPolytope.from_dict(R).vertices
        out.append(f'<polygon points="{_pts(tr(_xy_outline(V)))}" fill="#9ecae1" fill-opacity="0.25" stroke="#3182bd" stroke-width="0.5"/>')
    prisms = sc.space_time_obstacles()
    for k, o in enumerate(prisms):
        if cross_section is not None:
            polys = [obstacle_cross_section(o, float(np.clip(cross_section, o.t_start, o.t_end)))]
        elif o.is_static:
            polys = [o.start_polygon]
        else:
            polys = [o.start_polygon, o.end_polygon]
        d = " ".join("M " + " L ".join(f"{x:.6g} {y:.6g}" for x, y in tr(p.vertices)) + " Z" for p in polys)
        out.append(f'<path class="obstacle" id="obstacle-{k}" d="{d}" fill="#de2d26" fill-opacity="0.5" stroke="#a50f15"/>')
    rows = sample_trajectory(trajectory_from_dict(data), sc, 400)
    d = "M " + " L ".join(f"{x:.6g} {y:.6g}" for x, y in tr(rows[:, 1:]))
    out.append(f'<path class="trajectory" d="{d}" fill="none" stroke="black" stroke-width="2"/>')
    if cross_section is not None and data["spacetime"]:
        traj = trajectory_from_dict(data)
        t = float(np.clip(cross_section, traj.start_time, traj.end_time))
        (x, y), = tr(positions_at_times(traj, np.array([t])))
        out.append(f'<circle cx="{x:.6g}" cy="{y:.6g}" r="4" fill="black"/>')
        out.append(f'<text x="4" y="14" font-size="12">{escape(f"t = {t:.3g} s")}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_outputs(result, out_dir) -> dict:
    """Write trajectory.csv, solution.json and plot.svg; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = solution_dict(result)
    paths = {
        "csv": out / "trajectory.csv",
        "json": out / "solution.json",
        "svg": out / "plot.svg",
    }
    write_csv(sample_trajectory(result.solution.trajectory, result.scenario), paths["csv"])
    paths["json"].write_text(json.dumps(data, indent=2) + "\n")
    paths["svg"].write_text(render_svg(data))
    return paths


def report_from_dict(data: dict) -> ValidationReport:
    return ValidationReport.from_dict(data["report"])
