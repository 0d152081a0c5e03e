"""Sampling-based certification of a trajectory against its scenario.

Deliberately independent of the planner: it only evaluates the Bezier
curves and tests points against the obstacle cross sections.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import obstacle_cross_section, point_in_polygon
from .scenario import Scenario
from .spline import Trajectory, _casteljau


@dataclass
class ValidationReport:
    collision_events: list = field(default_factory=list)  # (t, (x, y), obstacle index)
    max_speed: float = 0.0
    max_junction_continuity_residual: float = 0.0
    max_junction_diff_residual: float = 0.0
    terminal_errors: tuple[float, float] = (0.0, 0.0)
    time_monotone: bool = True
    passed: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["collision_events"] = [[float(t), [float(p[0]), float(p[1])], int(k)] for t, p, k in self.collision_events]
        d["terminal_errors"] = [float(e) for e in self.terminal_errors]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationReport":
        d = dict(d)
        d["collision_events"] = [(t, tuple(p), k) for t, p, k in d["collision_events"]]
        d["terminal_errors"] = tuple(d["terminal_errors"])
        return cls(**d)


def positions_at_times(traj: Trajectory, times: np.ndarray, iters: int = 60) -> np.ndarray:
    """xy at each time, by bisection on every segment's time component."""
    times = np.asarray(times, dtype=float)
    out = np.empty((times.shape[0], 2))
    ends = np.array([seg.control_points[-1, -1] for seg in traj.segments])
    idx = np.minimum(np.searchsorted(ends, times, side="left"), len(ends) - 1)
    for j, seg in enumerate(traj.segments):
        mask = idx == j
        if not np.any(mask):
            continue
        P = seg.control_points
        t = np.clip(times[mask], P[0, -1], P[-1, -1])
        lo, hi = np.zeros(t.shape), np.ones(t.shape)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            below = _casteljau(P, mid)[:, -1] < t
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out[mask] = _casteljau(P, 0.5 * (lo + hi))[:, :2]
    return out


def _collisions(times, pts, scenario: Scenario, margin: float) -> list:
    events = []
    prisms = scenario.space_time_obstacles()
    for k, (a, b) in enumerate(scenario.polygons()):
        f = (times - scenario.t0) / (scenario.tf - scenario.t0)
        V = (1.0 - f)[:, None, None] * a.vertices + f[:, None, None] * b.vertices
        E = np.roll(V, -1, axis=1) - V
        n = np.stack([E[..., 1], -E[..., 0]], axis=-1)
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        off = np.einsum("tij,tij->ti", n, V)
        # necessary condition for distance <= margin
        cand = np.all(np.einsum("tij,tj->ti", n, pts) <= off + margin + 1e-12, axis=1)
        for i in np.flatnonzero(cand):
            t = float(times[i])
            if point_in_polygon(obstacle_cross_section(prisms[k], t), pts[i], margin):
                events.append((t, (float(pts[i, 0]), float(pts[i, 1])), k))
    events.sort(key=lambda e: (e[0], e[2]))
    return events


def validate_solution(
    traj: Trajectory,
    scenario: Scenario,
    dt: float = 1e-3,
    margin: float = 0.0,
    tol: float = 1e-6,
) -> ValidationReport:
    if not dt > 0:
        raise ValueError("dt must be positive")
    rep = ValidationReport()
    cont, diff = traj.junction_residuals()
    rep.max_junction_continuity_residual, rep.max_junction_diff_residual = cont, diff
    first = traj.segments[0].control_points[0]
    last = traj.segments[-1].control_points[-1]
    start, goal = scenario.terminals()
    rep.terminal_errors = (float(np.linalg.norm(first - start)), float(np.linalg.norm(last - goal)))

    if scenario.spacetime:
        rep.time_monotone = bool(
            all(np.all(np.diff(s.control_points[:, -1]) > 0) for s in traj.segments)
            and np.all(np.diff([s.control_points[0, -1] for s in traj.segments]) > 0)
        )
        t0, tf = traj.start_time, traj.end_time
        steps = max(int(np.ceil((tf - t0) / dt - 1e-9)), 1)
        times = np.minimum(t0 + dt * np.arange(steps + 1), tf)
        pts = positions_at_times(traj, times)
        rep.collision_events = _collisions(np.clip(times, scenario.t0, scenario.tf), pts, scenario, margin)
        if steps >= 2:
            vel = (pts[2:] - pts[:-2]) / (times[2:] - times[:-2])[:, None]
            rep.max_speed = float(np.max(np.linalg.norm(vel, axis=1)))
        speed_ok = rep.max_speed <= scenario.v_max * (1.0 + tol)
    else:
        # static plans carry no clock: sample the path parameter instead
        s = np.linspace(0.0, 1.0, max(int(np.ceil(1.0 / dt)), 2) + 1)
        pts = np.vstack([_casteljau(seg.control_points, s) for seg in traj.segments])
        times = np.full(pts.shape[0], scenario.t0)
        rep.collision_events = _collisions(times, pts, scenario, margin)
        speed_ok = True
    rep.passed = bool(
        not rep.collision_events
        and speed_ok
        and cont <= 1e-6
        and diff <= 1e-6
        and max(rep.terminal_errors) <= 1e-6
        and rep.time_monotone
    )
    return rep
