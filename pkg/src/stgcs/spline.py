"""Bezier segments and piecewise Bezier trajectories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SplineError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BezierSegment:
    control_points: np.ndarray

    def __post_init__(self):
        P = np.array(self.control_points, dtype=float)
        if P.ndim != 2 or P.shape[0] < 1:
            raise SplineError("control points must be an (n+1, d) array")
        P.setflags(write=False)
        object.__setattr__(self, "control_points", P)

    @property
    def order(self) -> int:
        return self.control_points.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]


def _casteljau(P: np.ndarray, s: np.ndarray) -> np.ndarray:
    s = s[:, None, None]
    pts = np.broadcast_to(P, (s.shape[0],) + P.shape)
    while pts.shape[1] > 1:
        pts = (1.0 - s) * pts[:, :-1] + s * pts[:, 1:]
    return pts[:, 0]


def bezier_eval(seg: BezierSegment, s) -> np.ndarray:
    """Point(s) on the curve by de Casteljau; ``s`` scalar or array in [0, 1]."""
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise SplineError("parameter outside [0, 1]")
    out = _casteljau(seg.control_points, arr)
    return out[0] if np.ndim(s) == 0 else out


def bezier_derivative(seg: BezierSegment) -> BezierSegment:
    n = seg.order
    if n < 1:
        raise SplineError("derivative needs order >= 1")
    return BezierSegment(n * np.diff(seg.control_points, axis=0))


@dataclass(frozen=True, eq=False)
class Trajectory:
    segments: tuple[BezierSegment, ...]
    spacetime: bool = True

    def __post_init__(self):
        segs = tuple(s if isinstance(s, BezierSegment) else BezierSegment(s) for s in self.segments)
        if not segs:
            raise SplineError("trajectory needs at least one segment")
        object.__setattr__(self, "segments", segs)

    @property
    def start_time(self) -> float:
        return float(self.segments[0].control_points[0, -1])

    @property
    def end_time(self) -> float:
        return float(self.segments[-1].control_points[-1, -1])

    def evaluate(self, r) -> np.ndarray:
        """Spline point at parameter ``r`` in [0, number of segments]."""
        r = float(r)
        l = len(self.segments)
        if not 0.0 <= r <= l:
            raise SplineError("spline parameter out of range")
        j = min(int(np.floor(r)), l - 1)
        return bezier_eval(self.segments[j], r - j)

    def junction_residuals(self) -> tuple[float, float]:
        """Largest position gap and largest end-tangent mismatch at junctions."""
        cont, diff = 0.0, 0.0
        for a, b in zip(self.segments[:-1], self.segments[1:]):
            P, Q = a.control_points, b.control_points
            cont = max(cont, float(np.linalg.norm(P[-1] - Q[0])))
            if a.order >= 1 and b.order >= 1:
                diff = max(diff, float(np.linalg.norm((P[-1] - P[-2]) - (Q[1] - Q[0]))))
        return cont, diff

    def to_list(self) -> list:
        return [seg.control_points.tolist() for seg in self.segments]


def _segment_time(seg: BezierSegment, t: float, tol: float) -> np.ndarray:
    lo, hi = 0.0, 1.0
    P = seg.control_points
    while True:
        mid = 0.5 * (lo + hi)
        pt = _casteljau(P, np.array([mid]))[0]
        if abs(pt[-1] - t) <= tol or hi - lo < 1e-15:
            return pt
        if pt[-1] < t:
            lo = mid
        else:
            hi = mid


def position_at_time(traj: Trajectory, t: float, tol: float = 1e-9) -> np.ndarray:
    """xy position at time ``t`` of a space-time trajectory (bisection on s)."""
    if not traj.spacetime:
        raise SplineError("time indexing needs a space-time trajectory")
    if not traj.start_time - tol <= t <= traj.end_time + tol:
        raise SplineError(f"t={t} outside [{traj.start_time}, {traj.end_time}]")
    for seg in traj.segments:
        P = seg.control_points
        if t <= P[-1, -1]:
            if t <= P[0, -1]:
                return P[0, :2].copy()
            return _segment_time(seg, t, tol)[:2]
    return traj.segments[-1].control_points[-1, :2].copy()


def arc_length_bounds(traj: Trajectory, n_samples: int = 1000) -> tuple[float, float]:
    """(sampled polyline length, control-polygon length), both in xy."""
    if n_samples < 2:
        raise SplineError("need at least two samples")
    upper, lower = 0.0, 0.0
    s = np.linspace(0.0, 1.0, n_samples)
    for seg in traj.segments:
        P = seg.control_points[:, :2]
        upper += float(np.sum(np.linalg.norm(np.diff(P, axis=0), axis=1)))
        pts = _casteljau(P, s)
        lower += float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    return lower, upper
