"""Visibility-aware initial waypoint generation with reacquisition.

Each waypoint is pulled onto the horizontal circle of radius d around the
predicted target position, then swept along that circle (counterclockwise
probed first at equal offsets) until it gains line of sight. During target
loss the same procedure keeps running on the aged, clamped prediction,
which is what steers the tracker back toward the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fovtrack.geometry import YawPose, horizontal_projection
from fovtrack.prediction import BezierCurve
from fovtrack.world import OccupancyWorld

_DEGENERATE = 1e-6


class NoFreePoint(Exception):
    """Arc search exhausted its sweep without finding line of sight."""


@dataclass(frozen=True)
class PathRequest:
    prediction: BezierCurve
    tracker: YawPose
    world: OccupancyWorld
    d: float
    tau: float
    segments: int
    arc_step: float = math.radians(5.0)
    arc_max_sweep: float = math.pi
    altitude_offset: float = 0.0
    prediction_age: float = 0.0

    def __post_init__(self):
        if self.d <= 0 or self.tau <= 0 or self.segments < 1:
            raise ValueError("need d > 0, tau > 0, segments >= 1")
        if self.arc_step <= 0 or self.arc_max_sweep <= 0:
            raise ValueError("arc search parameters must be positive")


@dataclass(frozen=True)
class InitialPath:
    waypoints: np.ndarray  # (m, 3)
    targets: np.ndarray  # (m, 3) predicted target per waypoint
    visible: np.ndarray  # (m,) bool: line of sight achieved

    @property
    def any_visible(self) -> bool:
        return bool(self.visible.any())


def candidate_point(target: np.ndarray, previous: np.ndarray, d: float,
                    fallback_yaw: float = 0.0) -> np.ndarray:
    """Point at horizontal distance d from the target toward ``previous``.

    The offset is purely horizontal, so the candidate inherits the target's
    altitude. Directly-overhead geometry falls back to the direction the
    tracker is facing.
    """
    diff = horizontal_projection(np.asarray(target, dtype=float) - previous)
    norm = float(np.linalg.norm(diff))
    if norm <= _DEGENERATE:
        direction = -np.array([math.cos(fallback_yaw), math.sin(fallback_yaw), 0.0])
    else:
        direction = -diff / norm
    return target + d * direction


def arc_search(target: np.ndarray, candidate: np.ndarray, world: OccupancyWorld,
               d: float, step: float, max_sweep: float) -> np.ndarray:
    """Smallest rotation of ``candidate`` around the target that sees it.

    Probes +step before -step at equal offsets; raises :class:`NoFreePoint`
    once both directions exceed ``max_sweep``.
    """
    target = np.asarray(target, dtype=float)
    if world.line_of_sight(candidate, target):
        return np.asarray(candidate, dtype=float)
    base = math.atan2(candidate[1] - target[1], candidate[0] - target[0])
    n_steps = int(math.floor(max_sweep / step + 1e-9))
    for i in range(1, n_steps + 1):
        for sign in (1.0, -1.0):
            ang = base + sign * i * step
            p = np.array(
                [target[0] + d * math.cos(ang), target[1] + d * math.sin(ang), candidate[2]]
            )
            if world.line_of_sight(p, target):
                return p
    raise NoFreePoint


def plan_initial_path(req: PathRequest) -> InitialPath:
    """Waypoints toward the predicted target, one per future tau step.

    A waypoint whose whole arc is blocked repeats the previous waypoint with
    its visibility flag cleared; the optimizer still receives the path.
    """
    m = req.segments
    waypoints = np.empty((m, 3))
    targets = np.empty((m, 3))
    visible = np.zeros(m, dtype=bool)
    prev = np.asarray(req.tracker.position, dtype=float)
    for k in range(1, m + 1):
        rho = req.prediction.position(req.prediction_age + k * req.tau)
        targets[k - 1] = rho
        cand = candidate_point(rho, prev, req.d, req.tracker.yaw)
        cand[2] = rho[2] + req.altitude_offset
        try:
            point = arc_search(rho, cand, req.world, req.d, req.arc_step, req.arc_max_sweep)
            visible[k - 1] = True
        except NoFreePoint:
            point = prev.copy()
        waypoints[k - 1] = point
        prev = point
    return InitialPath(waypoints, targets, visible)
