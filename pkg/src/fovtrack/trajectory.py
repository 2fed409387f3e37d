"""Minimum-jerk piecewise-quintic trajectory in position and yaw.

Waypoints, per-waypoint yaws and segment durations are mapped to polynomial
coefficients through a banded linear system enforcing boundary conditions,
waypoint interpolation and C4 junction continuity; the unique solution is
the minimum-jerk interpolant. The adjoint of the same system propagates
cost gradients from coefficient space back to (waypoints, yaws, durations).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

S_ORDER = 3  # control order: minimum jerk, quintic segments
NCOEF = 2 * S_ORDER

# falling-factorial table: _DERIV[r][j] = j!/(j-r)! for t^j differentiated r times
_DERIV = [[1, 1, 1, 1, 1, 1],
          [0, 1, 2, 3, 4, 5],
          [0, 0, 2, 6, 12, 20],
          [0, 0, 0, 6, 24, 60],
          [0, 0, 0, 0, 24, 120],
          [0, 0, 0, 0, 0, 120]]


def beta(t: float, order: int) -> np.ndarray:
    """Derivative of the monomial basis (1, t, ..., t^5) at ``t``."""
    out = np.zeros(NCOEF)
    for j in range(order, NCOEF):
        out[j] = _DERIV[order][j] * t ** (j - order)
    return out


def beta_matrix(ts: np.ndarray, order: int) -> np.ndarray:
    """Stacked :func:`beta` rows for a vector of sample times."""
    ts = np.asarray(ts, dtype=float)
    out = np.zeros((ts.size, NCOEF))
    for j in range(order, NCOEF):
        out[:, j] = _DERIV[order][j] * ts ** (j - order)
    return out


@dataclass(frozen=True)
class BoundaryConditions:
    """Fixed start/end states; the terminal position and yaw are the last
    waypoint and therefore optimization variables, not boundary values."""

    init_pos: np.ndarray
    init_vel: np.ndarray
    init_acc: np.ndarray
    init_yaw: float
    init_yaw_rate: float = 0.0
    init_yaw_acc: float = 0.0
    final_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    final_acc: np.ndarray = field(default_factory=lambda: np.zeros(3))
    final_yaw_rate: float = 0.0
    final_yaw_acc: float = 0.0

    @classmethod
    def rest_to_rest(cls, pos0, yaw0: float = 0.0) -> "BoundaryConditions":
        z = np.zeros(3)
        return cls(np.asarray(pos0, dtype=float), z.copy(), z.copy(), yaw0)


@dataclass(frozen=True)
class TrajectoryGradient:
    """Cost gradients in waypoint space."""

    waypoints: np.ndarray  # (3, m)
    yaws: np.ndarray  # (m,)
    durations: np.ndarray  # (m,)


@dataclass(frozen=True)
class State:
    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    jerk: np.ndarray
    yaw: float
    yaw_rate: float
    yaw_acc: float
    yaw_jerk: float


class MincoTrajectory:
    """m-segment quintic trajectory produced by :func:`minco_map`."""

    def __init__(self, waypoints, yaws, durations, boundary, coef_pos, coef_yaw, lu_data):
        self.waypoints = waypoints  # (3, m)
        self.yaws = yaws  # (m,)
        self.durations = durations  # (m,)
        self.boundary = boundary
        self.coef_pos = coef_pos  # (m, 6, 3)
        self.coef_yaw = coef_yaw  # (m, 6)
        self._lu = lu_data  # (lu, ipiv, kl, ku)
        self.cum_end = np.cumsum(durations)

    @property
    def segments(self) -> int:
        return self.durations.size

    @property
    def total_duration(self) -> float:
        return float(self.cum_end[-1])

    def locate(self, t_global: float) -> tuple[int, float]:
        """Segment index and local time; out-of-range times are clamped."""
        t = min(max(float(t_global), 0.0), self.total_duration)
        s = int(np.searchsorted(self.cum_end, t, side="left"))
        s = min(s, self.segments - 1)
        start = self.cum_end[s] - self.durations[s]
        return s, t - start

    def eval(self, t_global: float) -> State:
        s, tl = self.locate(t_global)
        cp = self.coef_pos[s]
        cy = self.coef_yaw[s]
        vals = [beta(tl, o) for o in range(4)]
        p, v, a, j = (b @ cp for b in vals)
        y, yr, ya, yj = (float(b @ cy) for b in vals)
        return State(p, v, a, j, y, yr, ya, yj)

    def segment_states(self, s: int, ts_local: np.ndarray):
        """Batched states on one segment: (B matrices, pos/…, yaw/… arrays)."""
        B = [beta_matrix(ts_local, o) for o in range(4)]
        pos_orders = [b @ self.coef_pos[s] for b in B]
        yaw_orders = [b @ self.coef_yaw[s] for b in B]
        return B, pos_orders, yaw_orders


def _band_set(ab, kl, ku, i, j, v):
    ab[kl + ku + i - j, j] = v


def minco_map(waypoints, yaws, durations, boundary: BoundaryConditions) -> MincoTrajectory:
    """Solve for the coefficients interpolating the waypoints with C4
    junctions and the given boundary conditions (banded solve, O(m))."""
    P = np.atleast_2d(np.asarray(waypoints, dtype=float))
    if P.shape[0] != 3:
        raise ValueError("waypoints must be (3, m)")
    psi = np.atleast_1d(np.asarray(yaws, dtype=float))
    t = np.atleast_1d(np.asarray(durations, dtype=float))
    m = t.size
    if m < 1 or P.shape[1] != m or psi.size != m:
        raise ValueError("waypoints, yaws and durations must agree on m >= 1")
    if np.any(t <= 0):
        raise ValueError("segment durations must be positive")

    n = NCOEF * m
    kl = min(8, n - 1)
    ku = min(7, n - 1)
    ab = np.zeros((2 * kl + ku + 1, n))
    b = np.zeros((n, 4))

    # initial state rows
    for r in range(3):
        row = beta(0.0, r)
        for j in range(NCOEF):
            if row[j] != 0.0:
                _band_set(ab, kl, ku, r, j, row[j])
    b[0] = [*boundary.init_pos, boundary.init_yaw]
    b[1] = [*boundary.init_vel, boundary.init_yaw_rate]
    b[2] = [*boundary.init_acc, boundary.init_yaw_acc]

    # junction rows: waypoint interpolation + C0..C4 continuity
    for i in range(1, m):
        base = 6 * i - 3
        seg = i - 1
        col0 = NCOEF * seg
        row = beta(t[seg], 0)
        for j in range(NCOEF):
            _band_set(ab, kl, ku, base, col0 + j, row[j])
        b[base] = [*P[:, seg], psi[seg]]
        for h in range(5):
            r = base + 1 + h
            left = beta(t[seg], h)
            right = beta(0.0, h)
            for j in range(NCOEF):
                if left[j] != 0.0:
                    _band_set(ab, kl, ku, r, col0 + j, left[j])
                if right[j] != 0.0:
                    _band_set(ab, kl, ku, r, col0 + NCOEF + j, -right[j])

    # terminal rows
    base = 6 * m - 3
    col0 = NCOEF * (m - 1)
    for r in range(3):
        row = beta(t[m - 1], r)
        for j in range(NCOEF):
            _band_set(ab, kl, ku, base + r, col0 + j, row[j])
    b[base] = [*P[:, m - 1], psi[m - 1]]
    b[base + 1] = [*boundary.final_vel, boundary.final_yaw_rate]
    b[base + 2] = [*boundary.final_acc, boundary.final_yaw_acc]

    lu, ipiv, info = lapack.dgbtrf(ab, kl, ku)
    if info != 0:
        raise RuntimeError(f"banded factorization failed (info={info})")
    sol, info = lapack.dgbtrs(lu, kl, ku, b, ipiv)
    if info != 0:
        raise RuntimeError(f"banded solve failed (info={info})")
    coef = sol.reshape(m, NCOEF, 4)
    return MincoTrajectory(
        P.copy(), psi.copy(), t.copy(), boundary,
        np.ascontiguousarray(coef[:, :, :3]), np.ascontiguousarray(coef[:, :, 3]),
        (lu, ipiv, kl, ku),
    )


def propagate_gradient(
    traj: MincoTrajectory, d_coef_pos, d_coef_yaw, d_durations_direct
) -> TrajectoryGradient:
    """Pull gradients w.r.t. coefficients back to (waypoints, yaws, durations).

    Solves the transposed banded system once for the adjoint, then adds the
    duration dependence of the mapping itself; ``d_durations_direct`` is the
    explicit duration partial of the cost, added on top.
    """
    m = traj.segments
    dC = np.asarray(d_coef_pos, dtype=float)
    dT = np.asarray(d_coef_yaw, dtype=float)
    ddt = np.asarray(d_durations_direct, dtype=float)
    if dC.shape != (m, NCOEF, 3) or dT.shape != (m, NCOEF) or ddt.shape != (m,):
        raise ValueError("gradient arrays do not match the trajectory shape")

    g = np.zeros((NCOEF * m, 4))
    g[:, :3] = dC.reshape(NCOEF * m, 3)
    g[:, 3] = dT.reshape(NCOEF * m)
    lu, ipiv, kl, ku = traj._lu
    lam, info = lapack.dgbtrs(lu, kl, ku, g, ipiv, trans=1)
    if info != 0:
        raise RuntimeError(f"adjoint solve failed (info={info})")

    rows = 6 * np.arange(1, m + 1) - 3
    d_way = lam[rows, :3].T.copy()
    d_yaw = lam[rows, 3].copy()

    d_t = ddt.copy()
    # junction i: rows [waypoint, C0..C4] differentiate to segment-(i-1)
    # derivatives of orders (1, 1, 2, 3, 4, 5) at its end time
    for i in range(1, m):
        seg = i - 1
        base = 6 * i - 3
        cp = traj.coef_pos[seg]
        cy = traj.coef_yaw[seg]
        for j, order in enumerate((1, 1, 2, 3, 4, 5)):
            bb = beta(traj.durations[seg], order)
            d_t[seg] -= lam[base + j, :3] @ (bb @ cp) + lam[base + j, 3] * (bb @ cy)
    base = 6 * m - 3
    cp = traj.coef_pos[m - 1]
    cy = traj.coef_yaw[m - 1]
    for j, order in enumerate((1, 2, 3)):
        bb = beta(traj.durations[m - 1], order)
        d_t[m - 1] -= lam[base + j, :3] @ (bb @ cp) + lam[base + j, 3] * (bb @ cy)

    return TrajectoryGradient(d_way, d_yaw, d_t)
