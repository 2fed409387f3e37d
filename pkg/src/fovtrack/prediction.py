"""Target trajectory prediction.

A degree-2m Bézier curve on [-T, T] (T = m*tau) is fitted through the last
m+1 observed target positions by minimizing integrated squared acceleration
subject to interpolation constraints; the past maps to t <= 0 and the
future to t > 0. The fit is an equality-constrained QP solved through its
KKT system, one right-hand side per axis; the system matrix depends only on
(m, tau) and is factored once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg


def bernstein_matrix(n: int, u: np.ndarray) -> np.ndarray:
    """Rows of all degree-n Bernstein polynomials evaluated at ``u``."""
    u = np.asarray(u, dtype=float)
    out = np.empty((u.size, n + 1))
    for i in range(n + 1):
        out[:, i] = math.comb(n, i) * u**i * (1.0 - u) ** (n - i)
    return out


def _de_casteljau(ctrl: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Evaluate a Bézier curve with control points (q+1, dims) at each u."""
    u = np.asarray(u, dtype=float)[:, None, None]
    pts = np.broadcast_to(ctrl, (u.shape[0],) + ctrl.shape).copy()
    for r in range(ctrl.shape[0] - 1, 0, -1):
        pts[:, :r] = (1.0 - u) * pts[:, :r] + u * pts[:, 1 : r + 1]
    return pts[:, 0]


@dataclass(frozen=True)
class BezierCurve:
    """Bézier trajectory on [-T, T]; evaluation clamps t into the domain."""

    control_points: np.ndarray  # (n+1, 3)
    horizon: float  # T

    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1

    def _u(self, t) -> np.ndarray:
        t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), -self.horizon, self.horizon)
        return (t + self.horizon) / (2.0 * self.horizon)

    def position_many(self, t) -> np.ndarray:
        return _de_casteljau(self.control_points, self._u(t))

    def velocity_many(self, t) -> np.ndarray:
        """Derivative of the clamped curve, taken at the clamped parameter."""
        n = self.degree
        hodo = (self.control_points[1:] - self.control_points[:-1]) * (
            n / (2.0 * self.horizon)
        )
        return _de_casteljau(hodo, self._u(t))

    def position(self, t: float) -> np.ndarray:
        return self.position_many([t])[0]

    def velocity(self, t: float) -> np.ndarray:
        return self.velocity_many([t])[0]


def eval_target(curve: BezierCurve, t: float):
    """Predicted target position and velocity at time t (clamped to [-T, T])."""
    return curve.position(t), curve.velocity(t)


class BezierFitter:
    """Factored KKT system for the minimum-acceleration interpolation QP.

    One instance per (m, tau); reusable across planning cycles.
    """

    def __init__(self, m: int, tau: float):
        if m < 1:
            raise ValueError("need at least two observations (m >= 1)")
        if tau <= 0:
            raise ValueError("observation interval must be positive")
        self.m = m
        self.tau = tau
        self.horizon = m * tau
        n = 2 * m
        self.n = n
        T = self.horizon

        # Gram matrix of second derivatives over [-T, T], assembled by
        # Gauss-Legendre quadrature exact for polynomials of degree 2n-4.
        q = max(n - 1, 1)
        nodes, gl_w = np.polynomial.legendre.leggauss(q)
        u = 0.5 * (nodes + 1.0)
        # d2/du2 of Bernstein via the degree-(n-2) difference formula
        lower = bernstein_matrix(n - 2, u)  # (q, n-1)
        d2 = np.zeros((q, n + 1))
        scale = n * (n - 1)
        for i in range(n + 1):
            acc = np.zeros(q)
            if 0 <= i - 2 <= n - 2:
                acc += lower[:, i - 2]
            if 0 <= i - 1 <= n - 2:
                acc -= 2.0 * lower[:, i - 1]
            if 0 <= i <= n - 2:
                acc += lower[:, i]
            d2[:, i] = scale * acc
        d2 /= (2.0 * T) ** 2  # chain rule u -> t
        gram = d2.T @ (gl_w[:, None] * T * d2)

        # interpolation constraints at t = k*tau - T, i.e. u = k/(2m)
        u_obs = np.arange(m + 1) / (2.0 * m)
        constraints = bernstein_matrix(n, u_obs)

        dim = (n + 1) + (m + 1)
        kkt = np.zeros((dim, dim))
        kkt[: n + 1, : n + 1] = 2.0 * gram
        kkt[: n + 1, n + 1 :] = constraints.T
        kkt[n + 1 :, : n + 1] = constraints
        try:
            self._lu = scipy.linalg.lu_factor(kkt)
        except scipy.linalg.LinAlgError as exc:  # pragma: no cover
            raise RuntimeError("singular interpolation system") from exc
        self._constraints = constraints

    def fit(self, observations: np.ndarray) -> BezierCurve:
        """Fit the curve through (m+1, 3) observation positions."""
        h = np.asarray(observations, dtype=float)
        if h.shape != (self.m + 1, 3):
            raise ValueError(f"expected {(self.m + 1, 3)} observations, got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("observations must be finite")
        rhs = np.zeros((self.n + 1 + self.m + 1, 3))
        rhs[self.n + 1 :] = h
        sol = scipy.linalg.lu_solve(self._lu, rhs)
        ctrl = sol[: self.n + 1]
        if not np.all(np.isfinite(ctrl)):
            raise RuntimeError("interpolation solve produced non-finite control points")
        return BezierCurve(ctrl, self.horizon)


def fit_prediction(buffer: "ObservationBuffer") -> BezierCurve:
    """Fit a prediction to a warmed-up observation buffer."""
    fitter = buffer.fitter
    return fitter.fit(buffer.observations())


class ObservationBuffer:
    """Resamples irregular raw detections onto the tau grid.

    Raw detections are pushed as (time, position); the m+1 interpolation
    targets are read off at anchor - (m-i)*tau, anchored at the newest
    detection. During target loss nothing is pushed and the last fitted
    curve keeps being evaluated (with clamping) by the caller.
    """

    def __init__(self, tau: float, m: int):
        self.fitter = BezierFitter(m, tau)
        self.tau = tau
        self.m = m
        self._times: list[float] = []
        self._positions: list[np.ndarray] = []

    def push(self, t: float, position) -> None:
        p = np.asarray(position, dtype=float)
        if not (np.all(np.isfinite(p)) and math.isfinite(t)):
            raise ValueError("detection must be finite")
        if self._times and t <= self._times[-1]:
            raise ValueError("detections must arrive in increasing time order")
        self._times.append(float(t))
        self._positions.append(p)
        # keep a window just larger than the resampling span
        span = self.m * self.tau + 2.0 * self.tau
        while self._times[-1] - self._times[0] > span and len(self._times) > 2:
            self._times.pop(0)
            self._positions.pop(0)

    @property
    def warmed(self) -> bool:
        return (
            len(self._times) >= 2
            and self._times[-1] - self._times[0] >= self.m * self.tau - 1e-9
        )

    @property
    def anchor_time(self) -> float:
        if not self._times:
            raise ValueError("empty buffer")
        return self._times[-1]

    def observations(self) -> np.ndarray:
        """The m+1 resampled positions, oldest first."""
        if not self.warmed:
            raise ValueError("buffer not warmed up")
        times = np.asarray(self._times)
        pos = np.asarray(self._positions)
        anchor = times[-1]
        sample_t = anchor - (self.m - np.arange(self.m + 1)) * self.tau
        out = np.empty((self.m + 1, 3))
        for ax in range(3):
            out[:, ax] = np.interp(sample_t, times, pos[:, ax])
        return out
