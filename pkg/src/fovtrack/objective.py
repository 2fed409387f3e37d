"""Planner objective: visibility costs, energy, and feasibility penalties.

Every sampled term follows the same trapezoid scheme over each segment and
produces gradients with respect to the polynomial coefficients and segment
durations; duration gradients include both the quadrature prefactor and the
motion of the sample points, plus the coupling of later segments to earlier
durations through the predicted target's time argument. Hinge penalties use
a cubed hinge so the objective stays C2 at constraint activation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fovtrack import kernels
from fovtrack.fields import ScalarField3
from fovtrack.prediction import BezierCurve
from fovtrack.trajectory import (
    NCOEF,
    MincoTrajectory,
    TrajectoryGradient,
    propagate_gradient,
)


@dataclass(frozen=True)
class CostWeights:
    """Objective weights and kinematic limits."""

    occlusion: float = 100.0
    observation: float = 1.0e3
    angle: float = 1.0e4
    penalty: float = 1.0e5
    time: float = 1.0e5  # gamma
    v_max: float = 2.0
    a_max: float = 4.0
    yaw_rate_max: float = 1.5
    yaw_acc_max: float = 3.0

    def __post_init__(self):
        for name in ("occlusion", "observation", "angle", "penalty", "time"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} weight must be nonnegative")
        for name in ("v_max", "a_max", "yaw_rate_max", "yaw_acc_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class IntegrationRule:
    """Per-segment trapezoid sampling: k_i = max(min_samples, ceil(t_i/dt))."""

    min_samples: int = 8
    dt: float = 0.05

    def count(self, duration: float) -> int:
        return max(self.min_samples, int(math.ceil(duration / self.dt)))

    @staticmethod
    def weights(k: int) -> np.ndarray:
        eta = np.ones(k + 1)
        eta[0] = eta[-1] = 0.5
        return eta


@dataclass(frozen=True)
class EvaluationContext:
    """Frozen inputs for one objective evaluation."""

    prediction: BezierCurve
    horizon: float  # duration-regularizer target (planning horizon)
    obstacle_points: np.ndarray  # (N, 3) world frame
    fov_field: ScalarField3
    robot_field: ScalarField3
    xi_star: float  # field value at the preferred observation point
    weights: CostWeights = field(default_factory=CostWeights)
    rule: IntegrationRule = field(default_factory=IntegrationRule)
    prediction_age: float = 0.0  # offset into the prediction (>0 after loss)


@dataclass
class CostResult:
    """Value plus gradients in coefficient space."""

    value: float
    d_coef_pos: np.ndarray  # (m, 6, 3)
    d_coef_yaw: np.ndarray  # (m, 6)
    d_durations: np.ndarray  # (m,)

    @classmethod
    def zeros(cls, m: int) -> "CostResult":
        return cls(0.0, np.zeros((m, NCOEF, 3)), np.zeros((m, NCOEF)), np.zeros(m))

    def add_scaled(self, other: "CostResult", scale: float) -> None:
        self.value += scale * other.value
        self.d_coef_pos += scale * other.d_coef_pos
        self.d_coef_yaw += scale * other.d_coef_yaw
        self.d_durations += scale * other.d_durations


class SegmentGrid:
    """Sampled states of one segment plus the predicted target."""

    def __init__(self, traj: MincoTrajectory, ctx: EvaluationContext, s: int):
        t_i = traj.durations[s]
        k = ctx.rule.count(t_i)
        self.s = s
        self.k = k
        self.t_i = t_i
        self.ts = np.linspace(0.0, t_i, k + 1)
        self.eta = IntegrationRule.weights(k)
        self.B, self.pos_orders, self.yaw_orders = traj.segment_states(s, self.ts)
        offset = traj.cum_end[s] - t_i
        tg = ctx.prediction_age + offset + self.ts
        T = ctx.prediction.horizon
        self.rho = ctx.prediction.position_many(tg)
        self.rho_dot = ctx.prediction.velocity_many(tg)
        self.rho_dot[tg >= T] = 0.0  # clamped prediction is constant there

    @property
    def pos(self):
        return self.pos_orders[0]

    @property
    def yaw(self):
        return self.yaw_orders[0]


def _integrate(traj: MincoTrajectory, ctx: EvaluationContext, eval_segment) -> CostResult:
    """Shared trapezoid accumulation.

    ``eval_segment(grid)`` returns per-sample values ``f`` plus sparse
    gradient maps {state order: df/d pos^(order)} and {order: df/d yaw^(order)}
    and optionally df/d(target time); scattering into coefficient and
    duration space happens here.
    """
    out = CostResult.zeros(traj.segments)
    for s in range(traj.segments):
        grid = SegmentGrid(traj, ctx, s)
        f, dp, dpsi, d_target = eval_segment(grid)
        h = grid.t_i / grid.k
        w = grid.eta
        out.value += h * float(w @ f)
        dfdt = np.zeros(grid.k + 1)
        for order, arr in dp.items():
            out.d_coef_pos[s] += h * grid.B[order].T @ (w[:, None] * arr)
            dfdt += np.einsum("ij,ij->i", arr, grid.pos_orders[order + 1])
        for order, arr in dpsi.items():
            out.d_coef_yaw[s] += h * grid.B[order].T @ (w * arr)
            dfdt += arr * grid.yaw_orders[order + 1]
        if d_target is not None:
            dfdt = dfdt + d_target
            if s > 0:
                # earlier durations shift this segment's target times
                out.d_durations[:s] += h * float(w @ d_target)
        out.d_durations[s] += float(w @ (f + grid.ts * dfdt)) / grid.k
    return out


def integrate_cost(sample_fn, traj: MincoTrajectory, ctx: EvaluationContext) -> CostResult:
    """Trapezoid-integrate a user cost over the trajectory.

    ``sample_fn(grid, j)`` is called per sample and returns
    ``(f, dp, dpsi, d_target)`` where ``dp`` maps state order to a (3,)
    gradient and ``dpsi`` maps order to a scalar.
    """

    def eval_segment(grid: SegmentGrid):
        n = grid.k + 1
        f = np.zeros(n)
        dp: dict[int, np.ndarray] = {}
        dpsi: dict[int, np.ndarray] = {}
        d_target = np.zeros(n)
        for j in range(n):
            fj, dpj, dpsij, dtj = sample_fn(grid, j)
            f[j] = fj
            for o, v in dpj.items():
                dp.setdefault(o, np.zeros((n, 3)))[j] = v
            for o, v in dpsij.items():
                dpsi.setdefault(o, np.zeros(n))[j] = v
            d_target[j] = dtj
        return f, dp, dpsi, d_target

    return _integrate(traj, ctx, eval_segment)


def _rotate_to_body(yaw: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Apply R(yaw_j) to vecs[j] for each sample."""
    c, s = np.cos(yaw), np.sin(yaw)
    out = np.empty_like(vecs)
    out[:, 0] = c * vecs[:, 0] + s * vecs[:, 1]
    out[:, 1] = -s * vecs[:, 0] + c * vecs[:, 1]
    out[:, 2] = vecs[:, 2]
    return out


def _rotate_to_world(yaw: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Apply R(yaw_j)^T to vecs[j] for each sample."""
    c, s = np.cos(yaw), np.sin(yaw)
    out = np.empty_like(vecs)
    out[:, 0] = c * vecs[:, 0] - s * vecs[:, 1]
    out[:, 1] = s * vecs[:, 0] + c * vecs[:, 1]
    out[:, 2] = vecs[:, 2]
    return out


def occlusion_cost(traj: MincoTrajectory, ctx: EvaluationContext) -> CostResult:
    """Half the squared sum of field values over obstacle points in view.

    Pushing this down drives obstacles out of the viewing pyramid; points
    outside the pyramid see a zero field and exert no force.
    """
    fld = ctx.fov_field

    def eval_segment(grid: SegmentGrid):
        poses = np.column_stack([grid.pos, grid.yaw])
        S, gsum, dsum = kernels.field_pose_accumulate(
            fld.values, fld.gradients, fld.spec.origin, fld.spec.resolution,
            poses, ctx.obstacle_points, False)
        f = 0.5 * S * S
        dp = {0: -S[:, None] * _rotate_to_world(grid.yaw, gsum)}
        dpsi = {0: S * dsum}
        return f, dp, dpsi, None

    return _integrate(traj, ctx, eval_segment)


def observation_cost(traj: MincoTrajectory, ctx: EvaluationContext) -> CostResult:
    """Half-squared gap between the best achievable field value and the
    target's field value; zero exactly when the target sits at the preferred
    observation point in the body frame."""
    fld = ctx.fov_field

    def eval_segment(grid: SegmentGrid):
        delta = grid.rho - grid.pos
        u = _rotate_to_body(grid.yaw, delta)
        val, gradb = fld.query_many(u)
        e = ctx.xi_star - val
        grad_world = _rotate_to_world(grid.yaw, gradb)
        f = 0.5 * e * e
        dp = {0: e[:, None] * grad_world}
        dpsi = {0: -e * (gradb[:, 0] * u[:, 1] - gradb[:, 1] * u[:, 0])}
        rho_dot_b = _rotate_to_body(grid.yaw, grid.rho_dot)
        d_target = -e * np.einsum("ij,ij->i", gradb, rho_dot_b)
        return f, dp, dpsi, d_target

    return _integrate(traj, ctx, eval_segment)


def angle_cost(traj: MincoTrajectory, ctx: EvaluationContext) -> CostResult:
    """1 - cos(yaw error) against the bearing of the predicted target.

    Samples where the target is (nearly) overhead have no defined bearing
    and contribute zero.
    """
    eps2 = 1e-12

    def eval_segment(grid: SegmentGrid):
        delta = grid.rho - grid.pos
        r2 = delta[:, 0] ** 2 + delta[:, 1] ** 2
        ok = r2 > eps2
        phi = np.arctan2(delta[:, 1], delta[:, 0], where=ok, out=np.zeros_like(r2))
        ang = grid.yaw - phi
        sin_a = np.where(ok, np.sin(ang), 0.0)
        f = np.where(ok, 1.0 - np.cos(ang), 0.0)
        inv_r2 = np.where(ok, 1.0 / np.where(ok, r2, 1.0), 0.0)
        dphi_dd = np.zeros_like(delta)  # d phi / d delta
        dphi_dd[:, 0] = -delta[:, 1] * inv_r2
        dphi_dd[:, 1] = delta[:, 0] * inv_r2
        dp = {0: sin_a[:, None] * dphi_dd}  # d delta/d pos = -I, twice negated
        dpsi = {0: sin_a}
        d_target = -sin_a * np.einsum("ij,ij->i", dphi_dd, grid.rho_dot)
        return f, dp, dpsi, d_target

    return _integrate(traj, ctx, eval_segment)


def penalty_cost(traj: MincoTrajectory, ctx: EvaluationContext) -> CostResult:
    """Collision penetration plus cubed-hinge speed/acceleration limits."""
    w = ctx.weights
    fld = ctx.robot_field

    def eval_segment(grid: SegmentGrid):
        poses = np.column_stack([grid.pos, grid.yaw])
        H, gsum, dsum = kernels.field_pose_accumulate(
            fld.values, fld.gradients, fld.spec.origin, fld.spec.resolution,
            poses, ctx.obstacle_points, True)
        f = H.copy()
        dp = {0: -_rotate_to_world(grid.yaw, gsum)}
        dpsi = {0: dsum.copy()}

        vel, acc = grid.pos_orders[1], grid.pos_orders[2]
        for order, vec, limit in ((1, vel, w.v_max), (2, acc, w.a_max)):
            excess = np.einsum("ij,ij->i", vec, vec) - limit * limit
            act = np.maximum(excess, 0.0)
            f += act**3
            dp[order] = 6.0 * (act * act)[:, None] * vec
        yr, ya = grid.yaw_orders[1], grid.yaw_orders[2]
        for order, val, limit in ((1, yr, w.yaw_rate_max), (2, ya, w.yaw_acc_max)):
            act = np.maximum(val * val - limit * limit, 0.0)
            f += act**3
            dpsi[order] = 6.0 * act * act * val
        return f, dp, dpsi, None

    return _integrate(traj, ctx, eval_segment)


def energy_cost(traj: MincoTrajectory, gamma: float, horizon: float) -> CostResult:
    """Exact integrated squared jerk (position and yaw) plus the duration
    regularizer gamma*(horizon - sum t_i)^2."""
    out = CostResult.zeros(traj.segments)
    scale = np.array([6.0, 24.0, 60.0])  # jerk coefficients of t^3, t^4, t^5
    for s in range(traj.segments):
        T = traj.durations[s]
        powers = np.array([T, T**2, T**3, T**4, T**5])
        gram = np.empty((3, 3))
        for a in range(3):
            for b in range(3):
                gram[a, b] = powers[a + b] / (a + b + 1)
        cp = traj.coef_pos[s][3:, :] * scale[:, None]  # (3, 3): jerk-poly coeffs
        cy = traj.coef_yaw[s][3:] * scale
        out.value += float(np.einsum("ad,ab,bd->", cp, gram, cp) + cy @ gram @ cy)
        out.d_coef_pos[s][3:, :] = 2.0 * scale[:, None] * (gram @ cp)
        out.d_coef_yaw[s][3:] = 2.0 * scale * (gram @ cy)
        # Leibniz term: integrand at the segment end
        tv = np.array([1.0, T, T * T])
        jerk_end = cp.T @ tv
        yaw_jerk_end = cy @ tv
        out.d_durations[s] += float(jerk_end @ jerk_end + yaw_jerk_end**2)
    gap = horizon - float(np.sum(traj.durations))
    out.value += gamma * gap * gap
    out.d_durations -= 2.0 * gamma * gap
    return out


def total_objective(
    traj: MincoTrajectory, ctx: EvaluationContext, components: dict | None = None
) -> tuple[float, TrajectoryGradient]:
    """Weighted sum of all terms, with gradients propagated to waypoint space.

    Pass a dict as ``components`` to receive the unweighted term values.
    """
    w = ctx.weights
    total = CostResult.zeros(traj.segments)
    parts = {
        "occlusion": (occlusion_cost(traj, ctx), w.occlusion),
        "observation": (observation_cost(traj, ctx), w.observation),
        "angle": (angle_cost(traj, ctx), w.angle),
        "energy": (energy_cost(traj, w.time, ctx.horizon), 1.0),
        "penalty": (penalty_cost(traj, ctx), w.penalty),
    }
    for name, (res, scale) in parts.items():
        total.add_scaled(res, scale)
        if components is not None:
            components[name] = res.value
    grad = propagate_gradient(traj, total.d_coef_pos, total.d_coef_yaw, total.d_durations)
    return total.value, grad
