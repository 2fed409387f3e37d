"""Limited-memory quasi-Newton minimizer.

Two-loop L-BFGS with a bracketing weak-Wolfe line search: the bisection
never needs the strong curvature condition, so kinks (hinge activations,
field plateau edges) do not stall it. Accepted iterates are monotone in the
objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OptimizerConfig:
    memory: int = 8
    max_iterations: int = 60
    grad_tol: float = 1e-4
    rel_decrease_tol: float = 1e-9
    armijo_c: float = 1e-4
    curvature_c: float = 0.9
    max_line_search: int = 40
    duration_transform: str = "softplus"

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.grad_tol <= 0 or self.rel_decrease_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.armijo_c < self.curvature_c < 1:
            raise ValueError("need 0 < armijo_c < curvature_c < 1")


@dataclass
class MinimizeResult:
    x: np.ndarray
    value: float
    gradient: np.ndarray
    iterations: int
    evaluations: int
    status: str

    @property
    def converged(self) -> bool:
        return self.status.startswith("converged")


def _two_loop(grad, s_list, y_list, rho_list):
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def minimize(fun, x0, config: OptimizerConfig = OptimizerConfig()) -> MinimizeResult:
    """Minimize ``fun(x) -> (value, gradient)`` from ``x0``.

    Terminates on scaled gradient norm, relative decrease, or the iteration
    cap; a failed line search returns the best iterate seen so far.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun(x)
    evals = 1
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        return MinimizeResult(x, f, g, 0, evals, "nan_abort")

    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    rho_list: list[float] = []
    status = "max_iterations"
    it = 0
    for it in range(1, config.max_iterations + 1):
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= config.grad_tol * max(1.0, float(np.max(np.abs(x)))):
            status = "converged_gradient"
            break
        d = -_two_loop(g, s_list, y_list, rho_list)
        dg = float(d @ g)
        if dg >= 0.0:  # defective curvature pairs: restart from steepest descent
            s_list.clear()
            y_list.clear()
            rho_list.clear()
            d = -g
            dg = -float(g @ g)

        step = 1.0 if s_list else min(1.0, 1.0 / max(gnorm, 1e-12))
        lo, hi = 0.0, math.inf
        f_new = f
        g_new = g
        x_new = x
        accepted = False
        for _ in range(config.max_line_search):
            x_t = x + step * d
            f_t, g_t = fun(x_t)
            evals += 1
            if not (math.isfinite(f_t) and np.all(np.isfinite(g_t))):
                hi = step  # treat as overshoot and shrink
            elif f_t > f + config.armijo_c * step * dg:
                hi = step
            elif float(g_t @ d) < config.curvature_c * dg:
                lo = step
            else:
                accepted = True
                x_new, f_new, g_new = x_t, f_t, g_t
                break
            step = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * step
            if step <= 0.0 or not math.isfinite(step):
                break
        if not accepted:
            status = "line_search_failed"
            break

        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > config.memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)

        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        if decrease <= config.rel_decrease_tol * max(1.0, abs(f)):
            status = "converged_decrease"
            break
    return MinimizeResult(x, f, g, it, evals, status)
