"""
Process and measurement models, plus the built-in models used by scenarios.

    x_k = f(x_{k−1}, u_{k−1}, w_{k−1}),  w ~ N(0, Q)
    y_k = h(x_k) + v_k,                  v ~ N(0, R)

F and G are the Jacobians of f with respect to x and w at the posterior
mean, w = 0 and the known input u; H is the Jacobian of h at the prior mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from core.matrix import as_matrix

Vector = np.ndarray
StateFn = Callable[[Vector, Vector], Vector]
JacobianFn = Callable[[Vector, Vector], np.ndarray]


@dataclass(frozen=True, eq=False)
class ProcessModel:
    propagate_state: StateFn
    jacobian_f: JacobianFn
    jacobian_g: JacobianFn
    q_cov: np.ndarray


@dataclass(frozen=True, eq=False)
class MeasurementModelSet:
    predict: Callable[[Vector], Vector]
    jacobian_h: Callable[[Vector], np.ndarray]
    r_cov: np.ndarray
    residual: Optional[Callable[[Vector, Vector], Vector]] = None
    """y − h(x) with any wrapping the measurement needs; plain subtraction when None."""

    def innovation(self, y: Vector, predicted: Vector) -> Vector:
        if self.residual is None:
            return np.asarray(y, dtype=np.float64) - predicted
        return np.asarray(self.residual(y, predicted), dtype=np.float64)


# ── Linear models ─────────────────────────────────────────────────────────────

def linear_process(f, g, q, b=None) -> ProcessModel:
    """x_k = F x + B u + G w.  An empty G (n×0) and Q (0×0) mean no process noise."""
    f = as_matrix(f, "F")
    if np.size(g) == 0 and np.size(q) == 0:
        g = np.zeros((f.shape[0], 0))
        q = np.zeros((0, 0))
    else:
        g = as_matrix(g, "G")
        q = as_matrix(q, "Q")
    b_mat = None if b is None else as_matrix(b, "B")

    def propagate(x: Vector, u: Vector) -> Vector:
        out = f @ x
        if b_mat is not None and u is not None and np.size(u):
            out = out + b_mat @ u
        return out

    return ProcessModel(propagate, lambda x, u: f, lambda x, u: g, q)


def linear_measurement(h, r) -> MeasurementModelSet:
    """y = H x + v."""
    h = as_matrix(h, "H")
    r = as_matrix(r, "R")
    return MeasurementModelSet(lambda x: h @ x, lambda x: h, r)


# ── Built-in models ───────────────────────────────────────────────────────────

def scalar_models(a: float, q: float, r: float) -> tuple[ProcessModel, MeasurementModelSet]:
    """x' = a x + w, y = x + v."""
    return (
        linear_process([[a]], [[1.0]], [[q]]),
        linear_measurement([[1.0]], [[r]]),
    )


def constant_velocity_models(dt: float, q, r) -> tuple[ProcessModel, MeasurementModelSet]:
    """1-D position/velocity driven by white acceleration; position is measured."""
    f = [[1.0, dt], [0.0, 1.0]]
    g = [[0.5 * dt * dt], [dt]]
    return linear_process(f, g, q), linear_measurement([[1.0, 0.0]], r)


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def range_bearing_models(dt: float, q, r) -> tuple[ProcessModel, MeasurementModelSet]:
    """2-D constant velocity [px, py, vx, vy]; range and bearing seen from the origin."""
    f = np.eye(4)
    f[0, 2] = f[1, 3] = dt
    g = np.array([
        [0.5 * dt * dt, 0.0],
        [0.0, 0.5 * dt * dt],
        [dt, 0.0],
        [0.0, dt],
    ])
    process = linear_process(f, g, q)

    def predict(x: Vector) -> Vector:
        return np.array([math.hypot(x[0], x[1]), math.atan2(x[1], x[0])])

    def jacobian(x: Vector) -> np.ndarray:
        rho2 = x[0] * x[0] + x[1] * x[1]
        rho = math.sqrt(rho2)
        return np.array([
            [x[0] / rho, x[1] / rho, 0.0, 0.0],
            [-x[1] / rho2, x[0] / rho2, 0.0, 0.0],
        ])

    def residual(y: Vector, predicted: Vector) -> Vector:
        e = np.asarray(y, dtype=np.float64) - predicted
        e[1] = _wrap_angle(e[1])
        return e

    return process, MeasurementModelSet(predict, jacobian, as_matrix(r, "R"), residual)
