"""Consensus values predicted from conservation laws, before simulating."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .functions import ScalarFn
from .numerics import solve_monotone, solve_shifted_laplacian


@dataclass(frozen=True)
class EquilibriumPrediction:
    value: float
    residual: float
    method: str  # "closed-form" or "quadrature"
    lhs: float = 0.0

    def __float__(self):
        return self.value


def _method(fns: Sequence[ScalarFn], which: str) -> str:
    return "closed-form" if all(f.closed_form[which] for f in fns) else "quadrature"


def _solve(total: callable, lhs: float, seed) -> tuple[float, float]:
    x = solve_monotone(total, lhs, seed)
    return x, abs(total(x) - lhs)


def predict_first_order(gains: Sequence[ScalarFn], x0) -> EquilibriumPrediction:
    """Common value x* with sum_i int_0^{x0_i} 1/gamma_i = int_0^{x*} sum_i 1/gamma_i.

    The right side is strictly increasing in x* for positive gains, so the
    root is unique and is bracketed by the initial hull.
    """
    x0 = np.asarray(x0, dtype=float)
    if len(gains) != len(x0):
        raise ValueError("one gain per agent is required")
    lhs = float(sum(g.reciprocal_integral(0.0, xi) for g, xi in zip(gains, x0)))

    def total(x):
        return float(sum(g.reciprocal_integral(0.0, x) for g in gains))

    x, res = _solve(total, lhs, (x0.min(), x0.max()))
    return EquilibriumPrediction(float(x), float(res), _method(gains, "reciprocal"), lhs)


def predict_second_order_velocity(gains: Sequence[ScalarFn], v0) -> EquilibriumPrediction:
    """Same conservation law as :func:`predict_first_order`, applied to velocities."""
    return predict_first_order(gains, v0)


def predict_damped_position(dampings: Sequence[ScalarFn], x0, v0) -> EquilibriumPrediction:
    """x* with sum_i (int_0^{x0_i} kappa_i + v0_i) = int_0^{x*} sum_i kappa_i.

    Here the damping enters directly, not through its reciprocal.
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if not (len(dampings) == len(x0) == len(v0)):
        raise ValueError("dampings, x0 and v0 must have equal length")
    lhs = float(sum(k.integral(0.0, xi) for k, xi in zip(dampings, x0)) + v0.sum())

    def total(x):
        return float(sum(k.integral(0.0, x) for k in dampings))

    x, res = _solve(total, lhs, (x0.min(), x0.max()))
    return EquilibriumPrediction(float(x), float(res), _method(dampings, "integral"), lhs)


def predict_pi_average(x0) -> float:
    return float(np.mean(np.asarray(x0, dtype=float)))


def power_steady_state(net, b: float, omega_ref: float) -> tuple[np.ndarray, np.ndarray]:
    """Decentralized controller equilibrium.

    Returns ``z0 = (b I + L_k)^{-1} (D omega_ref 1 - p_m)`` and
    ``omega0 = omega_ref 1``; ``omega_ref`` in rad/s.
    """
    if not b > 0:
        raise ValueError("integral gain b must be positive")
    L = net.laplacian()
    n = net.n
    rhs = net.d * omega_ref - net.p_m
    z0 = solve_shifted_laplacian(L, b, rhs)
    return z0, np.full(n, float(omega_ref))
