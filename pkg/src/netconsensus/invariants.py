"""Conserved quantities and Lyapunov functions evaluated on states.

Every function accepts a single state (shape ``(n,)``) or a stack of
samples (shape ``(T, n)``) and returns a float or a length-T array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .functions import ScalarFn
from .graph import Graph


@dataclass
class MonitorChannel:
    name: str
    samples: np.ndarray


def _per_agent(fn, arr):
    """Sum over agents of fn(i, column_i) for (n,) or (T, n) inputs."""
    arr = np.asarray(arr, dtype=float)
    cols = arr.T if arr.ndim == 2 else arr
    total = sum(fn(i, cols[i]) for i in range(len(cols)))
    return total if arr.ndim == 2 else float(total)


def conserved_E_first(gains: Sequence[ScalarFn], x):
    """sum_i int_0^{x_i} 1/gamma_i."""
    return _per_agent(lambda i, c: gains[i].reciprocal_integral(0.0, c), x)


def conserved_p_second(gains: Sequence[ScalarFn], v):
    """sum_i int_0^{v_i} 1/gamma_i."""
    return conserved_E_first(gains, v)


def conserved_E_damped(dampings: Sequence[ScalarFn], x, v):
    """sum_i (int_0^{x_i} kappa_i + v_i)."""
    v = np.asarray(v, dtype=float)
    vs = v.sum(axis=-1)
    out = _per_agent(lambda i, c: dampings[i].integral(0.0, c), x) + vs
    return out if np.ndim(out) else float(out)


def lyapunov_first(gains: Sequence[ScalarFn], x, x_star: float):
    """sum_i int_{x*}^{x_i} (y - x*)/gamma_i(y) dy; zero only at consensus on x*."""
    return _per_agent(lambda i, c: gains[i].reciprocal_moment(x_star, c, x_star), x)


def _edge_potential(interactions_a: Sequence[ScalarFn], graph: Graph, x):
    """sum over edges of int_0^{x_i - x_j} a_ij."""
    x = np.asarray(x, dtype=float)
    tail, head = graph.edge_index
    xbar = x[..., tail] - x[..., head]
    cols = xbar.T if xbar.ndim == 2 else xbar
    total = sum(interactions_a[k].integral(0.0, cols[k]) for k in range(graph.m))
    if graph.m == 0:
        total = np.zeros(x.shape[0]) if x.ndim == 2 else 0.0
    return total


def lyapunov_second(gains: Sequence[ScalarFn], interactions_a: Sequence[ScalarFn], graph: Graph,
                    x, v, v_star: float):
    """Velocity spread about v* weighted by 1/gamma plus the edge potentials."""
    out = lyapunov_first(gains, v, v_star) + _edge_potential(interactions_a, graph, x)
    return out if np.ndim(out) else float(out)


def lyapunov_damped(interactions_a: Sequence[ScalarFn], graph: Graph, x, v,
                    double_count: bool = False):
    """Kinetic energy sum v_i^2/2 plus the edge potentials.

    Each undirected edge is counted once by default, which makes the value
    non-increasing along damped trajectories. ``double_count=True`` sums the
    potential over ordered neighbour pairs instead (twice the edge term).
    """
    v = np.asarray(v, dtype=float)
    kinetic = 0.5 * np.sum(v * v, axis=-1)
    pot = _edge_potential(interactions_a, graph, x)
    out = kinetic + (2.0 if double_count else 1.0) * pot
    return out if np.ndim(out) else float(out)


def lemma1_bound(dampings: Sequence[ScalarFn], interactions_a: Sequence[ScalarFn], graph: Graph,
                 x0, v0, radius: float = 10.0) -> float:
    """A priori bound on ||x(t)||_inf for damped runs.

    With V0 = V(x0, v0) (single-counted), every velocity satisfies
    |v_i| <= sqrt(2 V0) and every edge difference satisfies
    int_0^{|xbar_e|} a_e <= V0, so the spread is at most (n-1) times the
    largest such |xbar_e|. Conservation of E then pins the mean position:
    if max|x_i| = X exceeds the spread, all x_i share a sign and
    |int_0^{x_i} kappa_i| >= kappa_lo (X - spread), while the sum of those
    integrals equals E0 - sum(v). Hence

        X <= spread + (|E0| + n sqrt(2 V0)) / (n kappa_lo).

    When a damping has no positive global lower bound, kappa_lo is the
    sampled minimum over [-R, R]; the result is then only valid if it
    stays inside that interval (the trajectory cannot leave it without
    first crossing the bound). R starts at ``radius`` and is enlarged
    until the bound fits, or a ValueError is raised.
    """
    from .functions import validate_gain
    from .numerics import solve_monotone

    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    n = len(x0)
    V0 = lyapunov_damped(interactions_a, graph, x0, v0)
    E0 = conserved_E_damped(dampings, x0, v0)
    reach = 0.0
    if V0 > 0:
        for a in interactions_a:
            r = solve_monotone(lambda y, a=a: float(a.integral(0.0, y)), V0, (0.0, 1.0))
            reach = max(reach, abs(r))
    spread = (n - 1) * reach
    vmax = np.sqrt(2.0 * V0)
    drive = (abs(E0) + n * vmax) / n

    kappa_lo = min(k.bounds()[0] for k in dampings)
    if kappa_lo > 0:
        return float(spread + drive / kappa_lo)
    R = float(radius)
    for _ in range(60):
        kappa_lo = min(validate_gain(k, (-R, R)).gamma_lower for k in dampings)
        if not kappa_lo > 0:
            break
        bound = float(spread + drive / kappa_lo)
        if bound <= R:
            return bound
        R = 1.5 * bound
    raise ValueError("no self-consistent bound: damping decays too fast")
