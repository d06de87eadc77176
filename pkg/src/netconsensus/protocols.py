"""Right-hand sides of the five consensus control laws.

Flat state layouts used by the integrators:

==========================  ==============
kind                        layout
==========================  ==============
FirstOrderNonlinear         [x]
SecondOrderNonlinear        [x, v]
SecondOrderDamped           [x, v]
PiSingle                    [z, x]
PiDouble                    [z, x, v]
==========================  ==============
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .functions import ScalarFn, validate_gain, validate_interaction
from .graph import Graph, laplacian


class ProtocolKind(str, enum.Enum):
    FIRST_ORDER = "FirstOrderNonlinear"
    SECOND_ORDER = "SecondOrderNonlinear"
    DAMPED = "SecondOrderDamped"
    PI_SINGLE = "PiSingle"
    PI_DOUBLE = "PiDouble"

    @property
    def is_pi(self) -> bool:
        return self in (ProtocolKind.PI_SINGLE, ProtocolKind.PI_DOUBLE)

    @property
    def second_order(self) -> bool:
        return self in (ProtocolKind.SECOND_ORDER, ProtocolKind.DAMPED, ProtocolKind.PI_DOUBLE)

    @property
    def blocks(self) -> tuple[str, ...]:
        return {
            ProtocolKind.FIRST_ORDER: ("x",),
            ProtocolKind.SECOND_ORDER: ("x", "v"),
            ProtocolKind.DAMPED: ("x", "v"),
            ProtocolKind.PI_SINGLE: ("z", "x"),
            ProtocolKind.PI_DOUBLE: ("z", "x", "v"),
        }[self]

    @property
    def code(self) -> int:
        return list(ProtocolKind).index(self)


class SpecError(ValueError):
    """Protocol specification violates its constraints."""


@dataclass(frozen=True)
class PIGains:
    a: float
    b: float
    delta: float = 0.0
    gamma: float = 0.0


@dataclass(frozen=True, eq=False)
class ProtocolSpec:
    """A control law with its graph, functions and gains.

    ``gains`` holds gamma_i (first/second order) or kappa_i (damped).
    ``interactions_a`` / ``interactions_b`` hold one function per edge, in
    graph edge order, for the edge as listed (i, j); the reverse direction is
    obtained from oddness. PI kinds use the (weighted) Laplacian and the
    scalar gains in ``pi``; zero ``a`` is permitted so the no-integral-action
    baseline can be simulated.
    """

    kind: ProtocolKind
    graph: Graph
    gains: tuple[ScalarFn, ...] = ()
    interactions_a: tuple[ScalarFn, ...] = ()
    interactions_b: tuple[ScalarFn, ...] = ()
    pi: PIGains | None = None
    d: np.ndarray | None = None
    x_anchor: np.ndarray | None = None
    validation_range: tuple[float, float] = (-10.0, 10.0)
    _lap: np.ndarray = field(default=None, repr=False, compare=False)
    _groups: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        kind = ProtocolKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "gains", tuple(self.gains))
        object.__setattr__(self, "interactions_a", tuple(self.interactions_a))
        object.__setattr__(self, "interactions_b", tuple(self.interactions_b))
        object.__setattr__(self, "_groups", {
            "gains": _group_by_function(self.gains),
            "a": _group_by_function(self.interactions_a),
            "b": _group_by_function(self.interactions_b),
        })
        n, m = self.graph.n, self.graph.m
        d = np.zeros(n) if self.d is None else np.array(self.d, dtype=float)
        if d.shape != (n,):
            raise SpecError(f"disturbance must have length {n}")
        object.__setattr__(self, "d", d)
        if self.x_anchor is not None:
            xa = np.array(self.x_anchor, dtype=float)
            if xa.shape != (n,):
                raise SpecError(f"x_anchor must have length {n}")
            object.__setattr__(self, "x_anchor", xa)

        if kind.is_pi:
            p = self.pi
            if p is None:
                raise SpecError("PI kinds need pi gains")
            if not (p.a >= 0 and p.b > 0 and p.delta >= 0):
                raise SpecError("PI gains need a >= 0, b > 0, delta >= 0")
            if kind is ProtocolKind.PI_DOUBLE and not p.gamma > 0:
                raise SpecError("PiDouble needs gamma > 0")
            object.__setattr__(self, "_lap", laplacian(self.graph, weighted=True))
            return

        if np.any(d != 0):
            raise SpecError(f"{kind.value} does not accept a disturbance")
        if len(self.gains) != n:
            raise SpecError(f"expected {n} gain functions, got {len(self.gains)}")
        if len(self.interactions_a) != m:
            raise SpecError(f"expected {m} interaction functions, got {len(self.interactions_a)}")
        if kind is ProtocolKind.SECOND_ORDER and len(self.interactions_b) != m:
            raise SpecError(f"expected {m} velocity interaction functions")
        for i, g in enumerate(self.gains):
            rep = validate_gain(g, self.validation_range)
            if not rep.ok:
                raise SpecError(f"gain of vertex {i + 1} is not positive on the validation range")
        for k, f in enumerate(self.interactions_a + self.interactions_b):
            rep = validate_interaction(f, self.validation_range)
            if not rep.ok:
                raise SpecError(f"interaction {k + 1} is not odd and sign-preserving")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def state_dim(self) -> int:
        return self.n * len(self.kind.blocks)

    @property
    def laplacian(self) -> np.ndarray:
        if self._lap is None:
            object.__setattr__(self, "_lap", laplacian(self.graph, weighted=True))
        return self._lap

    def anchor(self, x0) -> np.ndarray:
        return self.x_anchor if self.x_anchor is not None else np.asarray(x0, dtype=float)

    def with_anchor(self, x0) -> ProtocolSpec:
        if self.x_anchor is not None:
            return self
        return _replace(self, x_anchor=np.array(x0, dtype=float))

    def block_slices(self) -> dict[str, slice]:
        n = self.n
        return {name: slice(k * n, (k + 1) * n) for k, name in enumerate(self.kind.blocks)}

    def pack(self, state: AgentState) -> np.ndarray:
        parts = []
        for name in self.kind.blocks:
            v = getattr(state, name)
            parts.append(np.zeros(self.n) if v is None else np.asarray(v, dtype=float))
        return np.concatenate(parts)

    def unpack(self, y) -> AgentState:
        y = np.asarray(y, dtype=float)
        sl = self.block_slices()
        return AgentState(**{name: y[s] for name, s in sl.items()})


def _replace(spec: ProtocolSpec, **changes) -> ProtocolSpec:
    import dataclasses

    return dataclasses.replace(spec, _lap=None, _groups=None, **changes)


@dataclass
class AgentState:
    x: np.ndarray
    v: np.ndarray | None = None
    z: np.ndarray | None = None


def _group_by_function(fns: Sequence[ScalarFn]) -> list[tuple[ScalarFn, np.ndarray]]:
    groups: dict[int, tuple[ScalarFn, list]] = {}
    for k, f in enumerate(fns):
        key = id(f)
        if key not in groups:
            # equal-valued dataclasses share a group too
            for other_key, (g, idx) in groups.items():
                if g == f:
                    key = other_key
                    break
            else:
                groups[key] = (f, [])
        groups[key][1].append(k)
    return [(f, np.asarray(idx)) for f, idx in groups.values()]


def edge_flow(graph: Graph, fns, x: np.ndarray) -> np.ndarray:
    """Per-vertex sum of a_ij(x_i - x_j) over neighbours.

    Evaluated once per edge as f_e(x_tail - x_head); the head receives the
    negated value, which equals a_ji(x_j - x_i) for odd f_e.
    """
    tail, head = graph.edge_index
    out = np.zeros(graph.n)
    if graph.m == 0:
        return out
    diff = x[tail] - x[head]
    flow = np.empty(graph.m)
    for f, idx in _groups(fns):
        flow[idx] = f(diff[idx])
    np.add.at(out, tail, flow)
    np.add.at(out, head, -flow)
    return out


def _groups(fns):
    """Accept either a function list or its precomputed grouping."""
    if isinstance(fns, list) and (not fns or isinstance(fns[0], tuple)):
        return fns
    return _group_by_function(fns)


def _eval_gains(groups, x: np.ndarray) -> np.ndarray:
    out = np.empty(len(x))
    for f, idx in _groups(groups):
        out[idx] = f(x[idx])
    return out


def rhs_first_order_nonlinear(spec: ProtocolSpec, state: AgentState) -> np.ndarray:
    x = np.asarray(state.x, dtype=float)
    return -_eval_gains(spec._groups["gains"], x) * edge_flow(spec.graph, spec._groups["a"], x)


def rhs_second_order_nonlinear(spec: ProtocolSpec, state: AgentState):
    x, v = np.asarray(state.x, dtype=float), np.asarray(state.v, dtype=float)
    coupling = edge_flow(spec.graph, spec._groups["a"], x) + edge_flow(spec.graph, spec._groups["b"], v)
    return v.copy(), -_eval_gains(spec._groups["gains"], v) * coupling


def rhs_second_order_damped(spec: ProtocolSpec, state: AgentState):
    x, v = np.asarray(state.x, dtype=float), np.asarray(state.v, dtype=float)
    vdot = -_eval_gains(spec._groups["gains"], x) * v - edge_flow(spec.graph, spec._groups["a"], x)
    return v.copy(), vdot


def _require_anchor(spec):
    if spec.x_anchor is None:
        raise SpecError("delta > 0 needs x_anchor (use spec.with_anchor(x0))")
    return spec.x_anchor


def rhs_pi_single(spec: ProtocolSpec, state: AgentState):
    x, z = np.asarray(state.x, dtype=float), np.asarray(state.z, dtype=float)
    p, L = spec.pi, spec.laplacian
    xdot = spec.d - p.b * (L @ x) - p.a * (L @ z)
    if p.delta:
        xdot = xdot - p.delta * (x - _require_anchor(spec))
    return x.copy(), xdot


def rhs_pi_double(spec: ProtocolSpec, state: AgentState):
    x, v, z = (np.asarray(s, dtype=float) for s in (state.x, state.v, state.z))
    p, L = spec.pi, spec.laplacian
    vdot = spec.d - p.b * (L @ x) - p.a * (L @ z) - p.gamma * v
    if p.delta:
        vdot = vdot - p.delta * (x - _require_anchor(spec))
    return x.copy(), v.copy(), vdot


def rhs_flat(spec: ProtocolSpec, y: np.ndarray) -> np.ndarray:
    """Derivative of the flat state vector (layout per kind)."""
    n = spec.n
    k = spec.kind
    if k is ProtocolKind.FIRST_ORDER:
        return rhs_first_order_nonlinear(spec, AgentState(y))
    if k is ProtocolKind.SECOND_ORDER:
        return np.concatenate(rhs_second_order_nonlinear(spec, AgentState(y[:n], y[n:])))
    if k is ProtocolKind.DAMPED:
        return np.concatenate(rhs_second_order_damped(spec, AgentState(y[:n], y[n:])))
    if k is ProtocolKind.PI_SINGLE:
        return np.concatenate(rhs_pi_single(spec, AgentState(y[n:], z=y[:n])))
    return np.concatenate(rhs_pi_double(spec, AgentState(y[n:2 * n], y[2 * n:], y[:n])))


def rhs(spec: ProtocolSpec, state: AgentState):
    """Dispatch on ``spec.kind``; returns a tuple of block derivatives in layout order."""
    k = spec.kind
    if k is ProtocolKind.FIRST_ORDER:
        return (rhs_first_order_nonlinear(spec, state),)
    return {
        ProtocolKind.SECOND_ORDER: rhs_second_order_nonlinear,
        ProtocolKind.DAMPED: rhs_second_order_damped,
        ProtocolKind.PI_SINGLE: rhs_pi_single,
        ProtocolKind.PI_DOUBLE: rhs_pi_double,
    }[k](spec, state)


def affine_system(spec: ProtocolSpec) -> tuple[np.ndarray, np.ndarray]:
    """(A, c) with flat-state derivative A y + c for the PI kinds."""
    if not spec.kind.is_pi:
        raise SpecError("only PI kinds are affine")
    n, p, L = spec.n, spec.pi, spec.laplacian
    I, Z = np.eye(n), np.zeros((n, n))
    anchor = spec.x_anchor if spec.x_anchor is not None else np.zeros(n)
    if spec.kind is ProtocolKind.PI_SINGLE:
        A = np.block([[Z, I], [-p.a * L, -p.b * L - p.delta * I]])
        c = np.concatenate([np.zeros(n), spec.d + p.delta * anchor])
    else:
        A = np.block([[Z, I, Z], [Z, Z, I], [-p.a * L, -p.b * L - p.delta * I, -p.gamma * I]])
        c = np.concatenate([np.zeros(2 * n), spec.d + p.delta * anchor])
    return A, c
