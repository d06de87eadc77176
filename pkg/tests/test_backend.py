from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from generators import random_damping, random_gain, random_graph, random_interaction

from netconsensus import _backend
from netconsensus.functions import Constant, ExpSgn
from netconsensus.graph import Graph
from netconsensus.protocols import AgentState, PIGains, ProtocolKind, ProtocolSpec, rhs

compiled = pytest.mark.skipif(_backend._compiled is None, reason="compiled kernel not built")


def _spec(kind, rng):
    g = random_graph(rng, 2, 6)
    if kind.is_pi:
        pi = PIGains(float(rng.uniform(0.2, 1)), float(rng.uniform(0.5, 2)), float(rng.choice([0.0, 0.3])),
                     float(rng.uniform(1, 3)))
        spec = ProtocolSpec(kind, g.reweighted(rng.uniform(0.5, 2, g.m)), pi=pi, d=rng.uniform(-0.5, 0.5, g.n))
        return spec.with_anchor(rng.normal(size=g.n))
    gains = [(random_damping if kind is ProtocolKind.DAMPED else random_gain)(rng) for _ in range(g.n)]
    ia = [random_interaction(rng) for _ in range(g.m)]
    ib = [random_interaction(rng) for _ in range(g.m)] if kind is ProtocolKind.SECOND_ORDER else ()
    return ProtocolSpec(kind, g, gains, ia, ib)


@compiled
@pytest.mark.parametrize("kind", list(ProtocolKind))
@pytest.mark.parametrize("seed", range(4))
def test_backends_agree(kind, seed):
    rng = np.random.default_rng(seed)
    spec = _spec(kind, rng)
    y0 = rng.uniform(-1, 1, spec.state_dim)
    a = _backend.integrate_protocol(spec, y0, 1e-2, 300, 7, 1e12, backend="compiled")
    b = _backend.integrate_protocol(spec, y0, 1e-2, 300, 7, 1e12, backend="python")
    np.testing.assert_array_equal(a[1], b[1])
    assert a[2:] == b[2:]
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12, atol=1e-12)


@compiled
def test_compiled_single_step_is_rk4():
    rng = np.random.default_rng(3)
    spec = _spec(ProtocolKind.SECOND_ORDER, rng)
    y = rng.normal(size=spec.state_dim)
    h = 1e-2
    f = lambda s: np.concatenate(rhs(spec, spec.unpack(s)))
    k1 = f(y)
    k2 = f(y + h / 2 * k1)
    k3 = f(y + h / 2 * k2)
    k4 = f(y + h * k3)
    want = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    samples, *_ = _backend.integrate_protocol(spec, y, h, 1, 1, 1e12, backend="compiled")
    np.testing.assert_allclose(samples[-1], want, rtol=1e-13, atol=1e-14)


@pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=compiled)])
def test_divergence_reported(backend):
    spec = ProtocolSpec(ProtocolKind.PI_DOUBLE, Graph.path(3), pi=PIGains(50.0, 1.0, 0.0, 1.0))
    y0 = np.concatenate([np.zeros(3), [1.0, 0.0, -1.0], np.zeros(3)])
    samples, steps, status, fail = _backend.integrate_protocol(spec, y0, 1e-2, 100000, 100, 1e3, backend=backend)
    assert status == _backend.STATUS_DIVERGED
    assert np.abs(samples[-1]).max() > 1e3
    assert steps[-1] == fail


@pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=compiled)])
def test_nonfinite_reported(backend):
    spec = ProtocolSpec(ProtocolKind.FIRST_ORDER, Graph(2, [(1, 2)]), [Constant(1.0)] * 2, [ExpSgn(1.0)])
    y0 = np.array([800.0, -800.0])  # exp overflows to inf
    samples, steps, status, fail = _backend.integrate_protocol(spec, y0, 1e-3, 10, 1, 1e300, backend=backend)
    assert status == _backend.STATUS_NONFINITE
    assert fail == 0 and np.all(np.isfinite(samples))


def test_unknown_backend():
    spec = ProtocolSpec(ProtocolKind.PI_SINGLE, Graph(2, [(1, 2)]), pi=PIGains(1.0, 1.0))
    with pytest.raises(ValueError):
        _backend.integrate_protocol(spec, np.zeros(4), 0.1, 1, 1, 1e9, backend="gpu")


def test_force_python_env():
    code = "from netconsensus import _backend; print(_backend.BACKEND)"
    env = dict(os.environ, NETCONSENSUS_FORCE_PYTHON="1")
    r = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    assert r.stdout.strip() == "python"


def test_pack_spec_shapes():
    rng = np.random.default_rng(0)
    spec = _spec(ProtocolKind.SECOND_ORDER, rng)
    p = _backend.pack_spec(spec)
    assert p["a_par"].shape == (spec.graph.m, 4)
    assert p["g_code"].shape == (spec.n,)
    assert p["tail"].dtype == np.intp
    st = AgentState(np.zeros(spec.n), np.zeros(spec.n))
    assert spec.pack(st).shape == (spec.state_dim,)
