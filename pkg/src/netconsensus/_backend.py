"""Selects the compiled RK4 kernel or the pure-Python fallback at import.

Set ``NETCONSENSUS_FORCE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from .protocols import ProtocolSpec, rhs_flat

STATUS_OK, STATUS_DIVERGED, STATUS_NONFINITE = 0, 1, 2

_compiled = None
if os.environ.get("NETCONSENSUS_FORCE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def pack_spec(spec: ProtocolSpec) -> dict:
    """Flatten a protocol into the arrays the compiled kernel consumes."""
    kx: list = []
    ky: list = []

    def table(fns):
        codes = np.array([f.kernel_code() for f in fns], dtype=np.intc)
        pars = np.array([f.kernel_params(kx, ky) for f in fns], dtype=float).reshape(-1, 4)
        return codes, np.ascontiguousarray(pars)

    tail, head = spec.graph.edge_index
    a_code, a_par = table(spec.interactions_a)
    b_code, b_par = table(spec.interactions_b)
    g_code, g_par = table(spec.gains)
    pi = spec.pi
    return dict(
        kind=spec.kind.code,
        n=spec.n,
        tail=np.ascontiguousarray(tail, dtype=np.intp),
        head=np.ascontiguousarray(head, dtype=np.intp),
        weights=np.asarray(spec.graph.weights, dtype=float),
        a_code=a_code, a_par=a_par, b_code=b_code, b_par=b_par, g_code=g_code, g_par=g_par,
        kx=np.asarray(kx, dtype=float), ky=np.asarray(ky, dtype=float),
        pa=pi.a if pi else 0.0, pb=pi.b if pi else 0.0,
        pgamma=pi.gamma if pi else 0.0, pdelta=pi.delta if pi else 0.0,
        d=np.ascontiguousarray(spec.d, dtype=float),
        anchor=np.ascontiguousarray(spec.x_anchor if spec.x_anchor is not None else np.zeros(spec.n)),
    )


def integrate_protocol_python(spec: ProtocolSpec, y0, h, n_steps, record_every, cap):
    """Reference RK4 loop on :func:`protocols.rhs_flat`; same contract as the kernel."""
    y = np.array(y0, dtype=float)
    samples = [y.copy()]
    steps = [0]
    status, fail_step = STATUS_OK, -1
    half = 0.5 * h
    for k in range(1, n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):  # reported through the status code
            k1 = rhs_flat(spec, y)
            k2 = rhs_flat(spec, y + half * k1)
            k3 = rhs_flat(spec, y + half * k2)
            k4 = rhs_flat(spec, y + h * k3)
            y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y_new)):
            status, fail_step = STATUS_NONFINITE, k - 1
            break
        y = y_new
        if np.max(np.abs(y)) > cap:
            status, fail_step = STATUS_DIVERGED, k
            samples.append(y.copy())
            steps.append(k)
            break
        if k % record_every == 0 or k == n_steps:
            samples.append(y.copy())
            steps.append(k)
    return np.array(samples), np.array(steps, dtype=np.int64), status, fail_step


def integrate_protocol_compiled(spec: ProtocolSpec, y0, h, n_steps, record_every, cap):
    if _compiled is None:
        raise RuntimeError("compiled kernel is not available")
    p = pack_spec(spec)
    return _compiled.integrate_protocol(
        p["kind"], p["n"], p["tail"], p["head"], p["weights"],
        p["a_code"], p["a_par"], p["b_code"], p["b_par"], p["g_code"], p["g_par"],
        p["kx"], p["ky"], p["pa"], p["pb"], p["pgamma"], p["pdelta"], p["d"], p["anchor"],
        np.ascontiguousarray(y0, dtype=float), float(h), int(n_steps), int(record_every), float(cap),
    )


def integrate_protocol(spec: ProtocolSpec, y0, h, n_steps, record_every, cap, backend: str | None = None):
    """Dispatch to the selected backend (``"compiled"``, ``"python"`` or default)."""
    which = backend or BACKEND
    if which == "compiled":
        return integrate_protocol_compiled(spec, y0, h, n_steps, record_every, cap)
    if which == "python":
        return integrate_protocol_python(spec, y0, h, n_steps, record_every, cap)
    raise ValueError(f"unknown backend {which!r}")
