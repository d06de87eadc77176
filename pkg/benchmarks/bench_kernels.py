"""Compiled RK4 kernel versus the pure-Python fallback.

Runs the same fixed-step integration through both backends for every
protocol kind, checks that the sampled states agree, and reports wall time
and speedup.

    python3 benchmarks/bench_kernels.py [--n 20] [--steps 20000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from netconsensus import _backend
from netconsensus.functions import BumpReciprocal, Constant, ExpSgn, Linear, ReciprocalAbsShift
from netconsensus.graph import Graph
from netconsensus.protocols import AgentState, PIGains, ProtocolKind, ProtocolSpec


def make_specs(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    g = Graph.random_connected(n, rng)
    gains = [ReciprocalAbsShift(0.5) if i % 2 else BumpReciprocal(1.0, 1.0, 0.0, 0.5) for i in range(n)]
    ia = [ExpSgn(0.5) if k % 2 else Linear(1.0) for k in range(g.m)]
    ib = [Linear(0.8)] * g.m
    kap = [Constant(1.0 + 0.1 * i) for i in range(n)]
    x0 = rng.uniform(-1, 1, n)
    v0 = rng.uniform(-0.5, 0.5, n)
    return x0, v0, [
        ProtocolSpec(ProtocolKind.FIRST_ORDER, g, gains, ia),
        ProtocolSpec(ProtocolKind.SECOND_ORDER, g, gains, ia, ib),
        ProtocolSpec(ProtocolKind.DAMPED, g, kap, ia),
        ProtocolSpec(ProtocolKind.PI_SINGLE, g, pi=PIGains(1.0, 2.0, 0.1), d=rng.uniform(-1, 1, n), x_anchor=x0),
        ProtocolSpec(ProtocolKind.PI_DOUBLE, g, pi=PIGains(1.0, 2.0, 0.1, 3.0), x_anchor=x0),
    ]


def timed(fn, repeat: int):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--h", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _backend.BACKEND != "compiled":
        print("compiled kernel not available; build the extension first (pip install -e .)")
        return 1

    x0, v0, specs = make_specs(args.n)
    print(f"n={args.n} steps={args.steps} h={args.h}")
    print(f"{'kind':<22}{'compiled s':>12}{'python s':>12}{'speedup':>10}{'max diff':>12}")
    for spec in specs:
        y0 = spec.pack(AgentState(x=x0, v=v0 if spec.kind.second_order else None, z=np.zeros(args.n)))
        run = (lambda b: lambda: _backend.integrate_protocol(spec, y0, args.h, args.steps, 1000, 1e9, backend=b))
        tc, (sc, *_) = timed(run("compiled"), args.repeat)
        tp, (sp, *_) = timed(run("python"), 1)
        diff = float(np.max(np.abs(sc - sp)))
        print(f"{spec.kind.value:<22}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
