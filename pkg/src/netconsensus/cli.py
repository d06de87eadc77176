"""Command-line interface.

Exit codes: 0 success (or all assertions pass), 1 assertion failure,
2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .graph import GraphError
from .numerics import (
    BracketError,
    ConvergenceError,
    IntegrationError,
    QuadratureError,
    SingularMatrixError,
)
from .power import NetworkError, hz_to_rad, ingest_network, write_power_trajectory_csv
from .protocols import SpecError
from .scenarios import (
    ScenarioError,
    assumption_report,
    builtin_config,
    builtin_scenarios,
    check_scenario,
    get_scenario,
    predict,
    run_scenario,
    save_config,
    stability,
)
from .simulate import write_trajectory_csv
from .trajectory import Status

EXIT_OK, EXIT_ASSERT, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

INPUT_ERRORS = (ScenarioError, SpecError, NetworkError, GraphError, FileNotFoundError)
NUMERIC_ERRORS = (QuadratureError, BracketError, SingularMatrixError, ConvergenceError, IntegrationError)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=_default))


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


def _load(args):
    sc = get_scenario(args.target)
    network = getattr(args, "network", None)
    if network:
        sc = sc.with_network(network)
    return sc.resolve(getattr(args, "variant", None))


def cmd_simulate(args) -> int:
    sc = _load(args)
    res = run_scenario(sc, h=args.h, t_end=args.t_end, backend=args.backend)
    out = Path(args.out)
    fname = sc.name.replace("[", "_").replace("]", "").replace(",", "_").replace("=", "")
    if sc.system == "power":
        path = write_power_trajectory_csv(res.trajectory, sc.network.n, out / f"{fname}.csv")
    else:
        path = write_trajectory_csv(res.trajectory, out / f"{fname}.csv")
    tr = res.trajectory
    print(f"{sc.name}: status {tr.status.value}"
          + (f" at t={tr.status_time:g}" if tr.status_time is not None else "")
          + f", {len(tr)} samples -> {path}")
    if tr.status is Status.FAILED:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_predict(args) -> int:
    sc = _load(args)
    _emit({"scenario": sc.name, **predict(sc)})
    return EXIT_OK


def cmd_stability(args) -> int:
    sc = _load(args)
    rep = stability(sc)
    _emit({"scenario": sc.name, **rep.to_dict()})
    return EXIT_OK


def cmd_power(args) -> int:
    from .equilibrium import power_steady_state

    if args.power_cmd != "steady-state":
        return EXIT_INPUT
    if not (args.a > 0 and args.b > 0):
        raise ScenarioError("--a and --b must be positive")
    net = ingest_network(args.network)
    z0, w0 = power_steady_state(net, args.b, hz_to_rad(args.omega_ref))
    _emit({"network": str(args.network), "a": args.a, "b": args.b, "omega_ref_hz": args.omega_ref,
           "z0": z0, "omega0_hz": [args.omega_ref] * net.n})
    return EXIT_OK


def _check_one(sc):
    outs = check_scenario(sc)
    return sc.name, outs


def cmd_check(args) -> int:
    if args.all:
        if args.target:
            raise ScenarioError("give a scenario or --all, not both")
        jobs = [sc.resolve(v) for sc in builtin_scenarios() for v in (sc.variant_names or [None])]
    else:
        if not args.target:
            raise ScenarioError("check needs a scenario (or --all)")
        base = get_scenario(args.target)
        if args.network:
            base = base.with_network(args.network)
        variants = [args.variant] if args.variant else (base.variant_names or [None])
        jobs = [base.resolve(v) for v in variants]
    if args.jobs > 1:
        with ThreadPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_check_one, jobs))
    else:
        results = [_check_one(sc) for sc in jobs]
    ok = True
    for name, outs in sorted(results, key=lambda r: r[0]):
        print(f"[{name}]")
        for o in outs:
            print("  " + o.line())
            ok &= o.passed
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_ASSERT


def cmd_validate(args) -> int:
    p = Path(args.target)
    if p.exists():
        try:
            cfg = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{p}: {exc}") from exc
    else:
        cfg = builtin_config(args.target)
    rep = assumption_report(cfg)
    _emit(rep)
    return EXIT_OK if rep["ok"] else EXIT_ASSERT


def cmd_export(args) -> int:
    names = args.names or [sc.name for sc in builtin_scenarios()]
    for name in names:
        path = save_config(get_scenario(name), Path(args.out) / f"{name}.json")
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netconsensus", description="Networked consensus toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def target(p, variant=True, network=True):
        p.add_argument("target", help="built-in scenario name or path to a JSON config")
        if variant:
            p.add_argument("--variant", help="variant name, e.g. a=1")
        if network:
            p.add_argument("--network", help="network CSV replacing the network of a power scenario")

    p = sub.add_parser("simulate", help="run a scenario and write a trajectory CSV")
    target(p)
    p.add_argument("--out", default="out")
    p.add_argument("--h", type=float)
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--backend", choices=("compiled", "python"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="print the predicted limit value")
    target(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("stability", help="print the stability report as JSON")
    target(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("power", help="power-network utilities")
    psub = p.add_subparsers(dest="power_cmd", required=True)
    q = psub.add_parser("steady-state", help="decentralized controller equilibrium z0")
    q.add_argument("network")
    q.add_argument("--a", type=float, required=True)
    q.add_argument("--b", type=float, required=True)
    q.add_argument("--omega-ref", type=float, default=50.0, dest="omega_ref", help="Hz")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("check", help="run expected-outcome assertions")
    p.add_argument("target", nargs="?")
    p.add_argument("--variant")
    p.add_argument("--network")
    p.add_argument("--all", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("validate", help="report assumption checks for a config")
    p.add_argument("target")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export", help="write built-in scenario configs as JSON")
    p.add_argument("names", nargs="*")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_export)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
