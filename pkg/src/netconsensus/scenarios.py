"""Built-in scenarios, JSON scenario configs and expected-outcome checks.

A config is a JSON object with a ``version`` field. Protocol scenarios hold
``graph``, ``protocol``, ``initial`` and ``run`` sections; power scenarios
hold ``network``, ``controller``, ``steps`` and ``run``. ``expect`` lists
machine-checkable outcomes and ``variants`` maps a variant name to a set of
dotted-path overrides plus its own ``expect`` list.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import functions as fnmod
from .equilibrium import (
    EquilibriumPrediction,
    power_steady_state,
    predict_damped_position,
    predict_first_order,
    predict_pi_average,
    predict_second_order_velocity,
)
from .graph import Graph, read_graph_csv
from .power import (
    ControlMode,
    FreqController,
    LoadStep,
    PowerNetwork,
    PowerRunConfig,
    equilibrium,
    ingest_network,
    sample_network_path,
    state_layout,
    step_load_experiment,
)
from .protocols import PIGains, ProtocolKind, ProtocolSpec
from .simulate import RunConfig, run
from .stability import (
    StabilityReport,
    classify_pi_double,
    classify_pi_single,
    classify_power_centralized,
    classify_power_decentralized,
)
from .trajectory import Status, Trajectory

CONFIG_VERSION = 1


class ScenarioError(ValueError):
    """Malformed scenario configuration or unknown scenario/variant."""


# -- config helpers -------------------------------------------------------------


def _set_path(cfg: dict, path: str, value) -> None:
    keys = path.split(".")
    node = cfg
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ScenarioError(f"override path {path!r} does not exist")
        node = node[k]
    node[keys[-1]] = value


def apply_variant(cfg: dict, variant: str) -> dict:
    """Return a copy of ``cfg`` with the variant's overrides and expectations applied."""
    variants = cfg.get("variants") or {}
    if variant not in variants:
        raise ScenarioError(f"{cfg.get('name')!r} has no variant {variant!r}; "
                            f"choose from {sorted(variants)}")
    out = copy.deepcopy({k: v for k, v in cfg.items() if k not in ("variants", "default_variant")})
    spec = variants[variant]
    for path, value in (spec.get("set") or {}).items():
        _set_path(out, path, copy.deepcopy(value))
    if "expect" in spec:
        out["expect"] = copy.deepcopy(spec["expect"])
    out["name"] = f"{cfg['name']}[{variant}]"
    return out


def _fn_list(raw, count: int, what: str) -> list:
    if raw is None:
        return []
    if isinstance(raw, dict):
        f = fnmod.from_dict(raw)
        return [f] * count
    if len(raw) != count:
        raise ScenarioError(f"{what}: expected {count} functions, got {len(raw)}")
    cache: dict = {}
    out = []
    for d in raw:  # share objects between equal records so the kernel groups them
        key = json.dumps(d, sort_keys=True)
        if key not in cache:
            cache[key] = fnmod.from_dict(d)
        out.append(cache[key])
    return out


def _fn_config(fns) -> dict | list | None:
    if not fns:
        return None
    recs = [f.to_dict() for f in fns]
    if all(r == recs[0] for r in recs):
        return recs[0]
    return recs


def _floats(v):
    return None if v is None else [float(x) for x in v]


# -- scenario -------------------------------------------------------------------


@dataclass
class Scenario:
    name: str
    system: str  # "protocol" or "power"
    description: str = ""
    expect: list = field(default_factory=list)
    variants: dict = field(default_factory=dict)
    default_variant: str | None = None
    # protocol scenarios
    spec: ProtocolSpec | None = None
    x0: np.ndarray | None = None
    v0: np.ndarray | None = None
    run_config: RunConfig | None = None
    # power scenarios
    network: PowerNetwork | None = None
    network_source: dict | None = None
    controller: FreqController | None = None
    steps: list = field(default_factory=list)
    power_config: PowerRunConfig | None = None
    notes: str = ""

    @property
    def variant_names(self) -> list[str]:
        return list(self.variants)

    def resolve(self, variant: str | None = None) -> Scenario:
        """The scenario with ``variant`` (or the default variant) applied."""
        variant = variant or self.default_variant
        if variant is None:
            return self
        return from_config(apply_variant(to_config(self), variant))

    def with_network(self, path) -> Scenario:
        """The same power scenario on the network file at ``path``."""
        if self.system != "power":
            raise ScenarioError("only power scenarios take a network")
        cfg = to_config(self)
        cfg["network"] = {"path": str(Path(path).resolve())}
        return from_config(cfg)


def from_config(cfg: dict, base_dir: Path | None = None) -> Scenario:
    """Build a scenario from a parsed JSON config; raises ScenarioError on bad input."""
    try:
        return _from_config(cfg, base_dir)
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        name = cfg.get("name", "?") if isinstance(cfg, dict) else "?"
        raise ScenarioError(f"scenario {name!r}: {type(exc).__name__}: {exc}") from exc


def _from_config(cfg: dict, base_dir: Path | None) -> Scenario:
    if not isinstance(cfg, dict):
        raise ScenarioError("config must be a JSON object")
    if cfg.get("version") != CONFIG_VERSION:
        raise ScenarioError(f"unsupported config version {cfg.get('version')!r}")
    system = cfg.get("system", "protocol")
    sc = Scenario(
        name=cfg["name"],
        system=system,
        description=cfg.get("description", ""),
        expect=list(cfg.get("expect", [])),
        variants=copy.deepcopy(cfg.get("variants", {})),
        default_variant=cfg.get("default_variant"),
        notes=cfg.get("notes", ""),
    )
    if sc.default_variant is not None and sc.default_variant not in sc.variants:
        raise ScenarioError(f"default_variant {sc.default_variant!r} is not a variant")
    if system == "protocol":
        _parse_protocol(sc, cfg, base_dir)
    elif system == "power":
        _parse_power(sc, cfg, base_dir)
    else:
        raise ScenarioError(f"unknown system {system!r}")
    return sc


def _resolve_path(p, base_dir):
    p = Path(p)
    if not p.is_absolute() and base_dir is not None:
        p = base_dir / p
    return p


def _parse_protocol(sc: Scenario, cfg: dict, base_dir) -> None:
    g = cfg["graph"]
    graph = read_graph_csv(_resolve_path(g["csv"], base_dir), g.get("n")) if "csv" in g else Graph.from_dict(g)
    p = cfg["protocol"]
    kind = ProtocolKind(p["kind"])
    n, m = graph.n, graph.m
    pi = None
    if "pi" in p:
        pi = PIGains(**{k: float(v) for k, v in p["pi"].items()})
    sc.spec = ProtocolSpec(
        kind=kind,
        graph=graph,
        gains=_fn_list(p.get("gains"), n, "gains"),
        interactions_a=_fn_list(p.get("interactions_a"), m, "interactions_a"),
        interactions_b=_fn_list(p.get("interactions_b"), m, "interactions_b"),
        pi=pi,
        d=p.get("d"),
        validation_range=tuple(p.get("validation_range", (-10.0, 10.0))),
    )
    init = cfg["initial"]
    sc.x0 = np.array(init["x0"], dtype=float)
    sc.v0 = None if init.get("v0") is None else np.array(init["v0"], dtype=float)
    for name, arr in (("x0", sc.x0), ("v0", sc.v0)):
        if arr is not None and arr.shape != (n,):
            raise ScenarioError(f"initial.{name} must have {n} entries, got {arr.size}")
    r = dict(cfg["run"])
    if "h_schedule" in r:
        r["h_schedule"] = tuple(tuple(x) for x in r["h_schedule"])
    sc.run_config = RunConfig(**r)


def _parse_network(src: dict, base_dir) -> PowerNetwork:
    if "builtin" in src:
        if src["builtin"] != "power6":
            raise ScenarioError(f"unknown builtin network {src['builtin']!r}")
        return ingest_network(sample_network_path())
    if "path" in src:
        return ingest_network(_resolve_path(src["path"], base_dir))
    buses = src["buses"]
    return PowerNetwork(
        m=[b["m"] for b in buses], d=[b["d"] for b in buses],
        p_m=[b["p_m"] for b in buses], v_mag=[b["v_mag"] for b in buses],
        lines=tuple((ln["i"], ln["j"], ln["susceptance"]) for ln in src["lines"]),
    )


def _parse_power(sc: Scenario, cfg: dict, base_dir) -> None:
    sc.network_source = copy.deepcopy(cfg["network"])
    sc.network = _parse_network(cfg["network"], base_dir)
    c = cfg["controller"]
    sc.controller = FreqController(ControlMode(c["mode"]), float(c["a"]), float(c["b"]),
                                   float(c.get("omega_ref_hz", 50.0)))
    sc.steps = [LoadStep(int(s["bus"]), float(s["delta_p"]), float(s["t_step"])) for s in cfg.get("steps", [])]
    for s in sc.steps:
        if not 1 <= s.bus <= sc.network.n:
            raise ScenarioError(f"load step at unknown bus {s.bus}")
    sc.power_config = PowerRunConfig(**cfg.get("run", {}))


def to_config(sc: Scenario) -> dict:
    """Serialize a scenario back to its JSON form."""
    out: dict = {"version": CONFIG_VERSION, "name": sc.name, "system": sc.system}
    if sc.description:
        out["description"] = sc.description
    if sc.notes:
        out["notes"] = sc.notes
    if sc.system == "protocol":
        spec = sc.spec
        p: dict = {"kind": spec.kind.value}
        for key, fns in (("gains", spec.gains), ("interactions_a", spec.interactions_a),
                         ("interactions_b", spec.interactions_b)):
            rec = _fn_config(fns)
            if rec is not None:
                p[key] = rec
        if spec.pi is not None:
            p["pi"] = {"a": spec.pi.a, "b": spec.pi.b, "delta": spec.pi.delta, "gamma": spec.pi.gamma}
        if np.any(spec.d != 0):
            p["d"] = _floats(spec.d)
        p["validation_range"] = list(spec.validation_range)
        out["graph"] = spec.graph.to_dict()
        out["protocol"] = p
        out["initial"] = {"x0": _floats(sc.x0)}
        if sc.v0 is not None:
            out["initial"]["v0"] = _floats(sc.v0)
        rc = sc.run_config
        r = {"t_end": rc.t_end, "h": rc.h, "record_every": rc.record_every, "conv_tol": rc.conv_tol,
             "conv_metric": rc.conv_metric, "divergence_cap": rc.divergence_cap}
        if rc.h_schedule:
            r["h_schedule"] = [list(s) for s in rc.h_schedule]
        out["run"] = r
    else:
        net = sc.network
        src = sc.network_source
        if not src or not ({"builtin", "path"} & set(src)):
            src = {
                "buses": [{"bus": i + 1, "m": float(net.m[i]), "d": float(net.d[i]),
                           "p_m": float(net.p_m[i]), "v_mag": float(net.v_mag[i])} for i in range(net.n)],
                "lines": [{"i": i, "j": j, "susceptance": s} for i, j, s in net.lines],
            }
        out["network"] = copy.deepcopy(src)
        c = sc.controller
        out["controller"] = {"mode": c.mode.value, "a": c.a, "b": c.b, "omega_ref_hz": c.omega_ref_hz}
        out["steps"] = [{"bus": s.bus, "delta_p": s.delta_p, "t_step": s.t_step} for s in sc.steps]
        pc = sc.power_config
        out["run"] = {"t_end": pc.t_end, "h": pc.h, "record_every": pc.record_every,
                      "n_samples": pc.n_samples, "settle_factor": pc.settle_factor}
    out["expect"] = copy.deepcopy(sc.expect)
    if sc.variants:
        out["variants"] = copy.deepcopy(sc.variants)
    if sc.default_variant is not None:
        out["default_variant"] = sc.default_variant
    return out


def load_config(path) -> Scenario:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return from_config(cfg, path.parent)


def save_config(sc: Scenario, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_config(sc), indent=2) + "\n")
    return path


# -- built-ins ------------------------------------------------------------------

BUILDING_CAPACITY = 5e4  # J/degC
BUILDING_BUMP = {"base": 5e4, "amp": 5e5, "center": 23.0, "width": 0.4}


def _building_config() -> dict:
    # vertices 1..6 are rooms, 7 is the corridor
    c = 7
    edges = [[1, 2], [2, 3], [1, c], [2, c], [3, c], [4, c], [5, c], [6, c], [4, 5], [5, 6]]
    plain = {"family": "Constant", "params": {"c": 1.0 / BUILDING_CAPACITY}}
    bump = {"family": "BumpReciprocal", "params": dict(BUILDING_BUMP)}
    gains = [plain, bump, plain, plain, bump, plain, plain]
    return {
        "version": CONFIG_VERSION,
        "name": "building",
        "system": "protocol",
        "description": "Room temperatures exchanging heat through walls; rooms 2 and 5 "
                       "have a heat capacity that peaks near 23 degC.",
        "notes": "Gains are reciprocal heat capacities in degC/J. The capacity peak "
                 "(base 50 kJ/degC plus a 500 kJ/degC Gaussian of width 0.4 degC at "
                 "23 degC) is a modelling choice; only its qualitative shape is known.",
        "graph": {"n": 7, "edges": edges},
        "protocol": {
            "kind": "FirstOrderNonlinear",
            "gains": gains,
            "interactions_a": {"family": "Linear", "params": {"k": 0.5}},
            "validation_range": [0.0, 40.0],
        },
        "initial": {"x0": [24.0, 20.0, 20.0, 20.0, 20.0, 29.0, 22.0]},
        "run": {"t_end": 3.0e6, "h": 100.0, "record_every": 10, "conv_tol": 1e-6, "conv_metric": "x"},
        "expect": [
            {"check": "max_over_run", "block": "x", "agents": [2, 5], "max": 23.0},
            {"check": "status", "equals": "converged"},
            {"check": "terminal_prediction", "block": "x", "tol": 1e-3},
            {"check": "terminal_max", "block": "x", "max": 23.0},
            {"check": "drift", "channel": "E", "rel_tol": 1e-6},
            {"check": "lyapunov_nonincreasing", "rel_tol": 1e-8},
        ],
    }


def _satellites_config() -> dict:
    return {
        "version": CONFIG_VERSION,
        "name": "satellites",
        "system": "protocol",
        "description": "Satellites with velocity-dependent gain 1/(|v| + 0.1) and "
                       "exponential position/velocity couplings.",
        "notes": "Coupling grows like exp(|y|), so the first second uses finer steps.",
        "graph": {"n": 5, "edges": [[1, 2], [3, 2], [3, 4], [3, 5]]},
        "protocol": {
            "kind": "SecondOrderNonlinear",
            "gains": {"family": "ReciprocalAbsShift", "params": {"c": 0.1}},
            "interactions_a": {"family": "ExpSgn", "params": {"k": 20.0}},
            "interactions_b": {"family": "ExpSgn", "params": {"k": 10.0}},
            "validation_range": [-10.0, 10.0],
        },
        "initial": {"x0": [-4.0, 0.0, 3.0, -1.0, -5.0], "v0": [-3.0, -7.0, 3.0, -1.0, 0.0]},
        "run": {
            "t_end": 30.0, "h": 1e-4, "record_every": 100, "conv_tol": 1e-6, "conv_metric": "xv",
            "h_schedule": [[1e-3, 2e-9], [0.011, 1e-7], [0.111, 1e-6], [1.111, 5e-6], [6.111, 1e-5]],
        },
        "expect": [
            {"check": "status", "equals": "converged"},
            {"check": "terminal_prediction", "block": "v", "tol": 1e-3},
            {"check": "drift", "channel": "p", "rel_tol": 1e-6},
            {"check": "lyapunov_nonincreasing", "rel_tol": 1e-8},
        ],
    }


def _robots_config() -> dict:
    return {
        "version": CONFIG_VERSION,
        "name": "robots",
        "system": "protocol",
        "description": "Mobile robots on a string graph under a distributed PI controller; "
                       "robot 1 is pushed by a constant disturbance.",
        "graph": {"n": 5, "edges": [[1, 2], [2, 3], [3, 4], [4, 5]]},
        "protocol": {
            "kind": "PiDouble",
            "pi": {"a": 1.0, "b": 5.0, "delta": 0.0, "gamma": 3.0},
            "d": [1.0, 0.0, 0.0, 0.0, 0.0],
        },
        "initial": {"x0": [5.0, -6.0, 8.0, 4.0, 5.0], "v0": [0.0, 0.0, 0.0, 0.0, 0.0]},
        "run": {"t_end": 400.0, "h": 1e-3, "record_every": 100, "conv_tol": 1e-6, "conv_metric": "x"},
        "expect": [],
        "default_variant": "a=1",
        "variants": {
            "a=0": {"set": {"protocol.pi.a": 0.0}, "expect": [
                {"check": "stability", "equals": "Marginal"},
                {"check": "final_diameter", "min": 0.01},
            ]},
            "a=1": {"set": {"protocol.pi.a": 1.0}, "expect": [
                {"check": "stability", "equals": "Hurwitz"},
                {"check": "status", "equals": "converged"},
            ]},
            "a=15": {"set": {"protocol.pi.a": 15.0}, "expect": [
                {"check": "stability", "equals": "Marginal"},
                {"check": "spectral_margin", "abs_max": 1e-6},
                {"check": "status", "not": "converged"},
            ]},
            "a=20": {"set": {"protocol.pi.a": 20.0}, "expect": [
                {"check": "stability", "equals": "Unstable"},
                {"check": "status", "equals": "diverged"},
            ]},
        },
    }


def _power6_config() -> dict:
    variants = {}
    for mode in ("decentralized", "centralized"):
        for b in (0.04, 0.8):
            exp = [
                {"check": "stability", "equals": "Hurwitz"},
                {"check": "frequency_restored", "tol_hz": 1e-3},
            ]
            exp.append({"check": "steady_state_z", "tol": 1e-4} if mode == "decentralized"
                       else {"check": "uniform_generation", "rel_tol": 1e-3})
            variants[f"{mode},b={b:g}"] = {"set": {"controller.mode": mode, "controller.b": b}, "expect": exp}
    return {
        "version": CONFIG_VERSION,
        "name": "power6",
        "system": "power",
        "description": "Six-bus swing-equation network; 200 kW load steps at buses 2, 3 and 6 "
                       "with centralized or decentralized PI frequency control.",
        "notes": "The large integral gain of the comparison run is taken to be b = 0.8.",
        "network": {"builtin": "power6"},
        "controller": {"mode": "decentralized", "a": 0.8, "b": 0.04, "omega_ref_hz": 50.0},
        "steps": [{"bus": b, "delta_p": 2e5, "t_step": 1e4} for b in (2, 3, 6)],
        "run": {"t_end": None, "h": None, "record_every": None, "n_samples": 2000, "settle_factor": 40.0},
        "expect": [],
        "default_variant": "decentralized,b=0.04",
        "variants": variants,
    }


_BUILTIN_CONFIGS = {
    "building": _building_config,
    "satellites": _satellites_config,
    "robots": _robots_config,
    "power6": _power6_config,
}


def builtin_config(name: str) -> dict:
    try:
        return _BUILTIN_CONFIGS[name]()
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; built-ins are {sorted(_BUILTIN_CONFIGS)}") from None


def builtin_scenarios() -> list[Scenario]:
    return [from_config(f()) for f in _BUILTIN_CONFIGS.values()]


def get_scenario(name_or_path: str) -> Scenario:
    """A built-in scenario by name, or a scenario config file by path."""
    if name_or_path in _BUILTIN_CONFIGS:
        return from_config(builtin_config(name_or_path))
    p = Path(name_or_path)
    if p.suffix == ".json" or p.exists():
        if not p.exists():
            raise ScenarioError(f"no such config file: {p}")
        return load_config(p)
    raise ScenarioError(f"unknown scenario {name_or_path!r}; built-ins are {sorted(_BUILTIN_CONFIGS)}")


# -- running and checking -------------------------------------------------------


@dataclass
class ScenarioResult:
    scenario: Scenario
    trajectory: Trajectory
    prediction: dict
    stability: StabilityReport | None


def predict(sc: Scenario) -> dict:
    """Predicted limit values without simulating."""
    if sc.system == "power":
        c = sc.controller
        net = sc.network.with_p(_final_loads(sc))
        if c.mode is ControlMode.DECENTRALIZED:
            z0, w0 = power_steady_state(net, c.b, c.omega_ref)
            return {"quantity": "z0", "z0": z0.tolist(), "omega0_hz": (w0 / (2 * np.pi)).tolist()}
        y = equilibrium(net, c)
        what = float(y[state_layout(net, c)["omega_hat"]][0])
        return {"quantity": "omega_hat", "omega_hat_offset_rad_s": what,
                "u_per_bus": float(c.a * what), "omega0_hz": [c.omega_ref_hz] * net.n}
    spec = sc.spec
    kind = spec.kind
    if kind is ProtocolKind.FIRST_ORDER:
        return _pred("x_star", predict_first_order(spec.gains, sc.x0))
    if kind is ProtocolKind.SECOND_ORDER:
        v0 = np.zeros(spec.n) if sc.v0 is None else sc.v0
        return _pred("v_star", predict_second_order_velocity(spec.gains, v0))
    if kind is ProtocolKind.DAMPED:
        v0 = np.zeros(spec.n) if sc.v0 is None else sc.v0
        return _pred("x_star", predict_damped_position(spec.gains, sc.x0, v0))
    out = {"quantity": "x_star", "x_star": predict_pi_average(sc.x0), "residual": 0.0, "method": "closed-form"}
    if np.any(spec.d != 0) or spec.pi.delta == 0:
        out["note"] = "average of x0; exact only without disturbance and with delta > 0"
    return out


def _pred(name: str, pr: EquilibriumPrediction) -> dict:
    return {"quantity": name, name: pr.value, "residual": pr.residual, "method": pr.method}


def _final_loads(sc: Scenario) -> np.ndarray:
    p = sc.network.p_m.copy()
    for s in sc.steps:
        p[s.bus - 1] -= s.delta_p
    return p


def stability(sc: Scenario) -> StabilityReport:
    if sc.system == "power":
        c = sc.controller
        fn = classify_power_centralized if c.mode is ControlMode.CENTRALIZED else classify_power_decentralized
        return fn(sc.network, c.a, c.b)
    spec = sc.spec
    if spec.kind is ProtocolKind.PI_SINGLE:
        return classify_pi_single(spec.graph, spec.pi.a, spec.pi.b, spec.pi.delta)
    if spec.kind is ProtocolKind.PI_DOUBLE:
        return classify_pi_double(spec.graph, spec.pi.a, spec.pi.b, spec.pi.gamma, spec.pi.delta)
    raise ScenarioError(f"stability reports cover PI and power scenarios, not {spec.kind.value}")


def run_scenario(sc: Scenario, h: float | None = None, t_end: float | None = None,
                 backend: str | None = None) -> ScenarioResult:
    if sc.system == "power":
        pc = sc.power_config
        cfg = PowerRunConfig(t_end=t_end if t_end is not None else pc.t_end, h=h if h is not None else pc.h,
                             record_every=pc.record_every, n_samples=pc.n_samples,
                             settle_factor=pc.settle_factor)
        tr = step_load_experiment(sc.network, sc.controller, sc.steps, cfg)
        tr.status = Status.TIMED_OUT
        return ScenarioResult(sc, tr, predict(sc), stability(sc))
    rc = sc.run_config
    if h is not None or t_end is not None or backend is not None:
        from dataclasses import replace

        changes: dict = {}
        if h is not None:
            changes.update(h=h, h_schedule=tuple(s for s in rc.h_schedule if s[1] < h))
        if t_end is not None:
            changes.update(t_end=t_end, h_schedule=tuple(s for s in changes.get("h_schedule", rc.h_schedule)
                                                         if s[0] < t_end))
        if backend is not None:
            changes["backend"] = backend
        rc = replace(rc, **changes)
    tr = run(sc.spec, sc.x0, sc.v0 if sc.spec.kind.second_order else None, rc)
    stab = stability(sc) if sc.spec.kind.is_pi else None
    return ScenarioResult(sc, tr, predict(sc), stab)


@dataclass
class CheckOutcome:
    check: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.check}: {self.detail}"


def check_scenario(sc: Scenario, result: ScenarioResult | None = None) -> list[CheckOutcome]:
    """Run the scenario (unless a result is given) and evaluate its ``expect`` list."""
    res = result or run_scenario(sc)
    return [_evaluate(e, res) for e in sc.expect]


def _evaluate(e: dict, res: ScenarioResult) -> CheckOutcome:
    kind = e.get("check")
    fn = _CHECKS.get(kind)
    if fn is None:
        raise ScenarioError(f"unknown check {kind!r}")
    ok, detail = fn(e, res)
    return CheckOutcome(kind, bool(ok), detail)


def _agents_cols(e, arr):
    agents = e.get("agents")
    return arr if agents is None else arr[:, [a - 1 for a in agents]]


def _c_status(e, res):
    st = res.trajectory.status.value
    if "equals" in e:
        return st == e["equals"], f"status {st} (want {e['equals']})"
    return st != e["not"], f"status {st} (want not {e['not']})"


def _c_stability(e, res):
    rep = res.stability
    if rep is None:
        return False, "no stability report"
    got = rep.kind.value
    agree = rep.routes_agree
    return got == e["equals"] and agree, f"{got} (want {e['equals']}), margin {rep.margin:.3g}, routes agree {agree}"


def _c_spectral_margin(e, res):
    m = float(np.max(res.stability.spectrum.real))
    return abs(m) < e["abs_max"], f"max Re = {m:.3g} (want |.| < {e['abs_max']:g})"


def _c_max_over_run(e, res):
    vals = _agents_cols(e, res.trajectory.block(e.get("block", "x")))
    mx = float(np.max(vals))
    return mx <= e["max"], f"max {mx:.6g} (limit {e['max']:g})"


def _c_terminal_max(e, res):
    vals = _agents_cols(e, res.trajectory.block(e.get("block", "x"))[-1:])
    mx = float(np.max(vals))
    return mx < e["max"], f"terminal max {mx:.6g} (limit {e['max']:g})"


def _c_terminal_prediction(e, res):
    block = e.get("block", "x")
    name = "v_star" if block == "v" else "x_star"
    target = res.prediction[name]
    term = res.trajectory.block(block)[-1]
    err = float(np.max(np.abs(term - target)))
    return err <= e["tol"], f"terminal {block} vs {name}={target:.9g}: error {err:.3g} (tol {e['tol']:g})"


def _c_final_diameter(e, res):
    d = float(res.trajectory.channels["diam"][-1])
    ok = True
    if "min" in e:
        ok &= d > e["min"]
    if "max" in e:
        ok &= d < e["max"]
    return ok, f"final diameter {d:.3g} (bounds {e.get('min', '-')}, {e.get('max', '-')})"


def _c_drift(e, res):
    ch = res.trajectory.channels[e["channel"]]
    drift = float(np.max(np.abs(ch - ch[0])))
    lim = e["rel_tol"] * (1.0 + abs(ch[0]))
    return drift <= lim, f"{e['channel']} drift {drift:.3g} (limit {lim:.3g})"


def _c_lyapunov(e, res):
    V = res.trajectory.channels["V"]
    inc = np.diff(V) - e["rel_tol"] * (1.0 + np.abs(V[:-1]))
    worst = float(np.max(inc)) if len(inc) else -np.inf
    return worst <= 0, f"largest excess increase {worst:.3g}"


def _c_frequency_restored(e, res):
    tr = res.trajectory
    dev = float(tr.channels["max_freq_dev_hz"][-1])
    return dev < e["tol_hz"], f"final max |f - f_ref| = {dev:.3g} Hz (tol {e['tol_hz']:g})"


def _c_steady_state_z(e, res):
    sc = res.scenario
    z0 = np.array(res.prediction["z0"])
    z = res.trajectory.block("z")[-1]
    err = float(np.max(np.abs(z - z0)))
    return err <= e["tol"], f"max |z - z0| = {err:.3g} (tol {e['tol']:g}, n={sc.network.n})"


def _c_uniform_generation(e, res):
    n = res.scenario.network.n
    u = np.array([res.trajectory.channels[f"u_{i + 1}"][-1] for i in range(n)])
    spread = float(np.max(u) - np.min(u))
    lim = e["rel_tol"] * max(1.0, float(np.max(np.abs(u))))
    return spread <= lim, f"final control spread {spread:.3g} W (limit {lim:.3g})"


_CHECKS = {
    "status": _c_status,
    "stability": _c_stability,
    "spectral_margin": _c_spectral_margin,
    "max_over_run": _c_max_over_run,
    "terminal_max": _c_terminal_max,
    "terminal_prediction": _c_terminal_prediction,
    "final_diameter": _c_final_diameter,
    "drift": _c_drift,
    "lyapunov_nonincreasing": _c_lyapunov,
    "frequency_restored": _c_frequency_restored,
    "steady_state_z": _c_steady_state_z,
    "uniform_generation": _c_uniform_generation,
}


# -- assumption reports -----------------------------------------------------------


def assumption_report(cfg: dict) -> dict:
    """Per-function assumption checks for a raw config, without building the spec."""
    if cfg.get("version") != CONFIG_VERSION:
        raise ScenarioError(f"unsupported config version {cfg.get('version')!r}")
    out: dict = {"name": cfg.get("name"), "ok": True, "items": []}

    def add(what, ok, **info):
        out["items"].append({"item": what, "ok": bool(ok), **info})
        out["ok"] = out["ok"] and bool(ok)

    try:
        if cfg.get("system", "protocol") == "power":
            net = _parse_network(cfg["network"], None)
            add("network", True, buses=net.n, lines=len(net.lines))
            c = cfg["controller"]
            add("controller gains", c["a"] > 0 and c["b"] > 0, a=c["a"], b=c["b"])
            return out
        g = cfg["graph"]
        graph = Graph.from_dict(g) if "csv" not in g else read_graph_csv(g["csv"], g.get("n"))
        p = cfg["protocol"]
        kind = ProtocolKind(p["kind"])
        from .graph import is_connected

        add("graph connected", is_connected(graph), n=graph.n, m=graph.m)
        if kind.is_pi:
            pi = p["pi"]
            ok = pi["a"] >= 0 and pi["b"] > 0 and pi.get("delta", 0.0) >= 0
            if kind is ProtocolKind.PI_DOUBLE:
                ok = ok and pi.get("gamma", 0.0) > 0
            add("pi gains", ok, **pi)
            return out
        rng = tuple(p.get("validation_range", (-10.0, 10.0)))
        for i, f in enumerate(_fn_list(p.get("gains"), graph.n, "gains")):
            r = fnmod.validate_gain(f, rng)
            add(f"gain {i + 1}", r.ok, lower=r.gamma_lower, upper=r.gamma_upper)
        for key in ("interactions_a", "interactions_b"):
            for k, f in enumerate(_fn_list(p.get(key), graph.m, key)):
                r = fnmod.validate_interaction(f, rng)
                add(f"{key} {k + 1}", r.ok, odd=r.odd_ok, sign=r.sign_ok, lipschitz=r.lipschitz_estimate)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed config: {exc}") from exc
    return out

