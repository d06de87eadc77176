"""Run a protocol from initial conditions and attach monitor channels."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import _backend
from .equilibrium import predict_damped_position, predict_first_order, predict_second_order_velocity
from .invariants import (
    conserved_E_damped,
    conserved_E_first,
    conserved_p_second,
    lyapunov_damped,
    lyapunov_first,
    lyapunov_second,
)
from .numerics import DIVERGENCE_CAP
from .protocols import AgentState, ProtocolKind, ProtocolSpec
from .trajectory import Status, Trajectory

CONV_WINDOW = 100  # consecutive sub-threshold samples needed to declare convergence
CHANNELS = ("E", "p", "V", "diam", "mean")


@dataclass(frozen=True)
class RunConfig:
    t_end: float
    h: float = 1e-3
    record_every: int = 100
    conv_tol: float = 1e-6
    conv_metric: str = "auto"  # "x", "xv", or "auto" (xv for second-order kinds)
    divergence_cap: float = DIVERGENCE_CAP
    backend: str | None = None
    # optional finer steps early on: ((t_until, h), ...) with increasing t_until
    h_schedule: tuple = ()

    def __post_init__(self):
        if not (self.t_end > 0 and self.h > 0 and self.record_every >= 1 and self.conv_tol > 0):
            raise ValueError("t_end, h, record_every and conv_tol must be positive")
        if self.conv_metric not in ("x", "xv", "auto"):
            raise ValueError(f"unknown conv_metric {self.conv_metric!r}")
        sched = tuple((float(t), float(h)) for t, h in self.h_schedule)
        prev = 0.0
        for t, h in sched:
            if not (t > prev and h > 0 and t < self.t_end):
                raise ValueError("h_schedule needs increasing t_until inside (0, t_end) and h > 0")
            prev = t
        object.__setattr__(self, "h_schedule", sched)

    @property
    def n_steps(self) -> int:
        return sum(n for _, _, n, _ in self.segments())

    def segments(self) -> list[tuple[float, float, int, int]]:
        """(t_start, h, n_steps, record_every) per constant-step segment.

        Samples are spaced about ``record_every * h`` apart in every segment.
        """
        out = []
        t0 = 0.0
        dt_rec = self.record_every * self.h
        for t_until, h in self.h_schedule + ((self.t_end, self.h),):
            n = max(1, int(round((t_until - t0) / h)))
            out.append((t0, h, n, max(1, int(round(dt_rec / h)))))
            t0 += n * h
        return out

    def halved(self) -> RunConfig:
        return replace(self, h=self.h / 2, record_every=self.record_every * 2,
                       h_schedule=tuple((t, h / 2) for t, h in self.h_schedule))


def disagreement_diameter(x) -> float | np.ndarray:
    """max_i x_i - min_i x_i; row-wise for a (T, n) stack."""
    x = np.asarray(x, dtype=float)
    out = x.max(axis=-1) - x.min(axis=-1)
    return out if np.ndim(out) else float(out)


def _metric(spec: ProtocolSpec, cfg: RunConfig) -> str:
    if cfg.conv_metric != "auto":
        return cfg.conv_metric
    return "xv" if spec.kind.second_order else "x"


def _convergence(times, diam, tol) -> tuple[bool, float | None]:
    """True when the trailing run of samples with diam < tol is long enough."""
    below = diam < tol
    if not below[-1]:
        return False, None
    bad = np.flatnonzero(~below)
    start = 0 if len(bad) == 0 else bad[-1] + 1
    if len(below) - start < CONV_WINDOW:
        return False, None
    return True, float(times[start])


def _channels(spec: ProtocolSpec, x, v, metric: str, x0, v0) -> tuple[dict, dict]:
    """Invariant and Lyapunov channels appropriate to the protocol."""
    T = len(x)
    nan = np.full(T, np.nan)
    E, p, V = nan, nan.copy(), nan.copy()
    pred: dict = {}
    kind = spec.kind
    if kind is ProtocolKind.FIRST_ORDER:
        pr = predict_first_order(spec.gains, x0)
        E = conserved_E_first(spec.gains, x)
        V = lyapunov_first(spec.gains, x, pr.value)
        pred = {"x_star": pr.value, "residual": pr.residual, "method": pr.method}
    elif kind is ProtocolKind.SECOND_ORDER:
        pr = predict_second_order_velocity(spec.gains, v0)
        p = conserved_p_second(spec.gains, v)
        V = lyapunov_second(spec.gains, spec.interactions_a, spec.graph, x, v, pr.value)
        pred = {"v_star": pr.value, "residual": pr.residual, "method": pr.method}
    elif kind is ProtocolKind.DAMPED:
        pr = predict_damped_position(spec.gains, x0, v0)
        E = conserved_E_damped(spec.gains, x, v)
        V = lyapunov_damped(spec.interactions_a, spec.graph, x, v)
        pred = {"x_star": pr.value, "residual": pr.residual, "method": pr.method}
    diam = disagreement_diameter(x)
    if metric == "xv" and v is not None:
        diam = np.maximum(diam, disagreement_diameter(v))
    ch = {
        "E": np.asarray(E, dtype=float),
        "p": np.asarray(p, dtype=float),
        "V": np.asarray(V, dtype=float),
        "diam": np.asarray(diam, dtype=float),
        "mean": x.mean(axis=1),
    }
    return ch, pred


def run(spec: ProtocolSpec, x0, v0=None, config: RunConfig | None = None, z0=None) -> Trajectory:
    """Integrate ``spec`` from (x0, v0) with fixed-step RK4.

    PI integral states start at zero unless ``z0`` is given, and the
    position anchor defaults to ``x0``. The returned trajectory carries the
    channels E, p, V (NaN where the protocol has no such quantity), the
    disagreement diameter and the mean position.
    """
    cfg = config or RunConfig(t_end=10.0)
    n = spec.n
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 must have length {n}")
    if spec.kind.second_order:
        v0 = np.zeros(n) if v0 is None else np.asarray(v0, dtype=float)
        if v0.shape != (n,):
            raise ValueError(f"v0 must have length {n}")
    elif v0 is not None:
        raise ValueError(f"{spec.kind.value} has no velocity state")
    if spec.kind.is_pi:
        spec = spec.with_anchor(x0)
        z0 = np.zeros(n) if z0 is None else np.asarray(z0, dtype=float)
    y0 = spec.pack(AgentState(x=x0, v=v0, z=z0))

    chunks, tchunks = [], []
    code, t_fail = _backend.STATUS_OK, None
    y = y0
    for k, (t0, h, n_steps, rec) in enumerate(cfg.segments()):
        samples, steps, code, fail_step = _backend.integrate_protocol(
            spec, y, h, n_steps, rec, cfg.divergence_cap, backend=cfg.backend)
        skip = 0 if k == 0 else 1  # segment start duplicates the previous end
        chunks.append(samples[skip:])
        tchunks.append(t0 + steps[skip:].astype(float) * h)
        if code != _backend.STATUS_OK:
            t_fail = t0 + fail_step * h
            break
        y = samples[-1]
    samples = np.concatenate(chunks)
    times = np.concatenate(tchunks)
    blocks = spec.block_slices()
    x = samples[:, blocks["x"]]
    v = samples[:, blocks["v"]] if "v" in blocks else None
    metric = _metric(spec, cfg)
    channels, pred = _channels(spec, x, v, metric, x0, v0)

    status, status_time = Status.TIMED_OUT, None
    if code == _backend.STATUS_DIVERGED:
        status, status_time = Status.DIVERGED, float(t_fail)
    elif code == _backend.STATUS_NONFINITE:
        status, status_time = Status.FAILED, float(t_fail)
    else:
        ok, t_conv = _convergence(times, channels["diam"], cfg.conv_tol)
        if ok:
            status, status_time = Status.CONVERGED, t_conv

    meta = {
        "kind": spec.kind.value,
        "n": n,
        "h": cfg.h,
        "t_end": cfg.t_end,
        "record_every": cfg.record_every,
        "h_schedule": [list(p) for p in cfg.h_schedule],
        "conv_tol": cfg.conv_tol,
        "conv_metric": metric,
        "backend": cfg.backend or _backend.BACKEND,
        "prediction": pred,
    }
    return Trajectory(times, samples, blocks, channels, status, status_time, meta)


# -- output ---------------------------------------------------------------------


def trajectory_header(tr: Trajectory, channels=CHANNELS) -> list[str]:
    n = tr.blocks["x"].stop - tr.blocks["x"].start
    cols = ["t"]
    for name in ("x", "v", "z"):
        if name in tr.blocks:
            cols += [f"{name}{i + 1}" for i in range(n)]
    return cols + [c for c in channels if c in tr.channels]


def write_trajectory_csv(tr: Trajectory, path, channels=CHANNELS) -> Path:
    """CSV ``t,x1..xn[,v1..vn][,z1..zn],E,p,V,diam,mean`` plus a ``.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parts = [tr.times[:, None]]
    for name in ("x", "v", "z"):
        if name in tr.blocks:
            parts.append(tr.block(name))
    chans = [c for c in channels if c in tr.channels]
    parts += [np.asarray(tr.channels[c], dtype=float)[:, None] for c in chans]
    table = np.hstack(parts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(tr, channels))
        for row in table:
            w.writerow([repr(float(v)) for v in row])
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(trajectory_summary(tr), indent=2, default=_jsonable))
    return path


def trajectory_summary(tr: Trajectory) -> dict:
    return {
        "status": tr.status.value,
        "status_time": tr.status_time,
        "samples": len(tr),
        "t_final": tr.t_final,
        "meta": tr.meta,
    }


def read_trajectory_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "__dataclass_fields__"):
        return asdict(o)
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not serializable: {type(o).__name__}")
