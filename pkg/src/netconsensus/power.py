"""Linearized swing-equation networks with PI frequency control.

Conventions
-----------
* Angular frequencies are rad/s inside this module; files and the CLI use Hz.
* ``p_m`` is the net power injected at a bus (it enters the swing equation
  with a plus sign). A load step of ``delta_p`` W therefore lowers ``p_m``.
* Decentralized integral state: ``z_i = int (omega_ref - omega_i) dt`` and
  ``u_i = a (omega_ref - omega_i) + b z_i``. With phases initialised so that
  ``delta(0) = -z(0)`` this gives the phase-measurement identity
  ``z_i(t) = omega_ref t - delta_i(t)``.
* Centralized: ``u_i = a (omega_hat - omega_i)`` with
  ``d omega_hat/dt = b (omega_ref - mean(omega))``.

Simulation runs in a frame rotating at ``omega_ref``:
``theta = delta - omega_ref t`` and ``w = omega - omega_ref``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, is_connected, laplacian
from .numerics import affine_power, eigenvalues_general, rk4_affine_map, solve_linear, solve_shifted_laplacian
from .trajectory import Status, Trajectory

DEFAULT_M = 1e5
DEFAULT_D = 1.0
DEFAULT_V = 132e3
TWO_PI = 2.0 * math.pi


def hz_to_rad(f):
    return TWO_PI * np.asarray(f, dtype=float) if np.ndim(f) else TWO_PI * float(f)


def rad_to_hz(w):
    return np.asarray(w, dtype=float) / TWO_PI if np.ndim(w) else float(w) / TWO_PI


class NetworkError(ValueError):
    """Invalid network; ``code`` distinguishes the failure class."""

    MALFORMED = "malformed-row"
    MISSING_SECTION = "missing-section"
    NONPOSITIVE = "nonpositive-parameter"
    DUPLICATE = "duplicate-entry"
    DISCONNECTED = "disconnected"
    UNKNOWN_BUS = "unknown-bus"

    def __init__(self, code: str, msg: str):
        super().__init__(f"[{code}] {msg}")
        self.code = code


@dataclass(frozen=True, eq=False)
class PowerNetwork:
    m: np.ndarray
    d: np.ndarray
    p_m: np.ndarray
    v_mag: np.ndarray
    lines: tuple[tuple[int, int, float], ...]  # 1-based (i, j, susceptance)

    def __post_init__(self):
        arrs = [np.array(getattr(self, k), dtype=float) for k in ("m", "d", "p_m", "v_mag")]
        n = len(arrs[0])
        if any(len(a) != n for a in arrs):
            raise NetworkError(NetworkError.MALFORMED, "bus parameter arrays differ in length")
        for name, a in zip(("m", "d", "v_mag"), (arrs[0], arrs[1], arrs[3])):
            if np.any(~(a > 0)):
                raise NetworkError(NetworkError.NONPOSITIVE, f"{name} must be positive at every bus")
        for k, name in enumerate(("m", "d", "p_m", "v_mag")):
            object.__setattr__(self, name, arrs[k])
        lines = tuple((int(i), int(j), float(s)) for i, j, s in self.lines)
        seen = set()
        for i, j, s in lines:
            if not (1 <= i <= n and 1 <= j <= n) or i == j:
                raise NetworkError(NetworkError.UNKNOWN_BUS, f"line ({i}, {j}) references invalid buses")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise NetworkError(NetworkError.DUPLICATE, f"duplicate line ({i}, {j})")
            seen.add(key)
            if not s > 0:
                raise NetworkError(NetworkError.NONPOSITIVE, f"line ({i}, {j}) susceptance must be positive")
        object.__setattr__(self, "lines", lines)
        if not is_connected(self.graph()):
            raise NetworkError(NetworkError.DISCONNECTED, "network is not connected")

    @property
    def n(self) -> int:
        return len(self.m)

    @property
    def k(self) -> np.ndarray:
        """Line coupling k_ij = |V_i| |V_j| b_ij."""
        return np.array([self.v_mag[i - 1] * self.v_mag[j - 1] * s for i, j, s in self.lines])

    def graph(self) -> Graph:
        return Graph(self.n, [(i, j) for i, j, _ in self.lines], self.k)

    def laplacian(self) -> np.ndarray:
        return laplacian(self.graph(), weighted=True)

    def with_p(self, p_m) -> PowerNetwork:
        return PowerNetwork(self.m, self.d, np.asarray(p_m, dtype=float), self.v_mag, self.lines)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("#buses\nbus,m,d,p_m,v_mag\n")
        for b in range(self.n):
            out.write(f"{b + 1},{float(self.m[b])!r},{float(self.d[b])!r},{float(self.p_m[b])!r},{float(self.v_mag[b])!r}\n")
        out.write("#lines\ni,j,susceptance\n")
        for i, j, s in self.lines:
            out.write(f"{i},{j},{s!r}\n")
        return out.getvalue()


def ingest_network(path) -> PowerNetwork:
    """Read a two-section network CSV (``#buses`` then ``#lines``).

    Omitted bus columns fall back to m = 1e5, d = 1, v_mag = 132 kV and
    p_m = 0, each with a warning.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise NetworkError(NetworkError.MALFORMED, f"{path}: {exc}") from exc
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            current = line[1:].strip().lower()
            sections[current] = []
            continue
        if current is None:
            raise NetworkError(NetworkError.MISSING_SECTION, f"{path}: data before any section header")
        sections[current].append(line)
    for name in ("buses", "lines"):
        if name not in sections or not sections[name]:
            raise NetworkError(NetworkError.MISSING_SECTION, f"{path}: missing #{name} section")

    bus_rows = list(csv.DictReader(sections["buses"]))
    cols = set(bus_rows[0].keys()) if bus_rows else set()
    if "bus" not in cols:
        raise NetworkError(NetworkError.MALFORMED, f"{path}: #buses header needs a bus column")
    defaults = {"m": DEFAULT_M, "d": DEFAULT_D, "p_m": 0.0, "v_mag": DEFAULT_V}
    for c, v in defaults.items():
        if c not in cols:
            warnings.warn(f"{path}: column {c!r} missing, using default {v:g}", stacklevel=2)
    buses = {}
    for lineno, row in enumerate(bus_rows, start=2):
        try:
            b = int(row["bus"])
            vals = {c: float(row[c]) if row.get(c) not in (None, "") else defaults[c] for c in defaults}
        except (TypeError, ValueError) as exc:
            raise NetworkError(NetworkError.MALFORMED, f"{path}: bus row {lineno} malformed") from exc
        if b in buses:
            raise NetworkError(NetworkError.DUPLICATE, f"{path}: bus {b} listed twice")
        buses[b] = vals
    n = len(buses)
    if sorted(buses) != list(range(1, n + 1)):
        raise NetworkError(NetworkError.MALFORMED, f"{path}: buses must be numbered 1..{n}")

    lines = []
    line_rows = list(csv.DictReader(sections["lines"]))
    for lineno, row in enumerate(line_rows, start=2):
        try:
            lines.append((int(row["i"]), int(row["j"]), float(row["susceptance"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkError(NetworkError.MALFORMED, f"{path}: line row {lineno} malformed") from exc

    cols_arr = {c: np.array([buses[b][c] for b in range(1, n + 1)]) for c in defaults}
    return PowerNetwork(cols_arr["m"], cols_arr["d"], cols_arr["p_m"], cols_arr["v_mag"], tuple(lines))


class ControlMode(str, enum.Enum):
    CENTRALIZED = "centralized"
    DECENTRALIZED = "decentralized"


@dataclass(frozen=True)
class FreqController:
    mode: ControlMode
    a: float
    b: float
    omega_ref_hz: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "mode", ControlMode(self.mode))
        if not (self.a > 0 and self.b > 0):
            raise ValueError("controller gains a, b must be positive")

    @property
    def omega_ref(self) -> float:
        return hz_to_rad(self.omega_ref_hz)


@dataclass
class PowerState:
    delta: np.ndarray
    omega: np.ndarray
    aux: np.ndarray | float  # omega_hat (centralized) or z (decentralized)


def control_input(net: PowerNetwork, ctrl: FreqController, state: PowerState) -> np.ndarray:
    w_ref = ctrl.omega_ref
    omega = np.asarray(state.omega, dtype=float)
    if ctrl.mode is ControlMode.CENTRALIZED:
        return ctrl.a * (float(state.aux) - omega)
    return ctrl.a * (w_ref - omega) + ctrl.b * np.asarray(state.aux, dtype=float)


def rhs_power(net: PowerNetwork, ctrl: FreqController, state: PowerState, p_m=None) -> PowerState:
    """Derivatives in absolute coordinates (rad, rad/s)."""
    p = net.p_m if p_m is None else np.asarray(p_m, dtype=float)
    delta = np.asarray(state.delta, dtype=float)
    omega = np.asarray(state.omega, dtype=float)
    u = control_input(net, ctrl, state)
    omega_dot = (-net.laplacian() @ delta - net.d * omega + p + u) / net.m
    if ctrl.mode is ControlMode.CENTRALIZED:
        aux_dot = ctrl.b * (ctrl.omega_ref - omega.mean())
    else:
        aux_dot = ctrl.omega_ref - omega
    return PowerState(omega.copy(), omega_dot, aux_dot)


# -- rotating-frame affine form -------------------------------------------------


def state_layout(net: PowerNetwork, ctrl: FreqController) -> dict[str, slice]:
    n = net.n
    if ctrl.mode is ControlMode.CENTRALIZED:
        return {"omega_hat": slice(0, 1), "theta": slice(1, n + 1), "w": slice(n + 1, 2 * n + 1)}
    return {"theta": slice(0, n), "w": slice(n, 2 * n), "z": slice(2 * n, 3 * n)}


def affine_system(net: PowerNetwork, ctrl: FreqController, p_m=None) -> tuple[np.ndarray, np.ndarray]:
    """(A, c) of the rotating-frame dynamics y' = A y + c.

    Centralized y = (omega_hat - omega_ref, theta, w); decentralized
    y = (theta, w, z).
    """
    n = net.n
    p = net.p_m if p_m is None else np.asarray(p_m, dtype=float)
    L = net.laplacian()
    Minv = 1.0 / net.m
    w_ref = ctrl.omega_ref
    lay = state_layout(net, ctrl)
    dim = 2 * n + 1 if ctrl.mode is ControlMode.CENTRALIZED else 3 * n
    A = np.zeros((dim, dim))
    c = np.zeros(dim)
    th, w = lay["theta"], lay["w"]
    A[th, w] = np.eye(n)
    A[w, th] = -Minv[:, None] * L
    A[w, w] = -np.diag(Minv * (net.d + ctrl.a))
    c[w] = Minv * (p - net.d * w_ref)
    if ctrl.mode is ControlMode.CENTRALIZED:
        h = lay["omega_hat"]
        A[h, w] = -ctrl.b / n
        A[w, h] = (ctrl.a * Minv)[:, None]
    else:
        z = lay["z"]
        A[w, z] = np.diag(ctrl.b * Minv)
        A[z, w] = -np.eye(n)
    return A, c


def equilibrium(net: PowerNetwork, ctrl: FreqController, p_m=None) -> np.ndarray:
    """A rest point of :func:`affine_system` (rotating frame).

    Decentralized: z = (b I + L)^{-1} (D omega_ref 1 - p), theta = -z.
    Centralized: omega_hat - omega_ref = (omega_ref sum d - sum p)/(n a) and
    theta the mean-zero solution of L theta = p - D omega_ref + a (omega_hat - omega_ref).
    """
    n = net.n
    p = net.p_m if p_m is None else np.asarray(p_m, dtype=float)
    w_ref = ctrl.omega_ref
    L = net.laplacian()
    lay = state_layout(net, ctrl)
    y = np.zeros(2 * n + 1 if ctrl.mode is ControlMode.CENTRALIZED else 3 * n)
    if ctrl.mode is ControlMode.CENTRALIZED:
        what = (w_ref * net.d.sum() - p.sum()) / (n * ctrl.a)
        rhs = p - net.d * w_ref + ctrl.a * what
        theta = solve_linear(L + np.ones((n, n)) / n, rhs)
        y[lay["omega_hat"]] = what
        y[lay["theta"]] = theta - theta.mean()
    else:
        z = solve_shifted_laplacian(L, ctrl.b, net.d * w_ref - p)
        y[lay["z"]] = z
        y[lay["theta"]] = -z
    return y


# -- step-load experiment ------------------------------------------------------


@dataclass(frozen=True)
class LoadStep:
    bus: int  # 1-based
    delta_p: float  # W of extra load
    t_step: float


@dataclass
class PowerRunConfig:
    t_end: float | None = None  # default: last step + settle_factor / |margin|
    h: float | None = None  # default: 0.02 / max |eigenvalue|
    record_every: int | None = None  # default: about n_samples samples
    n_samples: int = 2000
    settle_factor: float = 40.0


def _auto_config(net, ctrl, steps, cfg: PowerRunConfig):
    from .stability import classify_power_centralized, classify_power_decentralized

    A, _ = affine_system(net, ctrl)
    t_last = max((s.t_step for s in steps), default=0.0)
    h = cfg.h
    if h is None:
        rho = float(np.max(np.abs(eigenvalues_general(A))))
        h = 0.02 / rho if rho > 0 else 1.0
    t_end = cfg.t_end
    if t_end is None:
        classify = (classify_power_centralized if ctrl.mode is ControlMode.CENTRALIZED
                    else classify_power_decentralized)
        margin = classify(net, ctrl.a, ctrl.b).margin
        if not margin < 0:
            raise ValueError("closed loop is not asymptotically stable; give t_end explicitly")
        t_end = t_last + cfg.settle_factor / abs(margin)
    n_steps = int(math.ceil(t_end / h))
    rec = cfg.record_every or max(1, n_steps // cfg.n_samples)
    return h, n_steps, rec


def step_load_experiment(net: PowerNetwork, ctrl: FreqController, steps, config: PowerRunConfig | None = None,
                         initial_phase_offset: float = 0.0) -> Trajectory:
    """Start at the pre-step equilibrium, apply the load steps, record the response.

    Each constant-load segment is propagated in error coordinates around that
    segment's rest point, which keeps large integral states from degrading
    the precision of the decaying transient. ``initial_phase_offset`` adds a
    constant to every initial phase.
    """
    cfg = config or PowerRunConfig()
    steps = sorted((s if isinstance(s, LoadStep) else LoadStep(**s) for s in steps), key=lambda s: s.t_step)
    for s in steps:
        if not 1 <= s.bus <= net.n:
            raise ValueError(f"load step at unknown bus {s.bus}")
    h, n_steps, rec = _auto_config(net, ctrl, steps, cfg)
    for s in steps:
        if not 0 <= s.t_step <= n_steps * h:
            raise ValueError("load step outside the simulated horizon")

    lay = state_layout(net, ctrl)
    A, _ = affine_system(net, ctrl)
    P, _ = rk4_affine_map(A, np.zeros(len(A)), h)
    zero = np.zeros(len(A))
    cache: dict[int, np.ndarray] = {}

    def power(k):
        if k not in cache:
            cache[k] = affine_power(P, zero, k)[0]
        return cache[k]

    y = equilibrium(net, ctrl, net.p_m)
    y[lay["theta"]] += initial_phase_offset

    events = []  # (step index, load vector from then on)
    p = net.p_m.copy()
    for s in steps:
        p = p.copy()
        p[s.bus - 1] -= s.delta_p
        events.append((int(round(s.t_step / h)), p))

    p_cur = net.p_m.copy()
    times, states, loads = [0.0], [y.copy()], [p_cur.copy()]
    k = ev = 0
    while ev < len(events) and events[ev][0] <= 0:
        p_cur = events[ev][1]
        ev += 1
    y_eq = equilibrium(net, ctrl, p_cur)
    while k < n_steps:
        nxt = min(((k // rec) + 1) * rec, n_steps)
        if ev < len(events) and events[ev][0] < nxt:
            nxt = events[ev][0]
        y = y_eq + power(nxt - k) @ (y - y_eq)
        k = nxt
        while ev < len(events) and events[ev][0] <= k:
            p_cur = events[ev][1]
            ev += 1
            y_eq = equilibrium(net, ctrl, p_cur)
        if k % rec == 0 or k == n_steps:
            times.append(k * h)
            states.append(y.copy())
            loads.append(p_cur.copy())
        if not np.all(np.isfinite(y)):
            break

    states = np.array(states)
    tr = Trajectory(np.array(times), states, blocks=dict(lay))
    tr.status = Status.RUNNING if np.all(np.isfinite(states)) else Status.FAILED
    _attach_power_channels(tr, net, ctrl, np.array(loads))
    tr.meta.update({
        "mode": ctrl.mode.value,
        "frame": "rotating at omega_ref; theta = delta - omega_ref t, w = omega - omega_ref",
        "units": {"omega": "Hz", "u": "W", "omega_hat": "Hz", "z": "rad"},
        "h": h,
        "record_every": rec,
        "omega_ref_hz": ctrl.omega_ref_hz,
        "a": ctrl.a,
        "b": ctrl.b,
        "steps": [s.__dict__ for s in steps],
    })
    return tr


def _attach_power_channels(tr: Trajectory, net, ctrl, loads):
    w = tr.block("w")
    n = net.n
    w_ref = ctrl.omega_ref
    for i in range(n):
        tr.channels[f"omega_{i + 1}"] = rad_to_hz(w[:, i] + w_ref)
    if ctrl.mode is ControlMode.CENTRALIZED:
        what = tr.block("omega_hat")[:, 0]
        u = ctrl.a * (what[:, None] - w)
        tr.channels["omega_hat"] = rad_to_hz(what + w_ref)
    else:
        z = tr.block("z")
        u = -ctrl.a * w + ctrl.b * z
        for i in range(n):
            tr.channels[f"z_{i + 1}"] = z[:, i]
    for i in range(n):
        tr.channels[f"u_{i + 1}"] = u[:, i]
    tr.channels["max_freq_dev_hz"] = np.max(np.abs(rad_to_hz(w)), axis=1)
    tr.channels["load_total"] = loads.sum(axis=1)


def absolute_phases(tr: Trajectory, omega_ref: float) -> np.ndarray:
    """delta(t) = theta(t) + omega_ref t."""
    return tr.block("theta") + omega_ref * tr.times[:, None]


def frequencies_hz(tr: Trajectory, n: int) -> np.ndarray:
    return np.column_stack([tr.channels[f"omega_{i + 1}"] for i in range(n)])


def sample_network_path() -> Path:
    return Path(__file__).with_name("data") / "power6.csv"


def write_power_trajectory_csv(tr: Trajectory, n: int, path) -> Path:
    """CSV ``t,omega_1..omega_n,u_1..u_n`` plus controller channels, with a ``.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [f"omega_{i + 1}" for i in range(n)] + [f"u_{i + 1}" for i in range(n)]
    if "omega_hat" in tr.channels:
        cols.append("omega_hat")
    else:
        cols += [f"z_{i + 1}" for i in range(n)]
    cols += ["max_freq_dev_hz", "load_total"]
    table = np.column_stack([tr.times] + [tr.channels[c] for c in cols])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + cols)
        for row in table:
            w.writerow([repr(float(v)) for v in row])
    meta = {"status": tr.status.value, "samples": len(tr), "t_final": tr.t_final, "meta": tr.meta}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, default=float))
    return path
