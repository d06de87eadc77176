"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

from __future__ import annotations

import math
import time

import numpy as np
from generators import random_damping, random_gain, random_graph, random_interaction, synthetic_network_csv

from netconsensus import (
    Graph,
    PIGains,
    ProtocolKind,
    ProtocolSpec,
    RunConfig,
    Status,
    get_scenario,
    laplacian,
    predict_damped_position,
    predict_first_order,
    predict_second_order_velocity,
    run,
    run_scenario,
)
from netconsensus.invariants import lemma1_bound
from netconsensus.numerics import (
    eigenvalues_general,
    integrate_ode,
    quad_adaptive,
    quad_gauss_panels,
    solve_monotone,
)
from netconsensus.graph import symmetric_eigenvalues
from netconsensus.power import ControlMode
from netconsensus.stability import (
    classify_pi_double,
    classify_pi_single,
    classify_power_centralized,
    classify_power_decentralized,
    spectral_boundary,
)


def test_first_order_equilibrium_law(criterion):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_err = worst_drift = 0.0
    for _ in range(20):
        g = random_graph(rng, 2, 8)
        gains = [random_gain(rng) for _ in range(g.n)]
        inter = [random_interaction(rng) for _ in range(g.m)]
        spec = ProtocolSpec(ProtocolKind.FIRST_ORDER, g, gains, inter)
        x0 = rng.uniform(-2, 2, g.n)
        tr = run(spec, x0, None, RunConfig(t_end=60.0, h=5e-4, record_every=200))
        target = predict_first_order(gains, x0).value
        worst_err = max(worst_err, float(np.max(np.abs(tr.x[-1] - target))))
        E = tr.channels["E"]
        worst_drift = max(worst_drift, float(np.max(np.abs(E - E[0])) / (1 + abs(E[0]))))
    elapsed = time.perf_counter() - t0
    ok = worst_err <= 1e-3 and worst_drift <= 1e-6 and elapsed <= 10.0
    criterion(1, ok, f"20 instances: max terminal error {worst_err:.2e} (tol 1e-3), "
                     f"max relative E drift {worst_drift:.2e} (tol 1e-6), {elapsed:.1f} s (limit 10 s)")


def test_second_order_velocity_law(criterion):
    t0 = time.perf_counter()
    sc = get_scenario("satellites").resolve()
    res = run_scenario(sc)
    tr = res.trajectory
    elapsed = time.perf_counter() - t0
    dx = float(np.ptp(tr.x[-1]))
    dv = float(np.ptp(tr.v[-1]))
    v_star = predict_second_order_velocity(sc.spec.gains, sc.v0).value
    err = float(np.max(np.abs(tr.v[-1] - v_star)))
    p = tr.channels["p"]
    drift = float(np.max(np.abs(p - p[0])))
    lim = 1e-6 * (1 + abs(p[0]))
    ok = (tr.status is Status.CONVERGED and dx < 1e-6 and dv < 1e-6 and err <= 1e-3
          and drift <= lim and elapsed <= 5.0)
    criterion(2, ok, f"status {tr.status.value}, diameters x {dx:.1e} v {dv:.1e}; v* = {v_star:.6f}, "
                     f"error {err:.2e}; p drift {drift:.2e} (limit {lim:.2e}); {elapsed:.1f} s (limit 5 s)")


def _damped_rest_start_point(kappas, x0):
    """Common position with v0 = 0: sum_i of the integral of kappa_i from x0_i to x vanishes."""

    def F(x):
        return sum(quad_adaptive(k, float(xi), x, tol=1e-12) for k, xi in zip(kappas, x0))

    return solve_monotone(F, 0.0, (float(np.min(x0)), float(np.max(x0))))


def test_damped_consensus_point(criterion):
    rng = np.random.default_rng(3)
    worst = worst_rest = worst_v = 0.0
    bounded = True
    for k in range(20):
        g = random_graph(rng, 2, 8)
        kap = [random_damping(rng) for _ in range(g.n)]
        inter = [random_interaction(rng) for _ in range(g.m)]
        spec = ProtocolSpec(ProtocolKind.DAMPED, g, kap, inter)
        x0 = rng.uniform(-2, 2, g.n)
        v0 = rng.uniform(-1, 1, g.n) if k % 2 else np.zeros(g.n)
        tr = run(spec, x0, v0, RunConfig(t_end=80.0, h=1e-3, record_every=100))
        target = predict_damped_position(kap, x0, v0).value
        worst = max(worst, float(np.max(np.abs(tr.x[-1] - target))))
        if k % 2 == 0:
            worst_rest = max(worst_rest, float(np.max(np.abs(tr.x[-1] - _damped_rest_start_point(kap, x0)))))
        V = tr.channels["V"]
        worst_v = max(worst_v, float(np.max(np.diff(V) / (1 + np.abs(V[:-1])))))
        R = lemma1_bound(kap, inter, g, x0, v0)
        bounded &= tr.status is not Status.DIVERGED and float(np.max(np.abs(tr.x))) <= R
    ok = worst <= 1e-3 and worst_rest <= 1e-3 and worst_v <= 1e-8 and bounded
    criterion(3, ok, f"20 instances: terminal error {worst:.2e}, v0=0 special-case error {worst_rest:.2e} "
                     f"(tol 1e-3); largest relative V increase {worst_v:.1e} (tol 1e-8); bounded {bounded}")


def test_pi_double_boundary_robots(criterion):
    t0 = time.perf_counter()
    base = get_scenario("robots")
    out = {}
    for v in ("a=0", "a=1", "a=15", "a=20"):
        out[v] = run_scenario(base.resolve(v))
    g = base.spec.graph
    a_crit = spectral_boundary(g, 5.0, 3.0)
    elapsed = time.perf_counter() - t0
    m15 = float(np.max(out["a=15"].stability.spectrum.real))
    d0 = float(out["a=0"].trajectory.channels["diam"][-1])
    checks = {
        "a=1 converged": out["a=1"].trajectory.status is Status.CONVERGED,
        "a=0 diameter > 0.01": d0 > 0.01,
        "a=15 |margin| < 1e-6": abs(m15) < 1e-6 and out["a=15"].stability.kind.value == "Marginal",
        "a=20 diverged": out["a=20"].trajectory.status is Status.DIVERGED,
        "boundary": abs(a_crit - 15.0) <= 1e-6 * 15.0,
        "runtime": elapsed <= 20.0,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    criterion(4, ok, f"a=0 diameter {d0:.3f}, a=15 margin {m15:.1e}, a_crit {a_crit:.9f}, "
                     f"{elapsed:.1f} s (limit 20 s)" + (f"; failed: {failed}" if failed else ""))


def test_pi_single_dichotomy(criterion):
    rng = np.random.default_rng(5)
    worst_diam = worst_rate = worst_delta = 0.0
    bounded = True
    for _ in range(8):
        g = random_graph(rng, 3, 8)
        n = g.n
        a, b = rng.uniform(0.5, 2), rng.uniform(0.5, 2)
        x0 = rng.uniform(-3, 3, n)
        cfg = RunConfig(t_end=200.0, h=1e-3, record_every=100, conv_metric="x")

        d = rng.uniform(-1, 1, n)
        d += 0.3 * np.sign(d.sum())  # keep the total disturbance clearly away from zero
        tr = run(ProtocolSpec(ProtocolKind.PI_SINGLE, g, pi=PIGains(a, b, 0.0), d=d), x0, None, cfg)
        worst_diam = max(worst_diam, float(tr.channels["diam"][-1]))
        m, t = tr.channels["mean"], tr.times
        i = len(t) // 2
        rate = (m[-1] - m[i]) / (t[-1] - t[i])
        worst_rate = max(worst_rate, abs(rate - d.sum() / n))

        d0 = d - d.mean()
        tr0 = run(ProtocolSpec(ProtocolKind.PI_SINGLE, g, pi=PIGains(a, b, 0.0), d=d0), x0, None, cfg)
        half = len(tr0.times) // 2
        early = float(np.max(np.abs(tr0.x[:half])))
        late = float(np.max(np.abs(tr0.x[half:])))
        bounded &= tr0.status is not Status.DIVERGED and late <= early + 1e-9

        delta = rng.uniform(0.2, 1.0)
        trd = run(ProtocolSpec(ProtocolKind.PI_SINGLE, g, pi=PIGains(a, b, delta)), x0, None, cfg)
        worst_delta = max(worst_delta, float(np.max(np.abs(trd.x[-1] - x0.mean()))))
    ok = worst_diam < 1e-6 and worst_rate <= 1e-4 and bounded and worst_delta <= 1e-4
    criterion(5, ok, f"8 graphs: diameter {worst_diam:.1e} (< 1e-6), mean-rate error {worst_rate:.1e} "
                     f"(tol 1e-4), balanced case bounded {bounded}, anchored error {worst_delta:.1e} (tol 1e-4)")


def test_pi_double_average_consensus(criterion):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(8):
        g = random_graph(rng, 3, 8)
        n = g.n
        b, gam = rng.uniform(0.5, 2), rng.uniform(0.5, 3)
        a = rng.uniform(0.1, 0.9) * b * gam
        delta = rng.uniform(0.2, 1.0)
        spec = ProtocolSpec(ProtocolKind.PI_DOUBLE, g, pi=PIGains(a, b, delta, gam))
        x0, v0 = rng.uniform(-3, 3, n), rng.uniform(-1, 1, n)
        tr = run(spec, x0, v0, RunConfig(t_end=300.0, h=1e-3, record_every=100))
        worst = max(worst, float(np.max(np.abs(tr.x[-1] - x0.mean()))))
    criterion(6, worst <= 1e-4, f"8 instances: max |x_i(T) - mean(x0)| = {worst:.1e} (tol 1e-4)")


def _spectral_shifted_solve(L, b, r):
    """(b I + L)^{-1} r through the eigenvectors of L, the consensus eigenvalue taken as exactly 0."""
    lam, U = np.linalg.eigh(L)
    lam[0] = 0.0
    U[:, 0] = 1.0 / np.sqrt(len(r))
    return U @ ((U.T @ r) / (b + lam))


def _power_assertions(sc_base):
    """Frequency restoration, decentralized z0 and Hurwitz classification for every variant."""
    lines, ok = [], True
    for v in sc_base.variant_names:
        sc = sc_base.resolve(v)
        res = run_scenario(sc)
        tr = res.trajectory
        net, ctrl = sc.network, sc.controller
        dev = float(tr.channels["max_freq_dev_hz"][-1])
        good = dev < 1e-3
        msg = f"{v}: freq dev {dev:.1e} Hz"
        if ctrl.mode is ControlMode.DECENTRALIZED:
            p_after = net.p_m.copy()
            for s in sc.steps:
                p_after[s.bus - 1] -= s.delta_p
            z0 = _spectral_shifted_solve(net.laplacian(), ctrl.b, net.d * ctrl.omega_ref - p_after)
            zerr = float(np.max(np.abs(tr.block("z")[-1] - z0)))
            good &= zerr <= 1e-4
            msg += f", z error {zerr:.1e}"
        lines.append(msg)
        ok &= good
    for b in (0.04, 0.8):
        for classify in (classify_power_centralized, classify_power_decentralized):
            rep = classify(sc_base.network, 0.8, b)
            ok &= rep.kind.value == "Hurwitz"
    return ok, lines


def test_power_frequency_restoration(criterion, tmp_path):
    t0 = time.perf_counter()
    base = get_scenario("power6")
    ok6, lines6 = _power_assertions(base)
    net_path = tmp_path / "bus30.csv"
    net_path.write_text(synthetic_network_csv(30))
    base30 = base.with_network(net_path)
    ok30, lines30 = _power_assertions(base30)
    elapsed = time.perf_counter() - t0
    steps_kw = sorted({s.delta_p / 1e3 for s in base.steps})
    ok = ok6 and ok30 and elapsed <= 30.0
    criterion(7, ok, f"steps {steps_kw} kW; 6-bus [{'; '.join(lines6)}]; 30-bus [{'; '.join(lines30)}]; "
                     f"Hurwitz at a=0.8, b in {{0.04, 0.8}}; {elapsed:.1f} s (limit 30 s)")


def test_building_rooms(criterion):
    sc = get_scenario("building").resolve()
    res = run_scenario(sc)
    tr = res.trajectory
    peak = float(np.max(tr.x[:, [1, 4]]))
    target = predict_first_order(sc.spec.gains, sc.x0).value
    err = float(np.max(np.abs(tr.x[-1] - target)))
    final = float(np.max(tr.x[-1]))
    ok = peak <= 23.0 and tr.status is Status.CONVERGED and final < 23.0 and err <= 1e-3
    criterion(8, ok, f"rooms 2 and 5 peak {peak:.3f} degC (limit 23); status {tr.status.value}; "
                     f"common value {target:.4f} degC, error {err:.1e} (tol 1e-3)")


def test_cross_solver_oracle(criterion):
    rng = np.random.default_rng(9)
    factors = [0.3, 0.7, 0.95, 1.0, 1.05, 1.5, 3.0]
    disagreements, kinds = [], {"Hurwitz": 0, "Marginal": 0, "Unstable": 0}
    for k in range(50):
        g = random_graph(rng, 2, 8)
        b, gam = float(rng.uniform(0.5, 3)), float(rng.uniform(0.5, 3))
        if k % 5 == 4:
            # single integrator: stable for every positive a; include the boundary a = 0
            a = float(rng.choice([0.0, rng.uniform(0.1, 5)]))
            rep = classify_pi_single(g, a, b)
        else:
            f = factors[k % len(factors)]
            delta = float(rng.uniform(0.1, 1.0)) if (k % 7 == 3 and f != 1.0) else 0.0
            rep = classify_pi_double(g, f * b * gam, b, gam, delta)
        kinds[rep.kind.value] += 1
        if not rep.routes_agree:
            disagreements.append(k)
    ok = not disagreements and all(v > 0 for v in kinds.values())
    criterion(9, ok, f"50 instances, classes {kinds}; disagreements {len(disagreements)} {disagreements}")


def test_numerics_self_tests(criterion):
    # RK4 order on the logistic equation y' = y (1 - y), y(0) = 1/4
    def exact(t):
        return 1.0 / (1.0 + 3.0 * math.exp(-t))

    errs = []
    for h in (0.1, 0.05, 0.025, 0.0125):
        tr = integrate_ode(lambda t, y: y * (1 - y), np.array([0.25]), 3.0, h, record_every=10**6)
        errs.append(abs(float(tr.states[-1, 0]) - exact(3.0)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(3)]
    rk_ok = all(3.8 <= o <= 4.2 for o in orders)

    cases = [
        (np.exp, 0.0, 2.0, math.e ** 2 - 1),
        (np.cos, 0.0, 3.0, math.sin(3.0)),
        (lambda x: 1.0 / (1.0 + x * x), -5.0, 5.0, 2 * math.atan(5.0)),
        (lambda x: 1.0 / (0.4 + abs(x)), -2.0, 3.0, math.log(2.4 / 0.4) + math.log(3.4 / 0.4)),
        (lambda x: x ** 5 - 2 * x, -1.0, 2.0, (2 ** 6 - 1) / 6 - 3.0),
    ]
    q_err = max(abs(quad_adaptive(f, lo, hi) - want) for f, lo, hi, want in cases)
    q_err = max(q_err, max(abs(float(quad_gauss_panels(f, lo, hi, 0.25)) - want)
                           for f, lo, hi, want in cases[:3]))

    rng = np.random.default_rng(10)
    tr_err = 0.0
    for _ in range(20):
        A = rng.normal(size=(6, 6))
        tr_err = max(tr_err, abs(complex(np.sum(eigenvalues_general(A))) - np.trace(A)))
    sym_err = 0.0
    for _ in range(20):
        g = random_graph(rng, 2, 9)
        L = laplacian(g.reweighted(rng.uniform(0.2, 3.0, g.m)), weighted=True)
        s = symmetric_eigenvalues(L).eigenvalues
        e = np.sort(eigenvalues_general(L).real)
        sym_err = max(sym_err, float(np.max(np.abs(s - e))))
    ok = rk_ok and q_err <= 1e-8 and tr_err <= 1e-6 and sym_err <= 1e-6
    criterion(10, ok, f"RK4 observed orders {orders[0]:.2f}, {orders[1]:.2f}, {orders[2]:.2f}; quadrature error {q_err:.1e} "
                      f"(tol 1e-8); trace error {tr_err:.1e}; symmetric vs general {sym_err:.1e} (tol 1e-6)")


def test_graph_used_for_boundary_is_path():
    # the robots network is the five-vertex path
    assert get_scenario("robots").spec.graph == Graph.path(5)
