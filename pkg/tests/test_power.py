from __future__ import annotations

import warnings

import numpy as np
import pytest
from generators import synthetic_network_csv

from netconsensus.power import (
    ControlMode,
    FreqController,
    LoadStep,
    NetworkError,
    PowerNetwork,
    PowerRunConfig,
    PowerState,
    absolute_phases,
    affine_system,
    equilibrium,
    frequencies_hz,
    hz_to_rad,
    ingest_network,
    rad_to_hz,
    rhs_power,
    sample_network_path,
    state_layout,
    step_load_experiment,
    write_power_trajectory_csv,
)

TWO_BUS = """#buses
bus,m,d,p_m,v_mag
1,1e5,1,0,132000
2,1e5,1,0,132000
#lines
i,j,susceptance
1,2,1e-3
"""

MODES = [ControlMode.CENTRALIZED, ControlMode.DECENTRALIZED]


def _write(tmp_path, text, name="net.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_two_bus_coupling(tmp_path):
    net = ingest_network(_write(tmp_path, TWO_BUS))
    np.testing.assert_allclose(net.k, [132000.0 ** 2 * 1e-3])
    k = net.k[0]
    np.testing.assert_allclose(net.laplacian(), [[k, -k], [-k, k]])


def test_missing_column_defaults_with_warning(tmp_path):
    text = TWO_BUS.replace("bus,m,d,p_m,v_mag", "bus,d,p_m,v_mag").replace("1,1e5,1,0", "1,1,0").replace("2,1e5,1,0", "2,1,0")
    with pytest.warns(UserWarning, match="'m'"):
        net = ingest_network(_write(tmp_path, text))
    np.testing.assert_array_equal(net.m, [1e5, 1e5])


@pytest.mark.parametrize("text, code", [
    (TWO_BUS + "2,1,1e-3\n", NetworkError.DUPLICATE),
    (TWO_BUS.split("#lines")[0], NetworkError.MISSING_SECTION),
    (TWO_BUS.replace("1,2,1e-3", "1,3,1e-3"), NetworkError.UNKNOWN_BUS),
    (TWO_BUS.replace("1,2,1e-3", "1,2,-1e-3"), NetworkError.NONPOSITIVE),
    (TWO_BUS.replace("2,1e5,1,0", "2,0,1,0"), NetworkError.NONPOSITIVE),
    (TWO_BUS.replace("1,2,1e-3", "1,2,x"), NetworkError.MALFORMED),
    (TWO_BUS.replace("2,1e5,1,0,132000", "2,1e5,1,0,132000\n3,1e5,1,0,132000"), NetworkError.DISCONNECTED),
])
def test_invalid_networks(tmp_path, text, code):
    with pytest.raises(NetworkError) as exc:
        ingest_network(_write(tmp_path, text))
    assert exc.value.code == code


def test_csv_round_trip(tmp_path):
    net = ingest_network(sample_network_path())
    again = ingest_network(_write(tmp_path, net.to_csv()))
    for name in ("m", "d", "p_m", "v_mag"):
        np.testing.assert_array_equal(getattr(again, name), getattr(net, name))
    assert again.lines == net.lines


def test_unit_conversion():
    assert hz_to_rad(50.0) == pytest.approx(2 * np.pi * 50)
    assert rad_to_hz(hz_to_rad(49.7)) == pytest.approx(49.7)


@pytest.mark.parametrize("mode", MODES)
def test_equilibrium_is_rest_point(mode):
    net = ingest_network(sample_network_path())
    ctrl = FreqController(mode, 0.8, 0.8)
    A, c = affine_system(net, ctrl)
    y = equilibrium(net, ctrl)
    r = A @ y + c
    scale = np.abs(A).max() * np.abs(y).max() + np.abs(c).max()
    assert np.abs(r).max() <= 1e-9 * scale
    np.testing.assert_allclose(y[state_layout(net, ctrl)["w"]], 0.0, atol=1e-12)


@pytest.mark.parametrize("mode", MODES)
def test_absolute_rhs_matches_rotating_frame(mode):
    net = ingest_network(sample_network_path())
    ctrl = FreqController(mode, 0.8, 0.3)
    rng = np.random.default_rng(1)
    n, w_ref = net.n, ctrl.omega_ref
    A, c = affine_system(net, ctrl)
    lay = state_layout(net, ctrl)
    y = rng.normal(size=len(A)) * 1e-3
    t = 0.7
    theta, w = y[lay["theta"]], y[lay["w"]]
    aux = y[lay["omega_hat"]][0] + w_ref if mode is ControlMode.CENTRALIZED else y[lay["z"]]
    st = rhs_power(net, ctrl, PowerState(theta + w_ref * t, w + w_ref, aux))
    dy = A @ y + c
    np.testing.assert_allclose(st.delta - w_ref, dy[lay["theta"]], atol=1e-12)
    np.testing.assert_allclose(st.omega, dy[lay["w"]], rtol=1e-9, atol=1e-12)
    if mode is ControlMode.DECENTRALIZED:
        np.testing.assert_allclose(st.aux, dy[lay["z"]], atol=1e-12)
    else:
        assert st.aux == pytest.approx(dy[lay["omega_hat"]][0], abs=1e-12)


def _run(mode, steps, t_end=None, offset=0.0, b=0.8):
    net = ingest_network(sample_network_path())
    ctrl = FreqController(mode, 0.8, b)
    cfg = PowerRunConfig(t_end=t_end, n_samples=400)
    return net, ctrl, step_load_experiment(net, ctrl, steps, cfg, initial_phase_offset=offset)


@pytest.mark.parametrize("mode", MODES)
def test_zero_step_stays_put(mode):
    net, ctrl, tr = _run(mode, [LoadStep(2, 0.0, 100.0)], t_end=500.0)
    np.testing.assert_allclose(frequencies_hz(tr, net.n), 50.0, atol=1e-9)
    np.testing.assert_allclose(tr.states - tr.states[0], 0.0, atol=1e-9 * (1 + np.abs(tr.states[0]).max()))


@pytest.mark.parametrize("mode", MODES)
def test_load_step_dips_then_restores(mode):
    steps = [LoadStep(2, 1e4, 100.0)]
    net, ctrl, tr = _run(mode, steps)  # horizon set from the stability margin
    f = frequencies_hz(tr, net.n)
    # at the instant of the step only the stepped bus decelerates
    lay = state_layout(net, ctrl)
    A, c = affine_system(net, ctrl, net.p_m - np.eye(net.n)[1] * 1e4)
    wdot = (A @ equilibrium(net, ctrl) + c)[lay["w"]]
    assert wdot[1] == pytest.approx(-1e4 / net.m[1], rel=1e-6)
    np.testing.assert_allclose(np.delete(wdot, 1), 0.0, atol=1e-9 * abs(wdot[1]))
    assert f.min() < 50.0
    np.testing.assert_allclose(f[-1], 50.0, atol=1e-6)
    assert tr.channels["load_total"][-1] == pytest.approx(net.p_m.sum() - 1e4)


@pytest.mark.parametrize("mode", MODES)
def test_phase_offset_invariance(mode):
    steps = [LoadStep(3, 5e3, 50.0)]
    net, _, a = _run(mode, steps, t_end=2000.0)
    _, _, b = _run(mode, steps, t_end=2000.0, offset=0.37)
    np.testing.assert_allclose(frequencies_hz(b, net.n), frequencies_hz(a, net.n), atol=1e-9)
    np.testing.assert_allclose(b.block("theta") - a.block("theta"), 0.37, atol=1e-6)


def test_pmu_identity():
    net, ctrl, tr = _run(ControlMode.DECENTRALIZED, [LoadStep(6, 2e4, 30.0)], t_end=3000.0)
    delta = absolute_phases(tr, ctrl.omega_ref)
    z = tr.block("z")
    want = ctrl.omega_ref * tr.times[:, None] - delta
    np.testing.assert_allclose(z, want, atol=1e-6 * (1 + np.abs(z).max()))


def test_step_validation():
    net = ingest_network(sample_network_path())
    ctrl = FreqController(ControlMode.DECENTRALIZED, 0.8, 0.8)
    with pytest.raises(ValueError):
        step_load_experiment(net, ctrl, [LoadStep(9, 1.0, 1.0)], PowerRunConfig(t_end=10.0))
    with pytest.raises(ValueError):
        step_load_experiment(net, ctrl, [LoadStep(1, 1.0, 20.0)], PowerRunConfig(t_end=10.0))
    with pytest.raises(ValueError):
        FreqController(ControlMode.CENTRALIZED, 0.8, 0.0)


def test_trajectory_csv(tmp_path):
    net, _, tr = _run(ControlMode.CENTRALIZED, [LoadStep(2, 1e3, 10.0)], t_end=100.0)
    p = write_power_trajectory_csv(tr, net.n, tmp_path / "p.csv")
    header = p.read_text().splitlines()[0].split(",")
    assert header[:7] == ["t"] + [f"omega_{i}" for i in range(1, 7)]
    assert "omega_hat" in header and "z_1" not in header
    assert p.with_suffix(".json").exists()


def test_synthetic_network_loads(tmp_path):
    net = ingest_network(_write(tmp_path, synthetic_network_csv(30)))
    assert net.n == 30
    assert isinstance(net, PowerNetwork)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ingest_network(_write(tmp_path, net.to_csv(), "again.csv"))
