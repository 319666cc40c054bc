import math

import numpy as np
import pytest

from microconv.control import Mode
from microconv.engine import (
    CHANNELS, EngineConfig, MeasurementError, locate_event, run, simulate, startup_duration,
)
from microconv.generator import ThreePhaseSource, emf_potentials
from microconv.topology import TopologyNotImplementedError

from conftest import INF, scenario

RECT_SINKS = ("e_loss_phase", "e_loss_switch", "e_loss_diode", "e_loss_gndc", "e_rect_out", "e_stored")
CASCADE_SINKS = ("e_loss_phase", "e_loss_switch", "e_loss_diode", "e_loss_gndc", "e_stored", "e_boost_out",
                 "e_boost_loss_sw", "e_boost_loss_diode", "e_boost_loss_q")
PERIOD = 20e-6


def balance_residuals(tr, sinks, t0, t1, span=PERIOD):
    out = []
    for a in np.arange(t0, t1 - span / 2, span):
        w = tr.window(a, a + span)
        src = w.delta("e_source")
        out.append((src - sum(w.delta(c) for c in sinks)) / src)
    return np.array(out)


@pytest.fixture(scope="module")
def default_run():
    return simulate(scenario(engine__t_end=4e-4))


@pytest.fixture(scope="module")
def cascade_run():
    return simulate(scenario(features__topology_tag="DUAL_STAGE", load__r_load=200.0, engine__t_end=5e-3))


# configuration

@pytest.mark.parametrize("kw", [dict(dt=0), dict(event_tol=2e-8), dict(event_tol=0), dict(t_end=-1),
                                dict(record_decimation=0)])
def test_engine_config_invariants(kw):
    with pytest.raises(ValueError):
        EngineConfig(**kw)


def test_null_run():
    tr, summary = run(scenario(engine__t_end=0.0))
    assert len(tr) == 0
    assert summary.e_source == 0.0 and summary.e_rect_out == 0.0
    assert not summary.reached_active


def test_descriptor_topology_is_not_simulated():
    with pytest.raises(TopologyNotImplementedError):
        simulate(scenario(features__topology_tag="SINGLE_STAGE"))


# determinism and trace shape

def test_reruns_are_bit_identical():
    s = scenario(engine__t_end=1e-4, features__topology_tag="DUAL_STAGE", load__r_load=500.0)
    a, ia = simulate(s)
    b, ib = simulate(s)
    assert np.array_equal(a.time, b.time)
    for name in CHANNELS:
        assert np.array_equal(a[name], b[name]), name
    assert ia == ib


def test_trace_grid(default_run):
    tr, _ = default_run
    assert set(tr.names) == set(CHANNELS)
    assert np.all(np.diff(tr.time) > 0)
    assert all(len(tr[n]) == len(tr) for n in tr.names)
    assert tr.time[-1] == pytest.approx(4e-4, abs=1e-12)


# control-level invariants seen through the engine

def test_mode_sequence_and_absorbing_active(default_run):
    tr, info = default_run
    mode = tr["mode"]
    first_active = np.argmax(mode == Mode.ACTIVE)
    assert mode[first_active] == Mode.ACTIVE
    assert np.all(mode[first_active:] == Mode.ACTIVE)
    assert np.all(np.isin(mode[:first_active], (Mode.IDLE, Mode.SYNC_STARTUP)))
    assert info.t_first_engage < info.t_active


def test_startup_drives_only_p1_and_n2(default_run):
    tr, _ = default_run
    eng = tr["engaged"] > 0.5
    assert eng.any()
    for g in ("gate_P2", "gate_P3", "gate_N1", "gate_N3"):
        assert np.all(tr[g][eng] == 0)
    assert np.all(tr["gate_P1"][eng] == 2) and np.all(tr["gate_N2"][eng] == 2)


def test_gndc_nondecreasing_and_activated_at_active(default_run):
    tr, info = default_run
    g = tr["g_gndc"]
    assert np.all(np.diff(g) >= 0)
    assert np.all(g[tr.time < info.t_active] == 0)
    assert g[-1] == pytest.approx(10.0)


def test_latch_fires_once_and_is_absorbing(default_run):
    tr, info = default_run
    latched = tr["latched"]
    assert np.all(np.diff(latched) >= 0)
    assert info.t_latch is not None
    assert not np.any(tr["engaged"][tr.time >= info.t_latch] > 0.5)


def test_rail_nonnegative(default_run):
    tr, _ = default_run
    assert tr["v_dda"].min() >= -1e-6


def test_no_shoot_through(default_run):
    assert default_run[1].n_shoot_through == 0


def test_conduction_follows_extreme_phases(default_run):
    # away from commutations (propagation delay plus dead time around any gate
    # change) a conducting high/low-side switch sits on the max/min phase
    tr, _ = default_run
    w = tr.window(1e-4, 4e-4)
    phi = np.stack([w["phi1"], w["phi2"], w["phi3"]])
    cur = np.stack([w["i1"], w["i2"], w["i3"]])
    g = np.stack([w[f"gate_{n}"] for n in ("P1", "P2", "P3", "N1", "N2", "N3")]) > 0
    changes = w.time[1:][np.any(g[:, 1:] != g[:, :-1], axis=0)]
    idx = np.clip(np.searchsorted(changes, w.time), 1, len(changes) - 1)
    nearest = np.minimum(np.abs(w.time - changes[idx - 1]), np.abs(w.time - changes[idx]))
    settled = nearest > 100e-9 + 3 * 10e-9 + 100e-9
    checked = 0
    for k in range(3):
        for on, ext in ((g[k], np.argmax(phi, axis=0)), (g[k + 3], np.argmin(phi, axis=0))):
            m = on & settled & (np.abs(cur[k]) > 1e-3)
            checked += m.sum()
            assert np.all(ext[m] == k)
    assert checked > 1000


# power-stage properties through the engine

def test_body_diode_only_settles_to_peak_minus_two_drops():
    tr, info = simulate(scenario(source__v_ll_peak=2.0, load__r_load=INF,
                                 features__startup_circuit_enabled=False, engine__t_end=1e-3))
    assert info.t_active is None
    v = tr.window(8e-4, 1e-3)["v_dda"].mean()
    assert v == pytest.approx(2.0 - 2 * 0.6, rel=0.02)


def test_passive_network_cannot_boost():
    tr, _ = simulate(scenario(source__l_phase=0.0, features__gndc_sequencer_enabled=False,
                              load__r_load=INF, engine__t_end=4e-4))
    _, means = tr.period_means("v_dda", PERIOD)
    assert means.max() <= 3.3


def test_energy_balance_per_period():
    for r in (24.0, 200.0):
        tr, _ = simulate(scenario(load__r_load=r, engine__t_end=4e-4))
        res = balance_residuals(tr, RECT_SINKS, 2e-4, 4e-4)
        assert np.abs(res).max() < 5e-3, r


def test_energy_balance_cascade_window(cascade_run):
    tr, _ = cascade_run
    res = balance_residuals(tr, CASCADE_SINKS, 3e-3, 5e-3, span=2e-3)
    assert abs(res[0]) < 5e-3


def test_energy_balance_converges_with_dt():
    res = []
    for dt in (10e-9, 5e-9):
        tr, _ = simulate(scenario(engine__t_end=3e-4, engine__dt=dt, engine__record_decimation=int(1e-7 / dt)))
        res.append(np.abs(balance_residuals(tr, RECT_SINKS, 2e-4, 3e-4)).max())
    assert math.log2(res[0] / res[1]) >= 0.9


def test_dt_halving_changes_cycle_averages_little():
    means = []
    for dt in (10e-9, 5e-9):
        s = scenario(features__topology_tag="DUAL_STAGE", load__r_load=1000.0, engine__t_end=6e-3,
                     engine__dt=dt, engine__record_decimation=int(1e-7 / dt))
        tr, _ = simulate(s)
        w = tr.window(4e-3, 6e-3)
        means.append([w.period_means(c, PERIOD)[1].mean() for c in ("v_dda", "boost_v_out")])
    a, b = np.array(means)
    assert np.all(np.abs(a - b) / a < 2e-3)


# end to end

def test_cascade_reaches_regulation_within_5ms(cascade_run):
    tr, info = cascade_run
    assert info.t_active is not None
    t_reg = tr.time[np.argmax(tr["boost_v_out"] >= 5.0 - 0.05)]
    assert tr["boost_v_out"].max() >= 4.95 and t_reg < 5e-3


def test_boost_held_off_until_power_good(cascade_run):
    tr, info = cascade_run
    early = tr.time < info.t_active
    assert np.all(tr["boost_mode"][early] == 2)


# events

def test_locate_linear_ramp_crossing():
    t_star = 3.7e-6
    t = locate_event(lambda t: 2.0 * t >= 2.0 * t_star, 0.0, 1e-5, tol=1e-9)
    assert t_star <= t <= t_star + 1e-9


def test_locate_sinusoid_zero_crossing():
    src = ThreePhaseSource(freq=50e3, phase0=0.4)
    t_star = (math.pi - 0.4) / (2 * math.pi * 50e3)
    t = locate_event(lambda t: emf_potentials(src, t)[0] > 0, 1e-6, 15e-6, tol=1e-9)
    assert abs(t - t_star) <= 1e-9


def test_locate_rejects_constant_predicate():
    with pytest.raises(ValueError):
        locate_event(lambda t: True, 0.0, 1.0)


# start-up duration

def test_startup_duration_near_quarter_period():
    tr, _ = simulate(scenario(source__v_ll_peak=2.0, load__r_load=INF, engine__t_end=1e-4,
                              engine__record_decimation=1))
    assert startup_duration(tr) == pytest.approx(5e-6, rel=0.25)


def test_startup_duration_errors_without_active():
    tr, _ = simulate(scenario(load__r_load=10.0, features__gndc_sequencer_enabled=False, engine__t_end=2e-4))
    with pytest.raises(MeasurementError):
        startup_duration(tr)


def test_startup_duration_errors_without_engagement():
    tr, _ = simulate(scenario(features__startup_circuit_enabled=False, load__r_load=INF, engine__t_end=1e-4))
    assert (tr["mode"] == Mode.ACTIVE).any()
    with pytest.raises(MeasurementError):
        startup_duration(tr)


def test_startup_duration_errors_on_empty_trace():
    tr, _ = simulate(scenario(engine__t_end=0.0))
    with pytest.raises(MeasurementError):
        startup_duration(tr)
