import math

import numpy as np
import pytest

from microconv.generator import ThreePhaseSource, emf_potentials
from microconv.power_stage import (
    E_LOSS_DIODE, E_LOSS_GNDC, E_LOSS_PHASE, E_LOSS_SWITCH, E_RECT_OUT, E_SOURCE, GNDC, VDDA,
    PowerStageState, RectifierNetwork, SingularNetworkError, SwitchModel, body_diode_rectification_floor,
    stamp_network, step_network, stored_energy,
)

P1, P2, P3, N1, N2, N3 = range(6)


def gates(*on):
    return tuple(s in on for s in range(6))


def run_steps(net, state, emfs, dt, n):
    for _ in range(n):
        state = step_network(net, state, emfs, dt)
    return state


def test_zero_input_zero_state():
    net = RectifierNetwork()
    x = stamp_network(net, PowerStageState(), (0.0, 0.0, 0.0)).solve()
    assert np.all(x == 0.0)
    s = step_network(net, PowerStageState(), (0.0, 0.0, 0.0), 1e-8)
    assert np.all(s.i_phase == 0.0) and s.v_dda == 0.0 and s.v_cout == 0.0


def test_rc_discharge_matches_exponential():
    # gndc open: c_out and the load form an isolated RC loop
    r, c, v0 = 24.0, 1e-6, 3.0
    net = RectifierNetwork(c_out=c, r_load=r, gndc_conductance=0.0)
    tau = r * c
    dt = tau / 100
    s = PowerStageState(v_dda=v0, v_cout=v0)
    errs = []
    for k in range(1, 501):
        s = step_network(net, s, (0.0, 0.0, 0.0), dt)
        errs.append(abs(s.v_cout - v0 * math.exp(-k * dt / tau)) / v0)
    assert errs[-1] < 1e-3
    assert max(errs) < 2e-3


def test_rl_step_response_matches_closed_form():
    # N1 and N2 closed: e1 - e2 drives two phase branches in series through ground
    net = RectifierNetwork(r_load=math.inf)
    r_tot = 2 * net.r_phase + 2 * net.switch.r_on
    l_tot = 2 * net.l_phase
    tau = l_tot / r_tot
    dt = tau / 100
    emfs = (0.5, -0.5, 0.0)
    i_inf = 1.0 / r_tot
    s = PowerStageState(gate=gates(N1, N2))
    errs = []
    for k in range(1, 501):
        s = step_network(net, s, emfs, dt)
        errs.append(abs(s.i_phase[0] - i_inf * (1 - math.exp(-k * dt / tau))) / i_inf)
    assert errs[-1] < 1e-3
    assert max(errs) < 2e-3
    assert abs(s.i_phase[0] + s.i_phase[1]) < 1e-6 * i_inf


def test_rc_error_is_first_order_in_dt():
    r, c, v0 = 24.0, 1e-6, 3.0
    net = RectifierNetwork(c_out=c, r_load=r, gndc_conductance=0.0)
    tau = r * c

    def err(n):
        s = run_steps(net, PowerStageState(v_dda=v0, v_cout=v0), (0.0, 0.0, 0.0), tau / n, n)
        return abs(s.v_cout - v0 * math.exp(-1.0))

    ratio = err(50) / err(100)
    assert 1.8 < ratio < 2.2


def test_series_circuit_steady_state():
    # P1 and N2 on, U12 = 3 V DC: phase R, two switches, load and gndc resistance in series
    net = RectifierNetwork(r_load=24.0, gndc_conductance=10.0)
    emfs = (1.5, -1.5, 0.0)
    s = PowerStageState(gate=gates(P1, N2), v_dda=2.5, v_cout=2.5)
    s = run_steps(net, s, emfs, 1e-7, 6000)
    r_series = 2 * net.r_phase + 2 * net.switch.r_on + 24.0 + 0.1
    i = 3.0 / r_series
    assert s.i_phase[0] == pytest.approx(i, rel=1e-4)
    assert s.v_cout == pytest.approx(i * 24.0, rel=1e-4)
    assert s.v_dda == pytest.approx(i * 24.1, rel=1e-4)


def test_series_circuit_without_load_charges_to_emf():
    net = RectifierNetwork(r_load=math.inf)
    s = PowerStageState(gate=gates(P1, N2), v_dda=1.0, v_cout=1.0)
    s = run_steps(net, s, (1.5, -1.5, 0.0), 1e-7, 6000)
    assert s.v_dda == pytest.approx(3.0, rel=1e-4)
    assert abs(s.i_phase[0]) < 1e-5


def test_dc_divider_potentials():
    # with a very long step capacitors are open and inductors shorted
    net = RectifierNetwork(r_load=24.0, gndc_conductance=10.0)
    st = PowerStageState(gate=gates(P1, N2))
    x = stamp_network(net, st, (1.5, -1.5, 0.0), dt=1e3).solve()
    r_series = 2 * net.r_phase + 2 * net.switch.r_on + 24.0 + 0.1
    assert x[VDDA] == pytest.approx(3.0 * 24.1 / r_series, rel=1e-6)
    assert x[GNDC] == pytest.approx(3.0 * 0.1 / r_series, rel=1e-6)


def test_floating_network_reports_singular_node():
    net = RectifierNetwork(switch=SwitchModel(r_off=1e300, r_on=1.0), r_load=math.inf, gndc_conductance=0.0)
    with pytest.raises(SingularNetworkError):
        stamp_network(net, PowerStageState(), (0.0, 0.0, 0.0)).solve()


def test_energy_balance_over_a_period():
    src = ThreePhaseSource(v_ll_peak=3.3)
    net = RectifierNetwork(r_load=24.0)
    dt = 10e-9
    n = int(round(src.period / dt))
    s = PowerStageState()
    for k in range(3 * n):
        if k == 2 * n:
            e0, w0 = s.energy.copy(), stored_energy(net, s)
        s = step_network(net, s, emf_potentials(src, (k + 1) * dt), dt)
    de = s.energy - e0
    sinks = (de[E_LOSS_PHASE] + de[E_LOSS_SWITCH] + de[E_LOSS_DIODE] + de[E_LOSS_GNDC] + de[E_RECT_OUT]
             + stored_energy(net, s) - w0)
    assert de[E_SOURCE] > 0
    assert abs(de[E_SOURCE] - sinks) <= 5e-3 * de[E_SOURCE]


def test_body_diodes_block_below_forward_drop():
    net = RectifierNetwork(r_load=math.inf)
    s = step_network(net, PowerStageState(), (0.25, -0.25, 0.0), 1e-8)
    assert not s.diode_on.any()
    s = run_steps(net, PowerStageState(), (1.0, -1.0, 0.0), 1e-8, 50)
    assert s.diode_on[P1] and s.diode_on[N2]


@pytest.mark.parametrize("vf,vmin,expected", [(0.6, 1.0, 2.2), (0.0, 1.0, 1.0), (0.3, 1.0, 1.6)])
def test_body_diode_floor(vf, vmin, expected):
    assert body_diode_rectification_floor(vf, vmin) == pytest.approx(expected, abs=1e-12)


def test_body_diode_floor_rejects_negative():
    with pytest.raises(ValueError):
        body_diode_rectification_floor(-0.1, 1.0)


@pytest.mark.parametrize("kw", [dict(c_out=0), dict(c_vdda=-1), dict(r_load=-5), dict(gndc_conductance=11.0)])
def test_network_invariants(kw):
    with pytest.raises(ValueError):
        RectifierNetwork(**kw)


@pytest.mark.parametrize("kw", [dict(r_on=2e7), dict(body_vf=-0.1), dict(body_rd=0.0)])
def test_switch_invariants(kw):
    with pytest.raises(ValueError):
        SwitchModel(**kw)


def test_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        step_network(RectifierNetwork(), PowerStageState(), (0, 0, 0), 0.0)
