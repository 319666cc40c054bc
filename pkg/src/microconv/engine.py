"""Time-stepping of the generator -> rectifier (+control) -> boost -> load chain.

One global step ``dt`` drives everything. When a diode changes conduction, a
comparator output flips or the start-up circuit engages/releases inside a step,
the step is bisected down to ``event_tol`` and the run continues from the
crossing. Gate commands from the comparators reach the switches after the
comparator propagation delay; the step size is trimmed so that these land
exactly on the grid.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numba
import numpy as np

from . import boost as bst
from . import control as ctl
from . import power_stage as ps
from .control import Mode
from .generator import _emf
from .trace import Trace

STATUS_OK = 0
STATUS_STEP_FAILURE = 1

_TINY = 1e-18

KParams = namedtuple("KParams", [
    "v_ll_peak", "freq", "phase0", "r_phase", "l_phase",
    "r_on", "r_off", "body_vf", "body_rd", "r_on_startup",
    "c_vdda", "c_out", "g_load",
    "v_supply_min", "hysteresis", "prop_delay",
    "startup_enabled", "v_th_m4", "u12_min", "c1", "r_leak", "i_charge",
    "i_ref_target", "tau_establish", "established_fraction",
    "gndc_enabled", "ramp_duration", "g_max", "g_floor",
    "boost_enabled", "l_boost", "c_boost", "f_sw", "v_out_set", "v_in_min", "i_quiescent",
    "r_switch", "r_diode_eq", "v_band", "i_peak_max", "d_max", "e_switching", "g_load_boost",
    "pg_on", "pg_off",
    "dt", "t_end", "event_tol", "record_interval",
])

CHANNELS = (
    "e1", "e2", "e3", "i1", "i2", "i3", "phi1", "phi2", "phi3",
    "v_dda", "v_cout", "v_gndc", "boost_v_out", "boost_i_l", "boost_mode",
    "mode", "engaged", "gate_P1", "gate_P2", "gate_P3", "gate_N1", "gate_N2", "gate_N3",
    "g_gndc", "i_ref", "v_c1", "phi_c", "latched",
    "e_source", "e_rect_in", "e_loss_phase", "e_loss_switch", "e_loss_diode", "e_loss_gndc",
    "e_rect_out", "e_boost_in", "e_boost_out", "e_boost_loss_sw", "e_boost_loss_diode",
    "e_boost_loss_q", "e_stored", "i_draw", "boost_on_time", "boost_switching_time",
)
N_COLS = len(CHANNELS) + 1

# info slots returned by the kernel
(I_STATUS, I_T_FAIL, I_T_ENGAGE, I_T_ACTIVE, I_T_LATCH, I_N_STEPS, I_N_EVENTS, I_N_REC, I_T_END,
 I_N_OVERLAP) = range(10)
N_INFO = 10


class RunError(RuntimeError):
    pass


class MeasurementError(RuntimeError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    dt: float = 10e-9
    t_end: float = 1e-3
    event_tol: float = 1e-9
    # keep one sample per record_decimation * dt of simulated time
    record_decimation: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not 0 < self.event_tol <= self.dt:
            raise ValueError("event_tol must lie in (0, dt]")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if int(self.record_decimation) != self.record_decimation or self.record_decimation < 1:
            raise ValueError("record_decimation must be an integer >= 1")


# ---------------------------------------------------------------------------
# compiled stepping loop


@numba.njit(cache=True)
def _channel_g(p, gate, engaged, g_ch):
    g_off = 1.0 / p.r_off
    for s in range(6):
        g_ch[s] = 1.0 / p.r_on if gate[s] else g_off
    if engaged:
        g_ch[0] = 1.0 / p.r_on_startup
        g_ch[4] = 1.0 / p.r_on_startup


@numba.njit(cache=True)
def _trial(p, h, t, emf, i_ph, v_dda, v_cout, diode_in, g_ch, g_gndc, i_draw, desired_in,
           engaged_in, mode, latched, established, phi_c,
           V, diode_out, i_out, desired_out, A, b):
    """Network step of length h; returns -1 on failure, 1 if any discrete
    signature (diodes, comparator outputs, start-up engagement) changed."""
    _emf(p.v_ll_peak, p.freq, p.phase0, t + h, emf)
    for s in range(6):
        diode_out[s] = diode_in[s]
    n_it = ps._solve_step(h, emf, i_ph, v_dda, v_cout, g_ch, diode_out, g_gndc, p.g_load, i_draw,
                          p.r_phase, p.l_phase, p.body_vf, p.body_rd, p.c_vdda, p.c_out, V, A, b)
    if n_it < 0:
        return -1
    ps._phase_currents(h, emf, i_ph, V, p.r_phase, p.l_phase, i_out)
    if mode == 2:
        ctl._comparator_desired(V[ps.VDDA], V[0:3], V[ps.VDDA], 0.0, p.v_supply_min, p.hysteresis,
                                desired_in, desired_out)
    else:
        for s in range(6):
            desired_out[s] = False
    eng = False
    if p.startup_enabled > 0.5 and mode != 2:
        eng = ctl._engage(latched, established, phi_c, V[ps.A2], p.v_th_m4, emf[0] - emf[1], p.u12_min)
    changed = eng != engaged_in
    for s in range(6):
        if diode_out[s] != diode_in[s] or desired_out[s] != desired_in[s]:
            changed = True
    return 1 if changed else 0


@numba.njit(cache=True)
def _stored(p, i_ph, v_dda, v_cout, bs):
    e = 0.5 * p.l_phase * (i_ph[0] ** 2 + i_ph[1] ** 2 + i_ph[2] ** 2)
    e += 0.5 * p.c_vdda * v_dda * v_dda + 0.5 * p.c_out * v_cout * v_cout
    if p.boost_enabled > 0.5:
        e += 0.5 * p.l_boost * bs[bst.B_IL] ** 2 + 0.5 * p.c_boost * bs[bst.B_VOUT] ** 2
    return e


@numba.njit(cache=True)
def _record(out, r, t, p, emf, i_ph, V, v_dda, v_cout, bs, mode, engaged, gate, g_gndc, i_ref,
            c1st, acc, bacc, i_draw):
    out[r, 0] = t
    for k in range(3):
        out[r, 1 + k] = emf[k]
        out[r, 4 + k] = i_ph[k]
        out[r, 7 + k] = V[k]
    out[r, 10] = v_dda
    out[r, 11] = v_cout
    out[r, 12] = V[ps.GNDC]
    out[r, 13] = bs[bst.B_VOUT]
    out[r, 14] = bs[bst.B_IL]
    out[r, 15] = bs[bst.B_MODE]
    out[r, 16] = mode
    out[r, 17] = 1.0 if engaged else 0.0
    for s in range(6):
        g = 1.0 if gate[s] else 0.0
        if engaged and (s == 0 or s == 4):
            g = 2.0
        out[r, 18 + s] = g
    out[r, 24] = g_gndc
    out[r, 25] = i_ref
    out[r, 26] = c1st[0]
    out[r, 27] = c1st[1]
    out[r, 28] = c1st[3]
    for k in range(ps.N_NET_ACC):
        out[r, 29 + k] = acc[k]
    for k in range(bst.N_BACC):
        out[r, 36 + k] = bacc[k]
    out[r, 41] = _stored(p, i_ph, v_dda, v_cout, bs)
    out[r, 42] = i_draw
    out[r, 43] = bs[bst.B_ON_TIME]
    out[r, 44] = bs[bst.B_SW_TIME]


@numba.njit(cache=True)
def _simulate(p, out, info):
    dt = p.dt
    t_end = p.t_end
    emf = np.zeros(3)
    i_ph = np.zeros(3)
    v_dda = 0.0
    v_cout = 0.0
    V = np.zeros(ps.N_NODES)
    diode = np.zeros(6, dtype=np.bool_)
    gate = np.zeros(6, dtype=np.bool_)
    desired = np.zeros(6, dtype=np.bool_)
    pend_t = np.full(6, np.inf)
    pend_v = np.zeros(6, dtype=np.bool_)
    off_since = np.full(6, -np.inf)
    engaged = False
    mode = 0
    i_ref = 0.0
    c1st = np.zeros(4)
    activated_at = -1.0
    if p.gndc_enabled < 0.5:
        activated_at = 0.0
    bs = np.zeros(bst.N_BSTATE)
    bs[bst.B_MODE] = 2.0
    bacc = np.zeros(bst.N_BACC)
    acc = np.zeros(ps.N_NET_ACC)
    i_draw = 0.0
    power_good = False

    # scratch
    g_ch = np.zeros(6)
    V_t = np.zeros(ps.N_NODES)
    d_t = np.zeros(6, dtype=np.bool_)
    i_t = np.zeros(3)
    des_t = np.zeros(6, dtype=np.bool_)
    A = np.zeros((ps.N_NODES, ps.N_NODES))
    b = np.zeros(ps.N_NODES)

    info[I_STATUS] = STATUS_OK
    info[I_T_ENGAGE] = -1.0
    info[I_T_ACTIVE] = -1.0
    info[I_T_LATCH] = -1.0
    n_rec = 0
    cap = out.shape[0]
    t = 0.0
    if t_end > 0.0:
        _emf(p.v_ll_peak, p.freq, p.phase0, 0.0, emf)
        g0 = ctl._gndc_g(activated_at, p.ramp_duration, p.g_max, 0.0)
        _record(out, 0, 0.0, p, emf, i_ph, V, v_dda, v_cout, bs, mode, engaged, gate, g0, i_ref,
                c1st, acc, bacc, i_draw)
        n_rec = 1
    next_rec = p.record_interval
    n_steps = 0
    n_events = 0

    while t < t_end - 1e-6 * p.event_tol:
        h = min(dt, t_end - t)
        for s in range(6):
            if pend_t[s] < np.inf and pend_t[s] - t < h:
                h = max(pend_t[s] - t, 1e-3 * p.event_tol)
        established = i_ref >= p.established_fraction * p.i_ref_target
        latched = c1st[3] > 0.5
        g_gndc = ctl._gndc_g(activated_at, p.ramp_duration, p.g_max, t) + p.g_floor
        _channel_g(p, gate, engaged, g_ch)

        res = _trial(p, h, t, emf, i_ph, v_dda, v_cout, diode, g_ch, g_gndc, i_draw, desired,
                     engaged, mode, latched, established, c1st[1], V_t, d_t, i_t, des_t, A, b)
        while res < 0:
            h *= 0.5
            if h < 1e-6 * p.event_tol:
                info[I_STATUS] = STATUS_STEP_FAILURE
                info[I_T_FAIL] = t
                info[I_N_REC] = n_rec
                return
            res = _trial(p, h, t, emf, i_ph, v_dda, v_cout, diode, g_ch, g_gndc, i_draw, desired,
                         engaged, mode, latched, established, c1st[1], V_t, d_t, i_t, des_t, A, b)
        if res == 1 and h > p.event_tol:
            # bisect to the first instant the discrete signature differs
            lo = 0.0
            hi = h
            while hi - lo > p.event_tol:
                mid = 0.5 * (lo + hi)
                r2 = _trial(p, mid, t, emf, i_ph, v_dda, v_cout, diode, g_ch, g_gndc, i_draw,
                            desired, engaged, mode, latched, established, c1st[1], V_t, d_t, i_t,
                            des_t, A, b)
                if r2 == 0:
                    lo = mid
                else:
                    hi = mid
            h = hi
            res = _trial(p, h, t, emf, i_ph, v_dda, v_cout, diode, g_ch, g_gndc, i_draw, desired,
                         engaged, mode, latched, established, c1st[1], V_t, d_t, i_t, des_t, A, b)
            if res < 0:
                info[I_STATUS] = STATUS_STEP_FAILURE
                info[I_T_FAIL] = t
                info[I_N_REC] = n_rec
                return
            n_events += 1

        # ---- commit network step
        ps._accumulate_energy(acc, h, emf, i_t, V_t, g_ch, d_t, g_gndc, p.g_load, i_draw,
                              p.r_phase, p.body_vf, p.body_rd)
        dv_dda = V_t[ps.VDDA] - v_dda
        for k in range(ps.N_NODES):
            V[k] = V_t[k]
        for k in range(3):
            i_ph[k] = i_t[k]
        for s in range(6):
            diode[s] = d_t[s]
        v_dda = V[ps.VDDA]
        v_cout = V[ps.VDDA] - V[ps.GNDC]
        t = t + h
        n_steps += 1

        if p.boost_enabled > 0.5:
            # rectifier power-good drives the boost shutdown input
            power_good = ctl._power_good(power_good, mode == 2, v_dda, p.pg_on, p.pg_off)
            v_in_min = p.v_in_min if power_good else np.inf
            i_draw = bst._boost_advance(bs, bacc, h, v_cout, p.g_load_boost, p.l_boost, p.c_boost,
                                        p.f_sw, p.v_out_set, v_in_min, p.i_quiescent, p.r_switch,
                                        p.r_diode_eq, p.v_band, p.i_peak_max, p.d_max,
                                        p.e_switching)

        # ---- control
        mode_prev = mode
        engaged_prev = engaged
        i_ref = ctl._reference_update(i_ref, p.i_ref_target, p.tau_establish, v_dda,
                                      p.v_supply_min, h)
        established = i_ref >= p.established_fraction * p.i_ref_target
        phi_min = min(V[0], min(V[1], V[2]))
        phi_max = max(V[0], max(V[1], V[2]))
        phi_mean = (V[0] + V[1] + V[2]) / 3.0
        was_latched = c1st[3] > 0.5
        ctl._c1_update(c1st, dv_dda, v_dda, phi_min, phi_max, phi_mean, established, h, p.c1,
                       p.r_leak, p.i_charge)
        if c1st[3] > 0.5 and not was_latched:
            info[I_T_LATCH] = t
        if mode != 2 and v_dda >= p.v_supply_min and established:
            mode = 2
            info[I_T_ACTIVE] = t
            if activated_at < 0.0:
                activated_at = t
        engaged = False
        if p.startup_enabled > 0.5 and mode != 2:
            engaged = ctl._engage(c1st[3] > 0.5, established, c1st[1], V[ps.A2], p.v_th_m4,
                                  emf[0] - emf[1], p.u12_min)
        if mode != 2:
            mode = 1 if engaged else 0
        if engaged and info[I_T_ENGAGE] < 0.0:
            info[I_T_ENGAGE] = t

        # ---- comparator outputs and delayed gate commands
        if mode == 2:
            ctl._comparator_desired(v_dda, V[0:3], v_dda, 0.0, p.v_supply_min, p.hysteresis,
                                    desired, des_t)
            for s in range(6):
                desired[s] = des_t[s]
        for s in range(6):
            if desired[s] != gate[s]:
                if pend_t[s] == np.inf or pend_v[s] != desired[s]:
                    pend_t[s] = t + p.prop_delay
                    pend_v[s] = desired[s]
            else:
                pend_t[s] = np.inf
        # turn-offs first, then turn-ons with one step of dead time
        for s in range(6):
            if pend_t[s] <= t + 1e-6 * p.event_tol and not pend_v[s]:
                gate[s] = False
                off_since[s] = t
                pend_t[s] = np.inf
        for s in range(6):
            if pend_t[s] <= t + 1e-6 * p.event_tol and pend_v[s]:
                c = s + 3 if s < 3 else s - 3
                if gate[c]:
                    pend_t[s] = t + dt
                elif t - off_since[c] < dt * (1.0 - 1e-9):
                    pend_t[s] = off_since[c] + dt
                else:
                    gate[s] = True
                    pend_t[s] = np.inf

        for k in range(3):
            hi = gate[k] or (engaged and k == 0)
            lo = gate[k + 3] or (engaged and k == 1)
            if hi and lo:
                info[I_N_OVERLAP] += 1.0

        due = t >= next_rec - 1e-6 * p.event_tol or t >= t_end - 1e-6 * p.event_tol
        if not due and (mode != mode_prev or engaged != engaged_prev):
            # keep mode transitions exact in the trace while room remains
            due = n_rec + (t_end - t) / p.record_interval + 3.0 < cap
        if due:
            if n_rec < cap:
                g_rec = ctl._gndc_g(activated_at, p.ramp_duration, p.g_max, t)
                _record(out, n_rec, t, p, emf, i_ph, V, v_dda, v_cout, bs, mode, engaged, gate,
                        g_rec, i_ref, c1st, acc, bacc, i_draw)
                n_rec += 1
            while next_rec <= t + 1e-6 * p.event_tol:
                next_rec += p.record_interval

    info[I_N_STEPS] = n_steps
    info[I_N_EVENTS] = n_events
    info[I_N_REC] = n_rec
    info[I_T_END] = t


# ---------------------------------------------------------------------------
# public operations

EXTRA_RECORDS = 4096

# substrate leakage from gndc to ground while the sequencer holds it open
G_GNDC_FLOOR = 1e-9


def kernel_params(scenario) -> KParams:
    """Flatten a Scenario into the compiled loop's parameter record."""
    s = scenario
    src, sw, cmp_, su, ref, gq, bp, ec = (s.source, s.switch, s.comparator, s.startup, s.reference,
                                          s.gndc, s.boost, s.engine)
    g_ext = 0.0 if math.isinf(s.r_load) else 1.0 / s.r_load
    return KParams(
        float(src.v_ll_peak), float(src.freq), float(src.phase0), float(src.r_phase), float(src.l_phase),
        float(sw.r_on), float(sw.r_off), float(sw.body_vf), float(sw.body_rd), float(sw.r_on_startup),
        float(s.c_vdda), float(s.c_out), 0.0 if s.boost_enabled else g_ext,
        float(cmp_.v_supply_min), float(cmp_.hysteresis), float(cmp_.prop_delay),
        1.0 if s.startup_circuit_enabled else 0.0, float(su.v_th_m4), float(su.u12_min), float(su.c1),
        float(su.r_leak), float(su.i_charge),
        float(ref.i_ref_target), float(ref.tau_establish), float(ref.established_fraction),
        1.0 if s.gndc_sequencer_enabled else 0.0,
        # without the sequencer c_out is tied to ground from the start
        float(gq.ramp_duration) if s.gndc_sequencer_enabled else 0.0, float(gq.g_max), G_GNDC_FLOOR,
        1.0 if s.boost_enabled else 0.0, float(bp.l_boost), float(bp.c_out), float(bp.f_sw),
        float(bp.v_out_set), float(bp.v_in_min), float(bp.i_quiescent), float(bp.r_switch),
        float(bp.r_diode_eq), float(bp.band), float(bp.i_peak_max), float(bp.d_max),
        float(bp.e_switching),
        g_ext if s.boost_enabled else 0.0, float(s.power_good.v_on), float(s.power_good.v_off),
        float(ec.dt), float(ec.t_end), float(ec.event_tol), float(ec.dt * ec.record_decimation),
    )


@dataclass(frozen=True)
class RunInfo:
    """Discrete milestones of a run (times in seconds, None when never reached)."""

    t_first_engage: float | None
    t_active: float | None
    t_latch: float | None
    n_steps: int
    n_events: int
    # steps on which both switches of one leg were driven on (shoot-through)
    n_shoot_through: int = 0


def _opt(x):
    return None if x < 0 else float(x)


def simulate(scenario) -> tuple[Trace, RunInfo]:
    """Advance the chain from cold start to ``engine.t_end``.

    Raises RunError (with the failure time and the last recorded state) if a
    step cannot be solved even after repeated halving.
    """
    from .topology import require_simulatable

    require_simulatable(scenario.topology_tag)
    p = kernel_params(scenario)
    ec = scenario.engine
    cap = 0 if ec.t_end <= 0 else int(math.ceil(ec.t_end / (ec.dt * ec.record_decimation))) + 2 + EXTRA_RECORDS
    out = np.zeros((cap, N_COLS))
    info = np.zeros(N_INFO)
    _simulate(p, out, info)
    n = int(info[I_N_REC])
    out = out[:n]
    trace = Trace(out[:, 0].copy(), {name: out[:, 1 + k].copy() for k, name in enumerate(CHANNELS)})
    if info[I_STATUS] != STATUS_OK:
        last = {name: float(trace[name][-1]) for name in ("v_dda", "v_cout", "mode", "boost_v_out")} if n else {}
        raise RunError(f"step failure at t = {info[I_T_FAIL]:.9e} s; last recorded state {last}")
    return trace, RunInfo(_opt(info[I_T_ENGAGE]), _opt(info[I_T_ACTIVE]), _opt(info[I_T_LATCH]),
                          int(info[I_N_STEPS]), int(info[I_N_EVENTS]), int(info[I_N_OVERLAP]))


def run(scenario, window=None):
    """Simulate ``scenario`` and summarise it; returns ``(Trace, RunSummary)``."""
    from .report import summarize

    trace, info = simulate(scenario)
    return trace, summarize(trace, info, scenario, window)


def locate_event(predicate, t0: float, t1: float, tol: float = 1e-9) -> float:
    """Bisect the instant where ``predicate(t)`` changes truth value in [t0, t1].

    Returns a time within ``tol`` after the change (the first sampled instant
    with the new value).
    """
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    p0 = bool(predicate(t0))
    if bool(predicate(t1)) == p0:
        raise ValueError("predicate does not change across the bracket")
    lo, hi = t0, t1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bool(predicate(mid)) == p0:
            lo = mid
        else:
            hi = mid
    return hi


def startup_duration(trace: Trace) -> float:
    """Time from the first start-up engagement to the ACTIVE transition."""
    if len(trace) == 0:
        raise MeasurementError("empty trace")
    mode = trace["mode"]
    active = np.nonzero(mode == Mode.ACTIVE)[0]
    engaged = np.nonzero(trace["engaged"] > 0.5)[0]
    if len(active) == 0:
        raise MeasurementError("no transition to ACTIVE in trace")
    if len(engaged) == 0 or engaged[0] > active[0]:
        raise MeasurementError("start-up circuit never engaged before ACTIVE")
    return float(trace.time[active[0]] - trace.time[engaged[0]])
