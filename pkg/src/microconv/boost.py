"""Behavioral PFM boost regulator (MAX1676-class second stage).

Fixed-frequency switching is gated on and off by a hysteretic band around the
output setpoint. In each switching period the on-time follows the loss-adjusted
steady-state boost relation evaluated at the setpoint, so the inductor current
ramps up while the output is low and collapses to discontinuous pulses near
regulation. The rectifying path is a diode equivalent (inductor current never
reverses). The input port always draws the quiescent current.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .trace import Trace


class BoostMode(enum.IntEnum):
    IDLE = 0
    SWITCHING = 1
    UNDERVOLTAGE = 2


# kernel state slots
B_IL, B_VOUT, B_MODE, B_DUTY, B_ON_END, B_NEXT_PERIOD, B_T, B_ON_TIME, B_SW_TIME, B_PULSES = range(10)
N_BSTATE = 10
# kernel energy slots
BE_IN, BE_OUT, BE_LOSS_SW, BE_LOSS_DIODE, BE_LOSS_Q = range(5)
N_BACC = 5

_EPS_T = 1e-15


@dataclass(frozen=True)
class BoostParams:
    l_boost: float = 22e-6
    c_out: float = 47e-6
    f_sw: float = 500e3
    v_out_set: float = 5.0
    v_in_min: float = 0.8
    i_quiescent: float = 16e-6
    r_switch: float = 0.3
    r_diode_eq: float = 0.4
    # None -> 1 % of the setpoint
    v_band: float | None = None
    i_peak_max: float = 1.0
    d_max: float = 0.9
    # energy lost per switching cycle (gate charge, transition overlap), J
    e_switching: float = 60e-9

    def __post_init__(self):
        if not 2.0 <= self.v_out_set <= 5.5:
            raise ValueError(f"v_out_set must lie in [2, 5.5] V, got {self.v_out_set}")
        for name in ("l_boost", "c_out", "f_sw", "i_peak_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.r_switch < 0 or self.r_diode_eq < 0 or self.i_quiescent < 0 or self.e_switching < 0:
            raise ValueError("loss parameters must be >= 0")
        if self.v_band is not None and self.v_band < 0:
            raise ValueError("v_band must be >= 0")
        if not 0 < self.d_max < 1:
            raise ValueError("d_max must lie in (0, 1)")

    @property
    def band(self) -> float:
        return 0.01 * self.v_out_set if self.v_band is None else self.v_band

    @property
    def period(self) -> float:
        return 1.0 / self.f_sw


@dataclass
class BoostState:
    i_l: float = 0.0
    v_out: float = 0.0
    mode: BoostMode = BoostMode.UNDERVOLTAGE
    t: float = 0.0
    duty: float = 0.0
    on_end: float = 0.0
    next_period: float = 0.0
    on_time: float = 0.0
    switching_time: float = 0.0
    pulses: int = 0
    energy: np.ndarray = field(default_factory=lambda: np.zeros(N_BACC))

    def to_array(self) -> np.ndarray:
        a = np.zeros(N_BSTATE)
        a[B_IL], a[B_VOUT], a[B_MODE] = self.i_l, self.v_out, int(self.mode)
        a[B_DUTY], a[B_ON_END], a[B_NEXT_PERIOD], a[B_T] = self.duty, self.on_end, self.next_period, self.t
        a[B_ON_TIME], a[B_SW_TIME], a[B_PULSES] = self.on_time, self.switching_time, self.pulses
        return a

    @classmethod
    def from_array(cls, a: np.ndarray, energy: np.ndarray) -> "BoostState":
        return cls(i_l=float(a[B_IL]), v_out=float(a[B_VOUT]), mode=BoostMode(int(a[B_MODE])),
                   t=float(a[B_T]), duty=float(a[B_DUTY]), on_end=float(a[B_ON_END]),
                   next_period=float(a[B_NEXT_PERIOD]), on_time=float(a[B_ON_TIME]),
                   switching_time=float(a[B_SW_TIME]), pulses=int(a[B_PULSES]), energy=energy.copy())

    @property
    def effective_duty(self) -> float:
        return self.on_time / self.switching_time if self.switching_time > 0 else 0.0


def stored_energy(p: BoostParams, s: BoostState) -> float:
    return 0.5 * p.l_boost * s.i_l ** 2 + 0.5 * p.c_out * s.v_out ** 2


# ---------------------------------------------------------------------------
# compiled kernel


@numba.njit(cache=True)
def _duty(v_target, v_in, i, r_sw, r_d, d_max):
    den = v_target - i * (r_sw - r_d)
    if den <= 0.0:
        return d_max
    d = (v_target + i * r_d - v_in) / den
    if d < 0.0:
        return 0.0
    if d > d_max:
        return d_max
    return d


@numba.njit(cache=True)
def _off_phase(i0, v0, v_in, tau, L, C, g_load, r_d):
    # trapezoidal step of the diode-conducting interval, 2x2 solve
    a11 = L / tau + 0.5 * r_d
    a12 = 0.5
    a21 = -0.5
    a22 = C / tau + 0.5 * g_load
    r1 = v_in + (L / tau - 0.5 * r_d) * i0 - 0.5 * v0
    r2 = 0.5 * i0 + (C / tau - 0.5 * g_load) * v0
    det = a11 * a22 - a12 * a21
    i1 = (r1 * a22 - a12 * r2) / det
    v1 = (a11 * r2 - a21 * r1) / det
    return i1, v1


@numba.njit(cache=True)
def _decay(v0, tau, g_load, C):
    b = 0.5 * tau * g_load / C
    return v0 * (1.0 - b) / (1.0 + b)


@numba.njit(cache=True)
def _boost_advance(bs, acc, h, v_in, g_load, L, C, f_sw, v_set, v_in_min, i_q, r_sw, r_d,
                   v_band, i_pk, d_max, e_sw):
    """Advance the boost by ``h`` from time ``bs[B_T]``; returns the mean input
    current drawn over the interval (inductor, quiescent and switching).

    Sub-intervals are split at period boundaries, at the end of the on-time and
    where the diode stops conducting, and integrated with the trapezoidal rule.
    Energies use the midpoint values, so the discrete balance
    ``E_in = E_out + losses + dE_stored`` holds to rounding.
    """
    T = 1.0 / f_sw
    t = bs[B_T]
    t_end = t + h
    i_int = 0.0
    if v_in < v_in_min:
        # bias circuits starve below the lockout: draw falls off ohmically
        i_q = i_q * max(v_in, 0.0) / v_in_min if v_in_min > 0.0 else 0.0
    while t < t_end - _EPS_T:
        mode = int(bs[B_MODE])
        if t >= bs[B_NEXT_PERIOD] - _EPS_T:
            # period boundary: hysteretic PFM decision
            k_start = bs[B_NEXT_PERIOD]
            bs[B_NEXT_PERIOD] = k_start + T
            v_out = bs[B_VOUT]
            if v_in < v_in_min:
                mode = 2
            elif v_out < v_set - v_band:
                mode = 1
            elif v_out > v_set + v_band:
                mode = 0
            elif mode == 2:
                mode = 0
            if mode == 1:
                d = _duty(v_set, v_in, bs[B_IL], r_sw, r_d, d_max)
                bs[B_DUTY] = d
                bs[B_ON_END] = k_start + d * T
                if d > 0.0:
                    bs[B_PULSES] += 1.0
            else:
                bs[B_DUTY] = 0.0
                bs[B_ON_END] = k_start
        if v_in < v_in_min:
            mode = 2
            bs[B_ON_END] = t
        bs[B_MODE] = mode
        t_next = min(t_end, bs[B_NEXT_PERIOD])
        on = mode == 1 and t < bs[B_ON_END] - _EPS_T
        if on:
            t_next = min(t_next, bs[B_ON_END])
        tau = t_next - t
        if tau <= 0.0:
            tau = _EPS_T
            t_next = t + tau
        i0 = bs[B_IL]
        v0 = bs[B_VOUT]
        if on:
            a = 0.5 * tau * r_sw / L
            i1 = (i0 * (1.0 - a) + tau * v_in / L) / (1.0 + a)
            if i1 > i_pk and i0 < i_pk:
                # peak-current clamp ends the on-time early
                tau = L * (i_pk - i0) / (v_in - 0.5 * r_sw * (i0 + i_pk))
                t_next = t + tau
                i1 = i_pk
                bs[B_ON_END] = t_next
            elif i0 >= i_pk:
                bs[B_ON_END] = t
                continue
            v1 = _decay(v0, tau, g_load, C)
            i_m = 0.5 * (i0 + i1)
            acc[BE_LOSS_SW] += r_sw * i_m * i_m * tau
            bs[B_ON_TIME] += tau
        else:
            i1, v1 = _off_phase(i0, v0, v_in, tau, L, C, g_load, r_d)
            if i1 < 0.0:
                if i0 > 1e-15:
                    # diode stops conducting inside the interval: bracketed
                    # false position (Illinois) on tau
                    ta, fa = 0.0, i0
                    tb, fb = tau, i1
                    tc = tau
                    side = 0
                    for _ in range(100):
                        tc = max((ta * fb - tb * fa) / (fb - fa), 1e-30)
                        ic, vc = _off_phase(i0, v0, v_in, tc, L, C, g_load, r_d)
                        if abs(ic) <= 1e-12 * i0:
                            break
                        if ic > 0.0:
                            ta, fa = tc, ic
                            if side == 1:
                                fb *= 0.5
                            side = 1
                        else:
                            tb, fb = tc, ic
                            if side == -1:
                                fa *= 0.5
                            side = -1
                    tau = tc
                    t_next = t + tau
                    i1, v1 = _off_phase(i0, v0, v_in, tau, L, C, g_load, r_d)
                else:
                    i1 = 0.0
                    v1 = _decay(v0, tau, g_load, C)
            i_m = 0.5 * (i0 + i1)
            acc[BE_LOSS_DIODE] += r_d * i_m * i_m * tau
            if i1 < 0.0:
                i1 = 0.0
        v_m = 0.5 * (v0 + v1)
        i_sw = 0.0
        if mode == 1 and bs[B_DUTY] > 0.0 and v_in > 0.0:
            # gate drive and transition losses, drawn evenly over the switching period
            i_sw = e_sw * f_sw / v_in
            acc[BE_LOSS_SW] += e_sw * f_sw * tau
        acc[BE_IN] += v_in * (i_m + i_q + i_sw) * tau
        acc[BE_OUT] += g_load * v_m * v_m * tau
        acc[BE_LOSS_Q] += v_in * i_q * tau
        if mode == 1:
            bs[B_SW_TIME] += tau
        i_int += (i_m + i_sw) * tau
        bs[B_IL] = i1
        bs[B_VOUT] = v1
        t = t_next
    bs[B_T] = t_end
    return i_int / h + i_q


# ---------------------------------------------------------------------------
# public operations


def _kernel_args(p: BoostParams, r_load: float):
    g_load = 0.0 if math.isinf(r_load) else 1.0 / r_load
    return (g_load, p.l_boost, p.c_out, p.f_sw, p.v_out_set, p.v_in_min, p.i_quiescent,
            p.r_switch, p.r_diode_eq, p.band, p.i_peak_max, p.d_max, p.e_switching)


def boost_step(p: BoostParams, s: BoostState, v_in: float, r_load: float, dt: float) -> BoostState:
    """Advance the boost by ``dt`` at input voltage ``v_in`` into ``r_load``
    (``math.inf`` for no load)."""
    if not r_load > 0:
        raise ValueError(f"r_load must be > 0, got {r_load}")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if dt > p.period / 20 * (1 + 1e-9):
        raise ValueError(f"dt must be <= 1/(20 f_sw) = {p.period / 20:g} s")
    bs = s.to_array()
    acc = s.energy.copy()
    _boost_advance(bs, acc, dt, float(v_in), *_kernel_args(p, r_load))
    return BoostState.from_array(bs, acc)


@numba.njit(cache=True)
def _boost_run(bs, acc, n_steps, dt, decim, v_in, g_load, L, C, f_sw, v_set, v_in_min, i_q, r_sw,
               r_d, v_band, i_pk, d_max, e_sw, out):
    n_rec = 0
    for n in range(n_steps):
        _boost_advance(bs, acc, dt, v_in, g_load, L, C, f_sw, v_set, v_in_min, i_q, r_sw, r_d,
                       v_band, i_pk, d_max, e_sw)
        if (n + 1) % decim == 0:
            out[n_rec, 0] = bs[B_T]
            out[n_rec, 1] = bs[B_IL]
            out[n_rec, 2] = bs[B_VOUT]
            out[n_rec, 3] = bs[B_MODE]
            out[n_rec, 4] = acc[BE_IN]
            out[n_rec, 5] = acc[BE_OUT]
            out[n_rec, 6] = acc[BE_LOSS_SW] + acc[BE_LOSS_DIODE] + acc[BE_LOSS_Q]
            out[n_rec, 7] = bs[B_ON_TIME]
            out[n_rec, 8] = bs[B_SW_TIME]
            n_rec += 1
    return n_rec


BOOST_CHANNELS = ("boost_i_l", "boost_v_out", "boost_mode", "e_boost_in", "e_boost_out",
                  "e_boost_loss", "boost_on_time", "boost_switching_time")


def simulate_boost(p: BoostParams, v_in: float, r_load: float, t_end: float, dt: float = 10e-9,
                   state: BoostState | None = None, record_decimation: int = 1) -> tuple[Trace, BoostState]:
    """Run the boost alone from an ideal DC input; returns its trace and final state."""
    if not r_load > 0:
        raise ValueError(f"r_load must be > 0, got {r_load}")
    s = BoostState() if state is None else state
    bs = s.to_array()
    acc = s.energy.copy()
    n_steps = int(round(t_end / dt))
    out = np.zeros((n_steps // record_decimation + 1, 9))
    n = _boost_run(bs, acc, n_steps, dt, record_decimation, float(v_in), *_kernel_args(p, r_load), out)
    out = out[:n]
    channels = {name: out[:, k + 1] for k, name in enumerate(BOOST_CHANNELS)}
    return Trace(out[:, 0], channels), BoostState.from_array(bs, acc)


class UndefinedEfficiencyError(ArithmeticError):
    pass


def burst_aligned_window(trace: Trace, t_start: float, t_stop: float) -> tuple[float, float]:
    """Narrow ``[t_start, t_stop]`` so that both ends carry the same stored energy.

    Uses the first and last PFM burst start inside the window when there are at
    least two; otherwise (continuous switching) the first and last upward
    crossing of the median output voltage. The window is returned unchanged
    when neither is available.
    """
    m = trace["boost_mode"]
    starts = np.nonzero((m[1:] == BoostMode.SWITCHING) & (m[:-1] != BoostMode.SWITCHING))[0] + 1
    ts = trace.time[starts]
    ts = ts[(ts >= t_start) & (ts <= t_stop)]
    if len(ts) >= 2:
        return float(ts[0]), float(ts[-1])
    inside = (trace.time >= t_start) & (trace.time <= t_stop)
    t, v = trace.time[inside], trace["boost_v_out"][inside]
    if len(v) >= 3:
        level = float(np.median(v))
        up = np.nonzero((v[:-1] < level) & (v[1:] >= level))[0] + 1
        if len(up) >= 2 and t[up[-1]] > t[up[0]]:
            return float(t[up[0]]), float(t[up[-1]])
    return t_start, t_stop


def boost_efficiency(trace: Trace, t_start: float | None = None, t_stop: float | None = None,
                     align_bursts: bool = True) -> float:
    """Output over input energy of the boost stage within ``[t_start, t_stop]``."""
    if align_bursts and len(trace):
        a = trace.time[0] if t_start is None else t_start
        b = trace.time[-1] if t_stop is None else t_stop
        t_start, t_stop = burst_aligned_window(trace, a, b)
    w = trace.window(t_start, t_stop)
    e_in = w.delta("e_boost_in")
    if e_in <= 0:
        raise UndefinedEfficiencyError("boost input energy is zero over the window")
    return w.delta("e_boost_out") / e_in


def effective_duty(trace: Trace, t_start: float | None = None, t_stop: float | None = None) -> float:
    w = trace.window(t_start, t_stop)
    sw = w.delta("boost_switching_time")
    return w.delta("boost_on_time") / sw if sw > 0 else 0.0
