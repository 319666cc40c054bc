"""Rectifier control: comparator drive, autonomous start-up circuit, bias
reference and the progressive gndc connection."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np


class Mode(enum.IntEnum):
    IDLE = 0  # body diodes only
    SYNC_STARTUP = 1  # P1/N2 driven by the start-up circuit
    ACTIVE = 2  # comparator drive


@dataclass(frozen=True)
class ComparatorBank:
    v_supply_min: float = 1.0
    hysteresis: float = 5e-3
    prop_delay: float = 100e-9

    def __post_init__(self):
        if self.v_supply_min < 0 or self.hysteresis < 0 or self.prop_delay < 0:
            raise ValueError("comparator parameters must be >= 0")


@dataclass(frozen=True)
class StartupCircuit:
    """Element values of the start-up circuit (C1, M7 charge path, leakage)."""

    v_th_m4: float = 0.5
    u12_min: float = 1.0
    c1: float = 100e-12
    r_leak: float = 100e6
    i_charge: float = 2e-6

    def __post_init__(self):
        if not self.c1 > 0:
            raise ValueError("c1 must be > 0")
        if self.r_leak <= 0 or self.i_charge < 0:
            raise ValueError("r_leak must be > 0 and i_charge >= 0")


@dataclass(frozen=True)
class StartupCircuitState:
    engaged: bool = False
    latched_off: bool = False
    v_c1: float = 0.0
    phi_c: float = 0.0
    v_th_m4: float = 0.5
    # set once the reference is established; M7 keeps charging C1 until the latch
    charging: bool = False


@dataclass(frozen=True)
class ReferenceGenerator:
    i_ref_target: float = 2e-6
    tau_establish: float = 2e-6
    i_ref: float = 0.0
    established_fraction: float = 0.9

    @property
    def established(self) -> bool:
        return self.i_ref >= self.established_fraction * self.i_ref_target


@dataclass(frozen=True)
class GndcSequencer:
    activated_at: Optional[float] = None
    ramp_duration: float = 200e-6
    g_max: float = 10.0

    def __post_init__(self):
        if self.ramp_duration < 0 or not self.g_max > 0:
            raise ValueError("ramp_duration must be >= 0 and g_max > 0")

    def activate(self, t: float) -> "GndcSequencer":
        if self.activated_at is not None:
            return self
        return replace(self, activated_at=t)


@dataclass(frozen=True)
class PowerGood:
    """Rectifier power-good output wired to the boost shutdown input.

    Asserted once the rectifier is ACTIVE and v_dda reaches ``v_on``; released
    when v_dda falls below ``v_off``. Keeps the boost from loading the rail
    while the comparators are not yet (or no longer) supplied.
    """

    v_on: float = 2.0
    v_off: float = 1.3

    def __post_init__(self):
        if not 0 <= self.v_off < self.v_on:
            raise ValueError("power-good thresholds need 0 <= v_off < v_on")


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True)
def _comparator_desired(v_dda, phi, v_pos, v_neg, v_min, hyst, prev, out):
    for s in range(6):
        out[s] = False
    if v_dda < v_min:
        return
    # strict comparisons: ties go to the lowest phase index
    kmax = 0
    kmin = 0
    for k in range(1, 3):
        if phi[k] > phi[kmax]:
            kmax = k
        if phi[k] < phi[kmin]:
            kmin = k
    d_hi = phi[kmax] - v_pos
    d_lo = v_neg - phi[kmin]
    on_hi = d_hi > hyst or (prev[kmax] and d_hi > -hyst)
    on_lo = kmin != kmax and (d_lo > hyst or (prev[3 + kmin] and d_lo > -hyst))
    if on_hi and on_lo and not prev[kmax] and not prev[3 + kmin]:
        # both sides leaving idle together: with the star point floating only the
        # stronger one is meaningful, the other is re-decided once it conducts
        if d_hi >= d_lo:
            on_lo = False
        else:
            on_hi = False
    out[kmax] = on_hi
    out[3 + kmin] = on_lo


@numba.njit(cache=True)
def _reference_update(i_ref, target, tau, v_dda, v_min, dt):
    a = math.exp(-dt / tau) if tau > 0 else 0.0
    if v_dda >= v_min:
        return target + (i_ref - target) * a
    return i_ref * a


@numba.njit(cache=True)
def _engage(latched, established, phi_c, phi_phase2, v_th_m4, u12, u12_min):
    return (not latched) and (not established) and (phi_c - phi_phase2 > v_th_m4) and (u12 >= u12_min)


@numba.njit(cache=True)
def _c1_update(st, dv_dda, v_dda, phi_min, phi_max, phi_mean, established, dt, c1, r_leak, i_charge):
    """st = [v_c1, phi_c, charging, latched] updated in place."""
    v_c1 = st[0]
    phi_c = st[1]
    charging = st[2] > 0.5
    latched = st[3] > 0.5
    if established and not latched:
        charging = True
    dv_c1 = 0.0
    if charging and not latched and v_c1 < v_dda:
        dv_c1 = min(i_charge * dt / c1, v_dda - v_c1)
    v_c1 += dv_c1
    # C1 hangs between the rail and the floating node
    phi_c += dv_dda - dv_c1
    phi_c += (phi_mean - phi_c) * (1.0 - math.exp(-dt / (r_leak * c1)))
    if phi_c > phi_max:
        phi_c = phi_max
    if phi_c < phi_min:
        phi_c = phi_min
    if charging and not latched and (phi_c <= 0.0 or v_c1 >= v_dda):
        latched = True
    st[0] = v_c1
    st[1] = phi_c
    st[2] = 1.0 if charging else 0.0
    st[3] = 1.0 if latched else 0.0


@numba.njit(cache=True)
def _power_good(pg, active, v_dda, v_on, v_off):
    if pg:
        return v_dda >= v_off
    return active and v_dda >= v_on


@numba.njit(cache=True)
def _gndc_g(activated_at, ramp, g_max, t):
    if activated_at < 0.0 or t < activated_at:
        return 0.0
    if ramp <= 0.0 or t >= activated_at + ramp:
        return g_max
    return g_max * (t - activated_at) / ramp


# ---------------------------------------------------------------------------
# public operations


def comparator_commands(bank: ComparatorBank, v_dda: float, phase_potentials, rail_potentials,
                        previous=None) -> tuple:
    """Gate commands ``(P1, P2, P3, N1, N2, N3)`` requested by the comparators.

    Only the phase at the highest potential may drive its high-side switch and
    only the lowest its low-side switch. A switch turns on when its forward
    bias exceeds ``hysteresis``; given ``previous`` commands, a switch that is
    already on stays on until the bias falls below ``-hysteresis``. The
    propagation delay is applied by the caller.
    """
    phi = np.asarray(phase_potentials, dtype=float)
    v_pos, v_neg = rail_potentials
    prev = np.zeros(6, dtype=np.bool_) if previous is None else np.asarray(previous, dtype=np.bool_)
    out = np.zeros(6, dtype=np.bool_)
    _comparator_desired(float(v_dda), phi, float(v_pos), float(v_neg), bank.v_supply_min,
                        bank.hysteresis, prev, out)
    return tuple(bool(x) for x in out)


def startup_engage_condition(s: StartupCircuitState, phi_phase2: float, ref: ReferenceGenerator,
                             u12: float, u12_min: float = 1.0) -> bool:
    """M3/M4 conduct (P1/N2 synchronously driven) while this holds."""
    return bool(_engage(s.latched_off, ref.established, s.phi_c, phi_phase2, s.v_th_m4, u12, u12_min))


def startup_release_condition(v_dda: float, ref: ReferenceGenerator, v_supply_min: float = 1.0) -> bool:
    return v_dda >= v_supply_min and ref.established


def c1_dynamics_step(s: StartupCircuitState, ref: ReferenceGenerator, v_dda: float, phase_potentials,
                     dt: float, circuit: StartupCircuit = StartupCircuit(),
                     v_dda_prev: Optional[float] = None) -> StartupCircuitState:
    """Advance C1 and its floating terminal by ``dt``.

    Before the reference is established C1 keeps its charge; the floating
    terminal only follows the rail and drifts through the leakage path toward
    the mean phase potential, never leaving the phase envelope. Afterwards M7
    charges C1 toward ``v_dda``; the start-up circuit latches off for good once
    the floating terminal reaches ground.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    phi = np.asarray(phase_potentials, dtype=float)
    dv = 0.0 if v_dda_prev is None else v_dda - v_dda_prev
    st = np.array([s.v_c1, s.phi_c, float(s.charging), float(s.latched_off)])
    _c1_update(st, dv, v_dda, float(phi.min()), float(phi.max()), float(phi.mean()),
               ref.established, dt, circuit.c1, circuit.r_leak, circuit.i_charge)
    latched = bool(st[3] > 0.5)
    return replace(s, v_c1=float(st[0]), phi_c=float(st[1]), charging=bool(st[2] > 0.5),
                   latched_off=latched, engaged=s.engaged and not latched)


def reference_step(ref: ReferenceGenerator, v_dda: float, dt: float,
                   v_supply_min: float = 1.0) -> ReferenceGenerator:
    """First-order settling of the bias current toward its target while the
    rail is above the comparator supply minimum, decay toward zero otherwise."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    i_new = _reference_update(ref.i_ref, ref.i_ref_target, ref.tau_establish, v_dda, v_supply_min, dt)
    return replace(ref, i_ref=float(i_new))


def gndc_conductance(seq: GndcSequencer, t: float) -> float:
    if t < 0:
        raise ValueError("t must be >= 0")
    act = -1.0 if seq.activated_at is None else seq.activated_at
    return float(_gndc_g(act, seq.ramp_duration, seq.g_max, t))


def power_good_step(pg: PowerGood, asserted: bool, mode: Mode, v_dda: float) -> bool:
    """Next power-good level given the current one, the rectifier mode and v_dda."""
    return bool(_power_good(bool(asserted), mode == Mode.ACTIVE, float(v_dda), pg.v_on, pg.v_off))
