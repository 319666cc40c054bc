"""Piecewise-linear network of the six-switch three-phase rectifier.

Nodes (ground is implicit)::

    a1, a2, a3   phase terminals (after the R-L phase impedance)
    n            generator star point
    vdda         rectified rail, decoupled to ground by ``c_vdda``
    gndc         return terminal of the bulk capacitor ``c_out`` (vdda-gndc)

High-side switch P_k sits between a_k and vdda (body diode a_k -> vdda), low-side
N_k between ground and a_k (body diode gnd -> a_k). The load, or the boost input,
is connected across the output port vdda-gndc; gndc reaches ground through the
sequenced conductance.

Capacitors and inductors use backward-Euler companion models; body diodes are
piecewise linear (``body_vf`` in series with ``body_rd``) and their conduction
pattern is resolved by fixed-point iteration each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

NODE_NAMES = ("a1", "a2", "a3", "n", "vdda", "gndc")
N_NODES = 6
A1, A2, A3, STAR, VDDA, GNDC = range(6)
GND = -1

SWITCH_NAMES = ("P1", "P2", "P3", "N1", "N2", "N3")
# (anode, cathode) of each switch's body diode; the channel shares the same nodes
SW_ANODE = np.array([A1, A2, A3, GND, GND, GND], dtype=np.int64)
SW_CATHODE = np.array([VDDA, VDDA, VDDA, A1, A2, A3], dtype=np.int64)

MAX_FIXED_POINT_ITER = 50
R_SERIES_FLOOR = 1e-9

# energy accumulator slots
E_SOURCE = 0
E_RECT_IN = 1
E_LOSS_PHASE = 2
E_LOSS_SWITCH = 3
E_LOSS_DIODE = 4
E_LOSS_GNDC = 5
E_RECT_OUT = 6
N_NET_ACC = 7


class SingularNetworkError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    """Diode conduction pattern did not settle within the iteration budget."""


@dataclass(frozen=True)
class SwitchModel:
    r_on: float = 1.0
    r_off: float = 10e6
    v_th: float = 0.5
    body_vf: float = 0.6
    body_rd: float = 10.0
    # channel resistance when the gate is pulled by the start-up circuit (weak drive)
    r_on_startup: float = 50.0

    def __post_init__(self):
        if not 0 < self.r_on < self.r_off:
            raise ValueError("need 0 < r_on < r_off")
        if self.body_vf < 0:
            raise ValueError("body_vf must be >= 0")
        if not self.body_rd > 0:
            raise ValueError("body_rd must be > 0")
        if not self.r_on_startup > 0:
            raise ValueError("r_on_startup must be > 0")


@dataclass(frozen=True)
class RectifierNetwork:
    """Element values of the rectifier; ``r_load=math.inf`` detaches the load."""

    switch: SwitchModel = field(default_factory=SwitchModel)
    r_phase: float = 1.0
    l_phase: float = 1.0e-6
    c_vdda: float = 10e-9
    c_out: float = 1e-6
    r_load: float = 24.0
    gndc_conductance: float = 10.0
    g_max: float = 10.0

    def __post_init__(self):
        if not self.c_out > 0:
            raise ValueError("c_out must be > 0")
        if not self.c_vdda > 0:
            raise ValueError("c_vdda must be > 0")
        if not self.r_load > 0:
            raise ValueError("r_load must be > 0")
        if not 0 <= self.gndc_conductance <= self.g_max:
            raise ValueError("gndc_conductance must lie in [0, g_max]")

    @property
    def g_load(self) -> float:
        return 0.0 if math.isinf(self.r_load) else 1.0 / self.r_load


@dataclass
class PowerStageState:
    i_phase: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_dda: float = 0.0
    v_cout: float = 0.0
    gate: tuple = (False,) * 6
    # gates of P1/N2 pulled by the start-up circuit instead of the comparators
    startup_drive: bool = False
    diode_on: np.ndarray = field(default_factory=lambda: np.zeros(6, dtype=np.bool_))
    potentials: np.ndarray = field(default_factory=lambda: np.zeros(N_NODES))
    energy: np.ndarray = field(default_factory=lambda: np.zeros(N_NET_ACC))

    def copy(self) -> "PowerStageState":
        return replace(
            self,
            i_phase=self.i_phase.copy(),
            diode_on=self.diode_on.copy(),
            potentials=self.potentials.copy(),
            energy=self.energy.copy(),
        )


@dataclass
class LinearSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    node_names: tuple = NODE_NAMES

    def solve(self) -> np.ndarray:
        x = np.zeros(len(self.rhs))
        bad = _gauss_solve(self.matrix.copy(), self.rhs.copy(), x)
        if bad >= 0:
            raise SingularNetworkError(f"singular nodal matrix: node '{self.node_names[bad]}' is floating")
        return x


# ---------------------------------------------------------------------------
# compiled kernels (shared with the engine loop)


@numba.njit(cache=True)
def _stamp_g(A, i, j, g):
    if i >= 0:
        A[i, i] += g
    if j >= 0:
        A[j, j] += g
    if i >= 0 and j >= 0:
        A[i, j] -= g
        A[j, i] -= g


@numba.njit(cache=True)
def _stamp_src(b, frm, to, current):
    # current source pushing `current` out of `frm` and into `to`
    if frm >= 0:
        b[frm] -= current
    if to >= 0:
        b[to] += current


@numba.njit(cache=True)
def _gauss_solve(A, b, x):
    """In-place Gaussian elimination with partial pivoting.

    Returns -1 on success, otherwise the column index whose pivot vanished.
    """
    n = b.shape[0]
    # a pivot this far below its node's self-conductance is roundoff of an exact zero
    diag = np.empty(n)
    for k in range(n):
        diag[k] = abs(A[k, k])
    for k in range(n):
        p = k
        best = abs(A[k, k])
        for r in range(k + 1, n):
            if abs(A[r, k]) > best:
                best = abs(A[r, k])
                p = r
        if best <= max(1e-15 * diag[k], 1e-300):
            return k
        if p != k:
            for c in range(n):
                tmp = A[k, c]
                A[k, c] = A[p, c]
                A[p, c] = tmp
            tmp = b[k]
            b[k] = b[p]
            b[p] = tmp
        for r in range(k + 1, n):
            f = A[r, k] / A[k, k]
            if f != 0.0:
                for c in range(k, n):
                    A[r, c] -= f * A[k, c]
                b[r] -= f * b[k]
    for k in range(n - 1, -1, -1):
        s = b[k]
        for c in range(k + 1, n):
            s -= A[k, c] * x[c]
        x[k] = s / A[k, k]
    return -1


@numba.njit(cache=True)
def _assemble(A, b, h, emf, i_ph, v_dda, v_cout, g_ch, diode_on, g_gndc, g_load, i_draw,
              r_phase, l_phase, body_vf, body_rd, c_vdda, c_out):
    A[:, :] = 0.0
    b[:] = 0.0
    # phase branches n -> a_k: EMF + R + L (backward-Euler companion)
    g_ph = 1.0 / max(r_phase + l_phase / h, R_SERIES_FLOOR)
    for k in range(3):
        _stamp_g(A, STAR, k, g_ph)
        _stamp_src(b, STAR, k, g_ph * (emf[k] + (l_phase / h) * i_ph[k]))
    g_d = 1.0 / body_rd
    for s in range(6):
        an = SW_ANODE[s]
        ca = SW_CATHODE[s]
        _stamp_g(A, an, ca, g_ch[s])
        if diode_on[s]:
            _stamp_g(A, an, ca, g_d)
            _stamp_src(b, ca, an, g_d * body_vf)
    gc = c_vdda / h
    _stamp_g(A, VDDA, GND, gc)
    _stamp_src(b, GND, VDDA, gc * v_dda)
    go = c_out / h
    _stamp_g(A, VDDA, GNDC, go)
    _stamp_src(b, GNDC, VDDA, go * v_cout)
    _stamp_g(A, VDDA, GNDC, g_load)
    _stamp_src(b, VDDA, GNDC, i_draw)
    _stamp_g(A, GNDC, GND, g_gndc)


@numba.njit(cache=True)
def _node_v(V, k):
    return 0.0 if k < 0 else V[k]


@numba.njit(cache=True)
def _solve_step(h, emf, i_ph, v_dda, v_cout, g_ch, diode_on, g_gndc, g_load, i_draw,
                r_phase, l_phase, body_vf, body_rd, c_vdda, c_out, V, A, b):
    """One backward-Euler step with diode fixed-point iteration.

    ``diode_on`` is the warm start and is updated in place. Returns the number of
    iterations used, ``-1`` if the pattern did not settle, or ``-2 - k`` when the
    matrix was singular at column k.
    """
    for it in range(MAX_FIXED_POINT_ITER):
        _assemble(A, b, h, emf, i_ph, v_dda, v_cout, g_ch, diode_on, g_gndc, g_load, i_draw,
                  r_phase, l_phase, body_vf, body_rd, c_vdda, c_out)
        bad = _gauss_solve(A, b, V)
        if bad >= 0:
            return -2 - bad
        # flip the most violated diode only; flipping all at once can cycle
        worst = -1
        worst_v = 1e-12
        for s in range(6):
            v_ac = _node_v(V, SW_ANODE[s]) - _node_v(V, SW_CATHODE[s])
            viol = (body_vf - v_ac) if diode_on[s] else (v_ac - body_vf)
            if viol > worst_v:
                worst_v = viol
                worst = s
        if worst < 0:
            return it + 1
        diode_on[worst] = not diode_on[worst]
    return -1


@numba.njit(cache=True)
def _phase_currents(h, emf, i_ph, V, r_phase, l_phase, out):
    g_ph = 1.0 / max(r_phase + l_phase / h, R_SERIES_FLOOR)
    for k in range(3):
        out[k] = g_ph * (V[STAR] + emf[k] - V[k] + (l_phase / h) * i_ph[k])


@numba.njit(cache=True)
def _accumulate_energy(acc, h, emf, i_new, V, g_ch, diode_on, g_gndc, g_load, i_draw,
                       r_phase, body_vf, body_rd):
    for k in range(3):
        acc[E_SOURCE] += emf[k] * i_new[k] * h
        acc[E_RECT_IN] += V[k] * i_new[k] * h
        acc[E_LOSS_PHASE] += r_phase * i_new[k] * i_new[k] * h
    for s in range(6):
        v_ac = _node_v(V, SW_ANODE[s]) - _node_v(V, SW_CATHODE[s])
        acc[E_LOSS_SWITCH] += g_ch[s] * v_ac * v_ac * h
        if diode_on[s]:
            acc[E_LOSS_DIODE] += v_ac * (v_ac - body_vf) / body_rd * h
    acc[E_LOSS_GNDC] += g_gndc * V[GNDC] * V[GNDC] * h
    v_port = V[VDDA] - V[GNDC]
    acc[E_RECT_OUT] += (g_load * v_port * v_port + i_draw * v_port) * h


# ---------------------------------------------------------------------------
# public operations


def channel_conductances(net: RectifierNetwork, state: PowerStageState) -> np.ndarray:
    sw = net.switch
    g = np.full(6, 1.0 / sw.r_off)
    for s, on in enumerate(state.gate):
        if on:
            g[s] = 1.0 / sw.r_on
    if state.startup_drive:
        g[0] = 1.0 / sw.r_on_startup
        g[4] = 1.0 / sw.r_on_startup
    return g


def stamp_network(net: RectifierNetwork, state: PowerStageState, emfs, dt: float = 10e-9,
                  i_draw: float = 0.0) -> LinearSystem:
    """Nodal system for the current conduction pattern held in ``state``."""
    if not np.all(np.isfinite(state.i_phase)) or not math.isfinite(state.v_dda + state.v_cout):
        raise ValueError("state must be finite")
    A = np.zeros((N_NODES, N_NODES))
    b = np.zeros(N_NODES)
    sw = net.switch
    _assemble(A, b, dt, np.asarray(emfs, dtype=float), np.asarray(state.i_phase, dtype=float),
              state.v_dda, state.v_cout, channel_conductances(net, state),
              np.asarray(state.diode_on, dtype=np.bool_), net.gndc_conductance, net.g_load, i_draw,
              net.r_phase, net.l_phase, sw.body_vf, sw.body_rd, net.c_vdda, net.c_out)
    return LinearSystem(A, b)


def step_network(net: RectifierNetwork, state: PowerStageState, emfs, dt: float,
                 i_draw: float = 0.0) -> PowerStageState:
    """Advance the network by ``dt`` and return the new state.

    Energy accumulators in ``state.energy`` are carried forward.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    sw = net.switch
    emf = np.asarray(emfs, dtype=float)
    i_ph = np.asarray(state.i_phase, dtype=float)
    g_ch = channel_conductances(net, state)
    diode_on = np.array(state.diode_on, dtype=np.bool_)
    V = np.zeros(N_NODES)
    A = np.zeros((N_NODES, N_NODES))
    b = np.zeros(N_NODES)
    n_it = _solve_step(dt, emf, i_ph, state.v_dda, state.v_cout, g_ch, diode_on,
                       net.gndc_conductance, net.g_load, i_draw, net.r_phase, net.l_phase,
                       sw.body_vf, sw.body_rd, net.c_vdda, net.c_out, V, A, b)
    if n_it == -1:
        raise ConvergenceError(f"diode conduction did not settle in {MAX_FIXED_POINT_ITER} iterations")
    if n_it <= -2:
        raise SingularNetworkError(f"singular nodal matrix: node '{NODE_NAMES[-2 - n_it]}' is floating")
    i_new = np.zeros(3)
    _phase_currents(dt, emf, i_ph, V, net.r_phase, net.l_phase, i_new)
    new = state.copy()
    _accumulate_energy(new.energy, dt, emf, i_new, V, g_ch, diode_on, net.gndc_conductance,
                       net.g_load, i_draw, net.r_phase, sw.body_vf, sw.body_rd)
    new.i_phase = i_new
    new.v_dda = V[VDDA]
    new.v_cout = V[VDDA] - V[GNDC]
    new.diode_on = diode_on
    new.potentials = V
    return new


def stored_energy(net: RectifierNetwork, state: PowerStageState) -> float:
    return (0.5 * net.l_phase * float(np.sum(state.i_phase ** 2))
            + 0.5 * net.c_vdda * state.v_dda ** 2
            + 0.5 * net.c_out * state.v_cout ** 2)


def body_diode_rectification_floor(body_vf: float, v_supply_min: float) -> float:
    """Smallest peak line-to-line EMF that self-starts through body diodes alone.

    Two diodes conduct in series and the rail must still reach the comparator
    supply minimum.
    """
    if body_vf < 0 or v_supply_min < 0:
        raise ValueError("body_vf and v_supply_min must be >= 0")
    return 2.0 * body_vf + v_supply_min
