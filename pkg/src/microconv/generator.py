"""Three-phase micro-generator: balanced sinusoidal EMFs behind R-L phase impedance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

TWO_THIRDS_PI = 2.0 * math.pi / 3.0


@dataclass(frozen=True)
class ThreePhaseSource:
    """Star-connected EMF source.

    ``v_ll_peak`` is the *peak* line-to-line amplitude (U12MAX).
    """

    v_ll_peak: float = 3.3
    freq: float = 50e3
    r_phase: float = 1.0
    l_phase: float = 1.0e-6
    phase0: float = 0.0

    def __post_init__(self):
        if not self.v_ll_peak > 0:
            raise ValueError(f"v_ll_peak must be > 0, got {self.v_ll_peak}")
        if not self.freq > 0:
            raise ValueError(f"freq must be > 0, got {self.freq}")
        if self.r_phase < 0:
            raise ValueError(f"r_phase must be >= 0, got {self.r_phase}")
        if self.l_phase < 0:
            raise ValueError(f"l_phase must be >= 0, got {self.l_phase}")

    @property
    def period(self) -> float:
        return 1.0 / self.freq


@numba.njit(cache=True)
def _emf(v_ll_peak, freq, phase0, t, out):
    amp = v_ll_peak / math.sqrt(3.0)
    theta = 2.0 * math.pi * freq * t + phase0
    out[0] = amp * math.sin(theta)
    out[1] = amp * math.sin(theta - TWO_THIRDS_PI)
    # third EMF closes the star so the sum is exactly zero
    out[2] = -(out[0] + out[1])


def emf_potentials(src: ThreePhaseSource, t) -> tuple:
    """Phase EMFs ``(e1, e2, e3)`` at time ``t`` (scalar or array).

    ``e_k = v_ll_peak/sqrt(3) * sin(2*pi*f*t + phase0 - 2*pi*(k-1)/3)``.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    amp = src.v_ll_peak / math.sqrt(3.0)
    theta = 2.0 * math.pi * src.freq * t_arr + src.phase0
    e1 = amp * np.sin(theta)
    e2 = amp * np.sin(theta - TWO_THIRDS_PI)
    e3 = -(e1 + e2)
    if t_arr.ndim == 0:
        return float(e1), float(e2), float(e3)
    return e1, e2, e3


def line_to_line(src: ThreePhaseSource, t, i: int, j: int):
    """EMF-level line-to-line voltage ``U_ij = e_i - e_j`` (phases numbered 1..3)."""
    for k in (i, j):
        if k not in (1, 2, 3):
            raise ValueError(f"phase index must be 1, 2 or 3, got {k!r}")
    if i == j:
        raise ValueError(f"line-to-line needs two distinct phases, got {i} and {j}")
    emfs = emf_potentials(src, t)
    return emfs[i - 1] - emfs[j - 1]
