"""Time-series container shared by the engine, the boost runner and the reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Trace:
    time: np.ndarray = field(default_factory=lambda: np.zeros(0))
    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        for name, values in self.channels.items():
            values = np.asarray(values)
            if values.shape != self.time.shape:
                raise ValueError(f"channel {name!r} has {values.shape[0]} samples, time has {len(self.time)}")
            self.channels[name] = values

    def __len__(self):
        return len(self.time)

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "time":
            return self.time
        try:
            return self.channels[name]
        except KeyError:
            raise KeyError(f"unknown channel {name!r}") from None

    @property
    def names(self) -> list:
        return list(self.channels)

    def window(self, t_start=None, t_stop=None) -> "Trace":
        lo = -np.inf if t_start is None else t_start
        hi = np.inf if t_stop is None else t_stop
        m = (self.time >= lo) & (self.time <= hi)
        return Trace(self.time[m], {k: v[m] for k, v in self.channels.items()})

    def delta(self, name: str) -> float:
        """Change of a cumulative channel across the trace (0 when empty)."""
        v = self[name]
        return float(v[-1] - v[0]) if len(v) else 0.0

    def period_means(self, name: str, period: float) -> tuple[np.ndarray, np.ndarray]:
        """Time-weighted mean of ``name`` over consecutive windows of length ``period``."""
        if len(self.time) < 2:
            return np.zeros(0), np.zeros(0)
        t0 = self.time[0]
        n = int((self.time[-1] - t0) // period)
        starts = t0 + period * np.arange(n)
        means = np.array([_time_mean(self.time, self[name], a, a + period) for a in starts])
        return starts, means


def _time_mean(t, v, a, b):
    m = (t >= a) & (t <= b)
    tt, vv = t[m], v[m]
    if len(tt) < 2:
        return float(vv.mean()) if len(vv) else float("nan")
    return float(np.trapezoid(vv, tt) / (tt[-1] - tt[0]))
