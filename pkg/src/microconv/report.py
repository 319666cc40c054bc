"""Energy and efficiency reporting over a trace window, plus CSV waveform export."""

from __future__ import annotations

import csv
import warnings
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .boost import UndefinedEfficiencyError, burst_aligned_window
from .trace import Trace

MIN_STEADY_PERIODS = 10
DRIFT_LIMIT = 0.01


class SteadyStateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RunSummary:
    t_start: float = 0.0
    t_stop: float = 0.0
    e_source: float = 0.0
    e_rect_in: float = 0.0
    e_rect_out: float = 0.0
    e_boost_in: float = 0.0
    e_boost_out: float = 0.0
    e_loss_phase: float = 0.0
    e_loss_switch: float = 0.0
    e_loss_diode: float = 0.0
    e_loss_gndc: float = 0.0
    e_loss_boost_switch: float = 0.0
    e_loss_boost_diode: float = 0.0
    e_loss_boost_quiescent: float = 0.0
    eta_rectifier: float | None = None
    eta_boost: float | None = None
    eta_cascade: float | None = None
    reached_active: bool = False
    t_active: float | None = None
    startup_duration: float | None = None
    v_dda_mean: float = 0.0
    v_cout_mean: float = 0.0
    v_out_mean: float | None = None
    v_out_ripple: float | None = None
    drift_warning: bool = False

    def as_row(self) -> dict:
        return asdict(self)


SUMMARY_FIELDS = tuple(f.name for f in fields(RunSummary))

_ENERGY_CHANNELS = {
    "e_source": "e_source", "e_rect_in": "e_rect_in", "e_rect_out": "e_rect_out",
    "e_boost_in": "e_boost_in", "e_boost_out": "e_boost_out",
    "e_loss_phase": "e_loss_phase", "e_loss_switch": "e_loss_switch",
    "e_loss_diode": "e_loss_diode", "e_loss_gndc": "e_loss_gndc",
    "e_loss_boost_switch": "e_boost_loss_sw", "e_loss_boost_diode": "e_boost_loss_diode",
    "e_loss_boost_quiescent": "e_boost_loss_q",
}


def _estimate_period(trace: Trace) -> float | None:
    """Source period from upward zero crossings of e1."""
    if "e1" not in trace.channels or len(trace) < 3:
        return None
    e = trace["e1"]
    up = np.nonzero((e[:-1] < 0) & (e[1:] >= 0))[0]
    if len(up) < 2:
        return None
    return float(np.mean(np.diff(trace.time[up])))


def _resolve_window(trace: Trace, window):
    t0, t1 = float(trace.time[0]), float(trace.time[-1])
    if window is None:
        return t1 - 0.25 * (t1 - t0), t1
    a, b = window
    if not (t0 - 1e-15 <= a < b <= t1 + 1e-15):
        raise ValueError(f"window [{a}, {b}] does not lie within the trace [{t0}, {t1}]")
    return float(a), float(b)


def _ratio(num, den):
    return num / den if den > 0 else None


def efficiency_report(trace: Trace, window=None, period: float | None = None,
                      strict: bool = True, align_bursts: bool = True) -> RunSummary:
    """Energies and stage efficiencies over ``window`` (default: last 25 % of the trace).

    Energies are differences of the cumulative channels, so they are exact for
    the simulated step sequence. A warning is issued when the per-period mean of
    ``v_dda`` drifts by more than 1 % across the window. With ``strict`` a zero
    rectifier input energy raises UndefinedEfficiencyError.

    When the boost regulates in PFM bursts and at least two bursts start
    inside the window, the window is narrowed to run from the first to the
    last burst start, so that both ends see the same stored energy.
    """
    if len(trace) < 2:
        if strict:
            raise UndefinedEfficiencyError("trace too short to measure energy")
        return RunSummary()
    a, b = _resolve_window(trace, window)
    if align_bursts and "boost_mode" in trace.channels:
        a, b = burst_aligned_window(trace, a, b)
    w = trace.window(a, b)
    if len(w) < 2:
        if strict:
            raise UndefinedEfficiencyError("window holds fewer than two samples")
        return RunSummary(t_start=a, t_stop=b)
    e = {k: w.delta(ch) for k, ch in _ENERGY_CHANNELS.items()}
    if strict and not e["e_rect_in"] > 0:
        raise UndefinedEfficiencyError("zero rectifier input energy in window")
    has_boost = e["e_boost_in"] > 0 or e["e_loss_boost_quiescent"] > 0
    eta_r = _ratio(e["e_rect_out"], e["e_rect_in"])
    eta_b = _ratio(e["e_boost_out"], e["e_boost_in"]) if has_boost else None
    eta_c = _ratio(e["e_boost_out"], e["e_rect_in"]) if has_boost else None

    period = period or _estimate_period(trace)
    drift = False
    if period is not None:
        if b - a < MIN_STEADY_PERIODS * period * (1 - 1e-9):
            warnings.warn(f"window covers fewer than {MIN_STEADY_PERIODS} source periods",
                          SteadyStateWarning, stacklevel=2)
        _, means = w.period_means("v_dda", period)
        if len(means) >= 2 and np.all(np.isfinite(means)):
            ref = abs(float(np.mean(means)))
            if ref > 0 and (means.max() - means.min()) / ref > DRIFT_LIMIT:
                drift = True
                warnings.warn("cycle-averaged v_dda drifts by more than 1 % across the window",
                              SteadyStateWarning, stacklevel=2)

    v_out = w["boost_v_out"] if has_boost else None
    return RunSummary(
        t_start=a, t_stop=b, **e,
        eta_rectifier=eta_r, eta_boost=eta_b, eta_cascade=eta_c,
        v_dda_mean=_time_mean(w, "v_dda"), v_cout_mean=_time_mean(w, "v_cout"),
        v_out_mean=_time_mean(w, "boost_v_out") if has_boost else None,
        v_out_ripple=float(v_out.max() - v_out.min()) if has_boost else None,
        drift_warning=drift,
    )


def _time_mean(w: Trace, name: str) -> float:
    t, v = w.time, w[name]
    return float(np.trapezoid(v, t) / (t[-1] - t[0]))


def summarize(trace: Trace, info, scenario, window=None) -> RunSummary:
    """Full run summary: window energetics plus start-up milestones."""
    period = 1.0 / scenario.source.freq
    with warnings.catch_warnings():
        if window is None:
            warnings.simplefilter("ignore", SteadyStateWarning)
        s = efficiency_report(trace, window, period=period, strict=False)
    duration = None
    if info.t_active is not None and info.t_first_engage is not None:
        duration = info.t_active - info.t_first_engage
    return replace(s, reached_active=info.t_active is not None, t_active=info.t_active,
                   startup_duration=duration)


def export_csv(trace: Trace, path, channels=None) -> None:
    """Write ``time`` plus the selected channels, one row per recorded sample.

    Values use Python's shortest round-trip float formatting, so re-reading
    the file gives back exactly the stored numbers.
    """
    names = trace.names if channels is None else list(channels)
    for n in names:
        if n not in trace.channels:
            raise KeyError(f"unknown channel {n!r}")
    cols = [trace.time] + [trace[n] for n in names]
    with open(Path(path), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["time"] + names)
        for row in zip(*cols):
            wr.writerow([repr(float(x)) for x in row])


def read_csv(path) -> Trace:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body], dtype=float).reshape(len(body), len(header))
    return Trace(data[:, 0], {n: data[:, k] for k, n in enumerate(header) if k > 0})
