import csv

import numpy as np
import pytest

from microconv.boost import UndefinedEfficiencyError
from microconv.engine import CHANNELS, run, simulate
from microconv.report import SteadyStateWarning, efficiency_report, export_csv, read_csv
from microconv.trace import Trace

from conftest import scenario


@pytest.fixture(scope="module")
def rect_trace():
    return simulate(scenario(engine__t_end=6e-4))[0]


def test_default_rectifier_efficiency_band(rect_trace):
    s = efficiency_report(rect_trace)
    assert 0.85 <= s.eta_rectifier <= 0.95
    assert s.eta_boost is None and s.eta_cascade is None
    assert s.t_start == pytest.approx(4.5e-4) and s.t_stop == pytest.approx(6e-4)


def test_lossless_rectifier_is_unity():
    s = scenario(source__r_phase=0.0, rectifier__r_on=1e-6, rectifier__r_off=1e12, rectifier__body_vf=0.0,
                 rectifier__body_rd=1e-3, control__gndc_g_max=1e6, engine__t_end=6e-4)
    tr, summary = run(s)
    assert summary.eta_rectifier == pytest.approx(1.0, abs=5e-3)


def test_cascade_is_product_of_stages():
    _, s = run(scenario(features__topology_tag="DUAL_STAGE", load__r_load=1000.0, engine__t_end=6e-3))
    assert s.eta_cascade == pytest.approx(s.eta_rectifier * s.eta_boost, rel=0.01)
    assert s.v_out_mean == pytest.approx(5.0, rel=0.02)


def test_zero_input_energy_is_undefined():
    t = np.linspace(0, 1e-4, 11)
    tr = Trace(t, {c: np.zeros_like(t) for c in CHANNELS})
    with pytest.raises(UndefinedEfficiencyError):
        efficiency_report(tr)
    assert efficiency_report(tr, strict=False).eta_rectifier is None


def test_window_must_lie_in_trace(rect_trace):
    with pytest.raises(ValueError):
        efficiency_report(rect_trace, window=(5e-4, 7e-4))


def test_short_window_warns(rect_trace):
    with pytest.warns(SteadyStateWarning, match="fewer than 10"):
        efficiency_report(rect_trace, window=(5e-4, 6e-4))


def test_drift_warns_during_start_up():
    tr, _ = simulate(scenario(engine__t_end=3e-4))
    with pytest.warns(SteadyStateWarning, match="drifts"):
        s = efficiency_report(tr, window=(0.0, 3e-4))
    assert s.drift_warning


def test_export_round_trip(tmp_path, rect_trace):
    p = tmp_path / "t.csv"
    export_csv(rect_trace, p)
    back = read_csv(p)
    assert np.array_equal(back.time, rect_trace.time)
    for n in rect_trace.names:
        assert np.array_equal(back[n], rect_trace[n]), n


def test_export_selection(tmp_path):
    tr, _ = simulate(scenario(features__topology_tag="DUAL_STAGE", load__r_load=1000.0, engine__t_end=1e-4))
    p = tmp_path / "sel.csv"
    export_csv(tr, p, ["v_dda", "boost_v_out"])
    with open(p, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["time", "v_dda", "boost_v_out"]
    assert len(rows) == len(tr) + 1 and all(len(r) == 3 for r in rows)


def test_export_empty_trace_is_header_only(tmp_path):
    tr, _ = simulate(scenario(engine__t_end=0.0))
    p = tmp_path / "e.csv"
    export_csv(tr, p, ["v_dda"])
    assert p.read_text().splitlines() == ["time,v_dda"]
    assert len(read_csv(p)) == 0


def test_export_unknown_channel(tmp_path, rect_trace):
    with pytest.raises(KeyError):
        export_csv(rect_trace, tmp_path / "x.csv", ["v_nope"])
