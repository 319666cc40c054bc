import csv
import math

import pytest

from microconv.engine import run
from microconv.scenario import Scenario, ScenarioValidationError
from microconv.sweep import find_threshold, sweep, write_sweep_csv

from conftest import scenario

SHORT = scenario(engine__t_end=2e-4)


def test_single_value_sweep_equals_single_run():
    rows = sweep(SHORT, "source.v_ll_peak", [2.5])
    _, summary = run(SHORT.with_value("source.v_ll_peak", 2.5))
    assert len(rows) == 1 and rows[0].ok
    assert rows[0].summary == summary


def test_rows_in_order_and_errors_captured():
    values = [24.0, -1.0, 200.0]
    rows = sweep(SHORT, "load.r_load", values)
    assert [r.value for r in rows] == values
    assert rows[0].ok and rows[2].ok
    assert not rows[1].ok and "r_load" in rows[1].error


def test_load_range_all_populated():
    rows = sweep(SHORT, "load.r_load", [24.0, 50.0, 100.0, 200.0])
    assert all(r.ok and r.summary.eta_rectifier is not None for r in rows)


def test_parallel_sweep_matches_serial():
    values = [2.0, 3.3]
    serial = sweep(SHORT, "source.v_ll_peak", values)
    parallel = sweep(SHORT, "source.v_ll_peak", values, workers=2)
    assert [r.summary for r in serial] == [r.summary for r in parallel]


def test_sweep_preconditions():
    with pytest.raises(ValueError):
        sweep(SHORT, "source.v_ll_peak", [])
    with pytest.raises(ScenarioValidationError):
        sweep(SHORT, "source.nope", [1.0])
    with pytest.raises(ScenarioValidationError):
        sweep(SHORT, "features.boost_enabled", [1.0])


def test_sweep_csv(tmp_path):
    rows = sweep(SHORT, "load.r_load", [24.0, -1.0])
    p = tmp_path / "s.csv"
    write_sweep_csv(rows, "load.r_load", p)
    with open(p, newline="") as fh:
        table = list(csv.DictReader(fh))
    assert len(table) == 2
    assert float(table[0]["load.r_load"]) == 24.0 and float(table[0]["eta_rectifier"]) > 0
    assert table[1]["eta_rectifier"] == "" and "r_load" in table[1]["error"]


def test_find_threshold_bisects():
    base = scenario(load__r_load=math.inf, features__startup_circuit_enabled=False, engine__t_end=1e-4)
    v = find_threshold(base, "source.v_ll_peak", 1.5, 3.0, lambda s: s.reached_active, tol=0.05)
    assert 2.1 <= v <= 2.3
    assert find_threshold(base, "source.v_ll_peak", 1.0, 1.5, lambda s: s.reached_active) == math.inf
