import math
import sys
import warnings

import pytest

from microconv.scenario import from_flat


def scenario(**flat):
    """Scenario from dotted keys written with double underscores, e.g. ``source__v_ll_peak``."""
    return from_flat({k.replace("__", "."): v for k, v in flat.items()})


@pytest.fixture(autouse=True)
def _quiet_steady_state():
    from microconv.report import SteadyStateWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SteadyStateWarning)
        yield


INF = math.inf


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
