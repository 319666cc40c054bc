"""Command line entry point: ``microconv run | sweep | describe-topologies``.

Exit codes: 0 success, 1 run or measurement failure, 2 configuration error.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click

from .boost import UndefinedEfficiencyError
from .engine import MeasurementError, RunError, run
from .report import SUMMARY_FIELDS, export_csv
from .scenario import ScenarioError, load_scenario
from .sweep import sweep, write_sweep_csv
from .topology import TopologyNotImplementedError, format_topologies, require_simulatable

EXIT_RUN_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def _fail(msg: str, code: int):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _load(path):
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        _fail(str(exc), EXIT_CONFIG_ERROR)


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _parse_values(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise click.BadParameter("at least one value is required")
    return vals


@click.group()
def main():
    """Transient simulator for a three-phase micro-generator conditioning chain."""


@main.command("run")
@click.argument("scenario_file", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Directory for trace.csv and summary.csv.")
@click.option("--channels", default=None, help="Comma-separated channels to export (default: all).")
def run_cmd(scenario_file, out_dir, channels):
    """Simulate one scenario and print its summary."""
    scenario = _load(scenario_file)
    try:
        trace, summary = run(scenario)
    except TopologyNotImplementedError as exc:
        _fail(str(exc), EXIT_CONFIG_ERROR)
    except (RunError, MeasurementError, UndefinedEfficiencyError) as exc:
        _fail(str(exc), EXIT_RUN_FAILURE)
    row = summary.as_row()
    width = max(map(len, SUMMARY_FIELDS))
    for name in SUMMARY_FIELDS:
        click.echo(f"{name:<{width}}  {_fmt(row[name])}")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        selection = None if channels is None else [c.strip() for c in channels.split(",") if c.strip()]
        try:
            export_csv(trace, out / "trace.csv", selection)
        except KeyError as exc:
            _fail(str(exc.args[0]), EXIT_CONFIG_ERROR)
        except OSError as exc:
            _fail(str(exc), EXIT_RUN_FAILURE)
        with open(out / "summary.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(SUMMARY_FIELDS)
            wr.writerow(["" if row[f] is None else repr(row[f]) for f in SUMMARY_FIELDS])
        click.echo(f"wrote {out / 'trace.csv'} and {out / 'summary.csv'}")
    if not summary.reached_active:
        click.echo("note: the rectifier never reached ACTIVE", err=True)


@main.command("sweep")
@click.argument("scenario_file", type=click.Path(dir_okay=False))
@click.option("--axis", required=True, help="Dotted scenario key, e.g. source.v_ll_peak.")
@click.option("--values", "values_text", required=True, help="Comma-separated values.")
@click.option("--workers", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Directory for sweep.csv.")
def sweep_cmd(scenario_file, axis, values_text, workers, out_dir):
    """Run one simulation per value of AXIS and tabulate the summaries."""
    scenario = _load(scenario_file)
    values = _parse_values(values_text)
    try:
        require_simulatable(scenario.topology_tag)
    except TopologyNotImplementedError as exc:
        _fail(str(exc), EXIT_CONFIG_ERROR)
    try:
        rows = sweep(scenario, axis, values, workers=workers)
    except ScenarioError as exc:
        _fail(str(exc), EXIT_CONFIG_ERROR)
    cols = ("eta_rectifier", "eta_boost", "eta_cascade", "reached_active", "v_dda_mean", "v_out_mean")
    click.echo("  ".join([f"{axis:>16}", *(f"{c:>14}" for c in cols)]))
    for r in rows:
        if r.ok:
            d = r.summary.as_row()
            click.echo("  ".join([f"{r.value:>16.6g}", *(f"{_fmt(d[c]):>14}" for c in cols)]))
        else:
            click.echo(f"{r.value:>16.6g}  {r.error}")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, axis, out / "sweep.csv")
        click.echo(f"wrote {out / 'sweep.csv'}")
    if not all(r.ok for r in rows):
        sys.exit(EXIT_RUN_FAILURE)


@main.command("describe-topologies")
def describe_cmd():
    """List the conditioner topologies and which of them can be simulated."""
    click.echo(format_topologies())


if __name__ == "__main__":
    main()
