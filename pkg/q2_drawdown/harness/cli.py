# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import functools
import json
import sys

import click

from q2_drawdown import __version__
from q2_drawdown.harness import actions
from q2_drawdown.harness.config import load_experiment, load_model
from q2_drawdown.harness.experiment import run_experiment
from q2_drawdown.harness.report import FLOAT_FORMAT, emit, make_json_safe
from q2_drawdown.levy.errors import LevyError
from q2_drawdown.levy.simulation import KINDS
from q2_drawdown.levy.utils import colorify

EXIT_ERROR = 2


def _status(message: str):
    # Stage messages go to stderr so that CSV on stdout stays clean
    click.echo(colorify(message), err=True)


def handle_errors(command):
    """Reports configuration and computation errors with exit code 2."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (LevyError, ValueError, OSError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_ERROR)

    return wrapper


def _write_table(df, out: str = None):
    if out is None:
        click.echo(df.to_csv(index=False, float_format=FLOAT_FORMAT), nl=False)
    else:
        df.to_csv(out, index=False, float_format=FLOAT_FORMAT)
        _status(f"Saved {out}")


def _write_json(payload: dict, out: str = None):
    text = json.dumps(make_json_safe(payload), indent=2)
    if out is None:
        click.echo(text)
    else:
        with open(out, "w") as fh:
            fh.write(text + "\n")
        _status(f"Saved {out}")


model_option = click.option(
    "--model",
    "model_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Model file (TOML or JSON).",
)
kind_option = click.option("--kind", required=True, type=click.Choice(KINDS))
grid_option = click.option(
    "--x-grid", required=True, help='Levels as "a:b:n" or "x1,x2,...".'
)
out_option = click.option(
    "--out", type=click.Path(dir_okay=False), help="CSV destination (default stdout)."
)


@click.group()
@click.version_option(__version__, prog_name="q2-drawdown")
def cli():
    """Future drawdown and drawup laws of Levy processes."""


@cli.command("scale-fn")
@model_option
@click.option("--q", required=True, type=click.FloatRange(min=0))
@grid_option
@out_option
@handle_errors
def scale_fn(model_path, q, x_grid, out):
    """Scale functions W^(q), Z^(q) and W^(q)' on a grid."""
    model = load_model(model_path)
    _write_table(actions.scale_functions(model, q, x_grid), out)


@cli.command()
@model_option
@kind_option
@click.option("--t", required=True, type=click.FloatRange(min=0))
@click.option("--s", type=click.FloatRange(min=0), help="Lookahead (default inf).")
@click.option("--x", required=True, type=click.FloatRange(min=0))
@click.option("--n", default=10000, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--delta", type=click.FloatRange(min=0, min_open=True))
@click.option("--bridge-correction/--no-bridge-correction", default=True)
@click.option("--workers", type=click.IntRange(min=1))
@click.option("--out", type=click.Path(dir_okay=False), help="JSON destination.")
@click.option(
    "--samples", type=click.Path(dir_okay=False), help="CSV destination for samples."
)
@handle_errors
def simulate(
    model_path, kind, t, s, x, n, seed, delta, bridge_correction, workers, out, samples
):
    """Monte Carlo estimate of a tail probability."""
    model = load_model(model_path)
    _status("Simulating paths...")
    estimate, draws = actions.simulate_with_samples(
        model,
        kind,
        t,
        x,
        s=s,
        n=n,
        seed=seed,
        delta=delta,
        bridge_correction=bridge_correction,
        workers=workers,
        progress=True,
    )
    _write_json(estimate.iloc[0].to_dict(), out)
    if samples is not None:
        draws.to_csv(samples, index=False, float_format=FLOAT_FORMAT)
        _status(f"Saved {samples}")


@cli.command()
@model_option
@kind_option
@click.option("--t", required=True, type=click.FloatRange(min=0))
@click.option("--s", type=click.FloatRange(min=0))
@click.option("--inf", "infinite", is_flag=True, help="Infinite lookahead (default).")
@grid_option
@out_option
@handle_errors
def asymptotics(model_path, kind, t, s, infinite, x_grid, out):
    """Large-x approximations of the tail."""
    if infinite and s is not None:
        raise click.UsageError("Use either --s or --inf.")
    model = load_model(model_path)
    _write_table(actions.tail_asymptotics(model, kind, t, x_grid, s), out)


@cli.command()
@model_option
@click.option("--alpha", required=True, type=click.FloatRange(min=0, min_open=True))
@click.option("--t", required=True, type=click.FloatRange(min=0))
@click.option("--grid-points", default=40, show_default=True, type=click.IntRange(2))
@grid_option
@out_option
@handle_errors
def heavy(model_path, alpha, t, grid_points, x_grid, out):
    """Heavy-tailed asymptotes of the future drawup extrema."""
    model = load_model(model_path)
    _status("Computing heavy-tail constants...")
    table = actions.heavy_tail(model, alpha, t, x_grid, grid_points)
    _write_table(table, out)


@cli.command()
@model_option
@kind_option
@click.option("--q", type=click.FloatRange(min=0, min_open=True))
@click.option("--beta", type=click.FloatRange(min=0))
@click.option("--t", type=click.FloatRange(min=0, min_open=True))
@click.option("--s", type=click.FloatRange(min=0))
@click.option("--inf", "infinite", is_flag=True, help="Infinite lookahead.")
@grid_option
@out_option
@handle_errors
def exact(model_path, kind, q, beta, t, s, infinite, x_grid, out):
    """Exact tails at exponential (--q, --beta) or fixed (--t, --s) horizons."""
    if infinite and (beta is not None or s is not None):
        raise click.UsageError("--inf replaces --beta and --s.")
    model = load_model(model_path)
    table = actions.exact_tail(
        model,
        kind,
        x_grid,
        q=q,
        beta=0.0 if beta is None else beta,
        t=t,
        s=s,
    )
    _write_table(table, out)


@cli.command()
@click.option("--mu", required=True, type=float)
@click.option("--sigma", required=True, type=click.FloatRange(min=0, min_open=True))
@click.option("--p0", required=True, type=click.FloatRange(min=0, min_open=True))
@click.option("--t", required=True, type=click.FloatRange(min=0))
@click.option("--q", required=True, type=click.FloatRange(min=0, min_open=True))
@grid_option
@out_option
@click.option(
    "--report",
    type=click.Path(dir_okay=False),
    help="JSON destination of the reference-against-display comparison.",
)
@handle_errors
def bss(mu, sigma, p0, t, q, x_grid, out, report):
    """Closed forms for the log-price of a geometric Brownian motion."""
    _write_table(actions.bss_report(mu, sigma, p0, t, q, x_grid), out)
    if report is not None:
        comparison = actions.bss_comparison(mu, sigma, t, q, x_grid)
        _write_json(comparison, report)
        if comparison["itemised"]:
            _status(f"{len(comparison['itemised'])} display value(s) deviate.")


@cli.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--progress/--no-progress", default=True)
@handle_errors
def verify(config, progress):
    """
    Runs an experiment config and compares the routes against each other.

    Exit code 0 when every row passes, 1 on tolerance failures and 2 on
    configuration or computation errors.
    """
    cfg = load_experiment(config)
    report = run_experiment(cfg, progress=progress, verbose=True)
    if cfg.output.csv is None and cfg.output.json is None:
        _write_table(report.to_frame())
    if cfg.output.csv is not None:
        _status(f"Saved {emit(report, 'csv', cfg.output.csv)}")
    if cfg.output.json is not None:
        _status(f"Saved {emit(report, 'json', cfg.output.json)}")
    for row in report.errors:
        click.echo(f"Error at x={row.x:g}: {row.error}", err=True)
    if report.failures:
        _status(f"{len(report.failures)} of {len(report.rows)} row(s) failed.")
    sys.exit(report.exit_code)
