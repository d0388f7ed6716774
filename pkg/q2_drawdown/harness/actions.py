# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math

import pandas as pd

from q2_drawdown.harness.config import load_experiment, parse_grid
from q2_drawdown.harness.experiment import run_experiment
from q2_drawdown.levy.bss import BssParams, bss_comparison_report, bss_table
from q2_drawdown.levy.cramer import asymptotic_table
from q2_drawdown.levy.exact import ExponentialHorizons, FixedHorizons, exact_table
from q2_drawdown.levy.heavy import heavy_table
from q2_drawdown.levy.models import LevyModel
from q2_drawdown.levy.scale import ScaleEvaluator, scale_table
from q2_drawdown.levy.simulation import (
    FunctionalKind,
    McEstimate,
    mc_samples,
    tail_indicator,
)
from q2_drawdown.levy.utils import resolve_threads


def _lookahead(s: float = None) -> float:
    # Actions take s = None for an infinite lookahead
    return math.inf if s is None else s


def scale_functions(model: LevyModel, q: float, x_grid: str) -> pd.DataFrame:
    return scale_table(ScaleEvaluator(model, q), parse_grid(x_grid, "x_grid"))


def simulate_with_samples(
    model: LevyModel,
    kind: str,
    t: float,
    x: float,
    s: float = None,
    n: int = 10000,
    seed: int = 0,
    delta: float = None,
    bridge_correction: bool = True,
    workers: int = None,
    progress: bool = False,
) -> (pd.DataFrame, pd.DataFrame):
    """The one-row Monte Carlo estimate of the tail and the samples behind it."""
    kind = FunctionalKind(kind).value
    samples = mc_samples(
        model,
        t,
        _lookahead(s),
        n,
        seed,
        delta=delta,
        bridge=bridge_correction,
        workers=resolve_threads(workers),
        progress=progress,
    )
    estimate = McEstimate.from_indicators(
        tail_indicator(kind, samples[kind], x),
        seed=seed,
        delta=samples.attrs["delta"],
    )
    record = estimate.to_dict()
    record["ci_lo"], record["ci_hi"] = record.pop("ci95")
    columns = ["n", "mean", "std_error", "ci_lo", "ci_hi"]
    columns += ["seed", "stream_policy", "delta"]
    return pd.DataFrame([record], columns=columns), samples


def simulate_tail(
    model: LevyModel,
    kind: str,
    t: float,
    x: float,
    s: float = None,
    n: int = 10000,
    seed: int = 0,
    delta: float = None,
    bridge_correction: bool = True,
    workers: int = None,
) -> pd.DataFrame:
    estimate, _ = simulate_with_samples(
        model, kind, t, x, s, n, seed, delta, bridge_correction, workers
    )
    return estimate


def tail_asymptotics(
    model: LevyModel, kind: str, t: float, x_grid: str, s: float = None
) -> pd.DataFrame:
    return asymptotic_table(model, kind, t, _lookahead(s), parse_grid(x_grid, "x_grid"))


def heavy_tail(
    model: LevyModel, alpha: float, t: float, x_grid: str, grid_points: int = 40
) -> pd.DataFrame:
    return heavy_table(
        model, alpha, t, parse_grid(x_grid, "x_grid"), grid_points=grid_points
    )


def exact_tail(
    model: LevyModel,
    kind: str,
    x_grid: str,
    q: float = None,
    beta: float = 0.0,
    t: float = None,
    s: float = None,
) -> pd.DataFrame:
    """
    Exact tails at exponential horizons (q, beta) or at fixed horizons (t, s).

    beta = 0 and s = None stand for an infinite lookahead.
    """
    if (q is None) == (t is None):
        raise ValueError("Give either the rate q or the horizon t, not both.")
    if q is not None:
        horizon = ExponentialHorizons(q=q, beta=beta)
    else:
        horizon = FixedHorizons(t=t, s=_lookahead(s))
    return exact_table(model, kind, horizon, parse_grid(x_grid, "x_grid"))


def bss_report(
    mu: float, sigma: float, p0: float, t: float, q: float, x_grid: str
) -> pd.DataFrame:
    return bss_table(BssParams(mu, sigma), q, t, p0, parse_grid(x_grid, "x_grid"))


def bss_comparison(mu: float, sigma: float, t: float, q: float, x_grid: str) -> dict:
    """Reference against display values, with the flagged quantities itemised."""
    report = bss_comparison_report(
        BssParams(mu, sigma), t, q, parse_grid(x_grid, "x_grid")
    )
    return {
        "parameters": {"mu": mu, "sigma": sigma, "t": t, "q": q},
        "rows": report.to_dict(orient="records"),
        "itemised": report.attrs["itemised"],
    }


def verify(config: str) -> pd.DataFrame:
    return run_experiment(load_experiment(config)).to_frame()
