# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
import sys
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from q2_drawdown.harness.config import ExperimentConfig
from q2_drawdown.harness.report import ReportRow, VerificationReport
from q2_drawdown.levy.bss import BssParams, bss_tail_overlineD_fixed_t
from q2_drawdown.levy.cramer import tail_approx
from q2_drawdown.levy.errors import (
    BoundaryProportion,
    LevyError,
    NoCramerRoot,
    UnsupportedModel,
)
from q2_drawdown.levy.exact import (
    EXACT_KINDS,
    ExactTailRequest,
    ExponentialHorizons,
    exact_tail,
)
from q2_drawdown.levy.heavy import heavy_constants, heavy_tail_approx
from q2_drawdown.levy.models import LevyModel, dual, phi
from q2_drawdown.levy.simulation import (
    STREAM_POLICY,
    McEstimate,
    mc_samples,
    sample_exponential_horizons,
    tail_indicator,
)
from q2_drawdown.levy.utils import colorify, resolve_threads

# Routes that do not exist for a model or kind leave their column empty
UNAVAILABLE = (UnsupportedModel, BoundaryProportion, NoCramerRoot)
VERSIONED = ("q2-drawdown", "numpy", "scipy", "pandas", "mpmath")


def package_versions() -> dict:
    versions = {}
    for name in VERSIONED:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = None
    return versions


def _infinite_lookahead(cfg: ExperimentConfig) -> bool:
    horizon = cfg.horizon
    if isinstance(horizon, ExponentialHorizons):
        return horizon.beta == 0
    return math.isinf(horizon.s)


def _all_time_supremum_tail(model: LevyModel, x: float) -> float:
    """P(sup_{u >= 0} X_u > x), exponential for spectrally negative models."""
    if not model.is_spectrally_negative:
        raise UnsupportedModel(
            "The all-time supremum law is only explicit without upward jumps."
        )
    if model.mean >= 0:
        return 1.0
    return math.exp(-phi(model, 0.0) * x)


def analytic_tail(cfg: ExperimentConfig, x: float) -> float:
    """Exact tail from the closed forms or the transform inversions."""
    model, kind, horizon = cfg.model, cfg.kind, cfg.horizon
    if kind in ("ustar", "dstar") and _infinite_lookahead(cfg):
        # Increments after t do not depend on t
        return _all_time_supremum_tail(model if kind == "ustar" else dual(model), x)
    if kind not in EXACT_KINDS:
        raise UnsupportedModel(f"No exact law is available for kind '{kind}'.")
    if (
        kind == "over_dstar"
        and model.is_brownian
        and model.drift > 0
        and not isinstance(horizon, ExponentialHorizons)
        and math.isinf(horizon.s)
    ):
        # Independent closed form for the log-price of a geometric BM
        params = BssParams(mu=model.drift + 0.5 * model.sigma**2, sigma=model.sigma)
        return bss_tail_overlineD_fixed_t(params, horizon.t, x)
    return exact_tail(ExactTailRequest(model, kind, horizon, x))


class _Asymptotics:
    """Large-x approximations at fixed horizons; heavy constants are cached."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self._constants = None

    def __call__(self, x: float) -> float:
        cfg = self.cfg
        if isinstance(cfg.horizon, ExponentialHorizons):
            raise UnsupportedModel(
                "Tail asymptotes are stated for fixed horizons only."
            )
        t, s = cfg.horizon.t, cfg.horizon.s
        if cfg.heavy_alpha is not None:
            if cfg.kind not in ("over_ustar", "under_ustar"):
                raise UnsupportedModel(
                    f"No heavy-tailed asymptote is available for '{cfg.kind}'."
                )
            if self._constants is None:
                self._constants = heavy_constants(cfg.model, cfg.heavy_alpha, t)
            return heavy_tail_approx(
                cfg.model, cfg.kind, t, x, constants=self._constants
            )
        return float(tail_approx(cfg.model, cfg.kind, t, s, x).approx(x))


def _simulate(cfg: ExperimentConfig, progress: bool):
    """Samples of the configured functional, drawn once for the whole grid."""
    mc, horizon = cfg.monte_carlo, cfg.horizon
    options = dict(
        delta=mc.delta,
        bridge=mc.bridge,
        workers=resolve_threads(mc.workers),
        block_size=mc.block_size,
        surrogate_c=mc.surrogate_c,
        progress=progress,
    )
    if isinstance(horizon, ExponentialHorizons):
        run = sample_exponential_horizons(
            cfg.model, horizon.q, horizon.beta, mc.n, mc.seed, **options
        )
        return run.samples[cfg.kind].to_numpy(), run.delta
    samples = mc_samples(cfg.model, horizon.t, horizon.s, mc.n, mc.seed, **options)
    return samples[cfg.kind].to_numpy(), samples.attrs["delta"]


def _route(row: ReportRow, column: str, func, x: float, unavailable: dict):
    try:
        setattr(row, column, float(func(x)))
    except UNAVAILABLE as e:
        unavailable.setdefault(column, e.message)
    except LevyError as e:
        row.error = f"{column}: {e.message}"


def run_experiment(
    cfg: ExperimentConfig, progress: bool = False, verbose: bool = False
) -> VerificationReport:
    """
    Analytic, asymptotic and Monte Carlo tails side by side on the x grid.

    A failing route is recorded on its row and the remaining rows are still
    computed. Rows pass when the Monte Carlo mean lies within the declared
    tolerance of the analytic value, or of the asymptote when no analytic
    value exists.
    """
    unavailable = {}
    rows = [ReportRow(x=x) for x in cfg.xs]

    if verbose:
        print(colorify("Evaluating tails..."), file=sys.stderr, flush=True)
    asymptotics = _Asymptotics(cfg)
    for row in rows:
        _route(row, "analytic", lambda x: analytic_tail(cfg, x), row.x, unavailable)
        _route(row, "asymptotic", asymptotics, row.x, unavailable)

    delta = None
    if cfg.monte_carlo.n > 0:
        if verbose:
            print(colorify("Simulating paths..."), file=sys.stderr, flush=True)
        try:
            values, delta = _simulate(cfg, progress)
        except LevyError as e:
            for row in rows:
                row.error = row.error or f"mc: {e.message}"
        else:
            for row in rows:
                estimate = McEstimate.from_indicators(
                    tail_indicator(cfg.kind, values, row.x),
                    seed=cfg.monte_carlo.seed,
                    delta=delta,
                )
                row.mc_mean, row.mc_se = estimate.mean, estimate.std_error
                row.ci_lo, row.ci_hi = estimate.ci95
    else:
        unavailable["mc"] = "Monte Carlo disabled (monte_carlo.n = 0)."

    for row in rows:
        if row.error is not None:
            row.passed = False
            continue
        reference = row.analytic if np.isfinite(row.analytic) else row.asymptotic
        if np.isfinite(reference) and np.isfinite(row.mc_mean):
            allowed = cfg.tolerance.allowed(row.mc_se, reference)
            row.passed = bool(abs(row.mc_mean - reference) <= allowed)

    metadata = {
        "kind": cfg.kind,
        "seed": cfg.monte_carlo.seed,
        "n": cfg.monte_carlo.n,
        "delta": delta,
        "stream_policy": STREAM_POLICY,
        "versions": package_versions(),
        "unavailable": unavailable,
        "config": cfg.resolved(),
    }
    return VerificationReport(rows=rows, metadata=metadata)
