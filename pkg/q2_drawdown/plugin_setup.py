# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import importlib

from qiime2.core.type import Bool, Choices, Float, Int, Range, Str
from qiime2.plugin import Citations, Plugin

from q2_drawdown import __version__
from q2_drawdown.harness.actions import (
    bss_report,
    exact_tail,
    heavy_tail,
    scale_functions,
    simulate_tail,
    tail_asymptotics,
    verify,
)
from q2_drawdown.levy.exact import EXACT_KINDS
from q2_drawdown.levy.simulation import KINDS
from q2_drawdown.types import (
    DrawdownReport,
    DrawdownReportDirectoryFormat,
    DrawdownReportFormat,
    LevyModelDirectoryFormat,
    LevyModelFormat,
    LevyProcess,
)

citations = Citations.load("citations.bib", package="q2_drawdown")

plugin = Plugin(
    name="drawdown",
    version=__version__,
    website="https://github.com/bokulich-lab/q2-drawdown",
    package="q2_drawdown",
    description="This is a QIIME 2 plugin that computes the laws of future "
    "drawdowns and drawups of Levy processes through scale functions, "
    "Laplace inversion, tail asymptotics and Monte Carlo simulation.",
    short_description="This is a QIIME 2 plugin for future drawdowns of "
    "Levy processes.",
)

P_nonnegative = Float % Range(0, None)
P_positive = Float % Range(0, None, inclusive_start=False)
P_grid = Str

_model_description = {"model": "Levy process given by its triplet and jump laws."}
_grid_description = (
    'Levels as "start:stop:count" or as a comma separated list of values.'
)
_kind_description = (
    "Functional whose tail is computed: the future drawup or drawdown "
    "(ustar, dstar), their supremum or infimum over the horizon or the "
    "classical drawup and drawdown."
)
_report_description = {"report": "Table of the computed quantities."}

plugin.methods.register_function(
    function=scale_functions,
    inputs={"model": LevyProcess},
    parameters={"q": P_nonnegative, "x_grid": P_grid},
    outputs=[("report", DrawdownReport)],
    input_descriptions=_model_description,
    parameter_descriptions={
        "q": "Killing rate of the scale functions.",
        "x_grid": _grid_description,
    },
    output_descriptions=_report_description,
    name="Evaluate scale functions.",
    description="Evaluate the q-scale functions W, Z and the derivative of W of "
    "a spectrally negative Levy process on a grid.",
    citations=[citations["kuznetsov_theory_2012"], citations["stehfest_1970"]],
)

plugin.methods.register_function(
    function=simulate_tail,
    inputs={"model": LevyProcess},
    parameters={
        "kind": Str % Choices(KINDS),
        "t": P_nonnegative,
        "x": P_nonnegative,
        "s": P_nonnegative,
        "n": Int % Range(1, None),
        "seed": Int % Range(0, None),
        "delta": P_positive,
        "bridge_correction": Bool,
        "workers": Int % Range(1, None),
    },
    outputs=[("report", DrawdownReport)],
    input_descriptions=_model_description,
    parameter_descriptions={
        "kind": _kind_description,
        "t": "Horizon over which the functional is taken.",
        "x": "Level whose exceedance probability is estimated.",
        "s": "Lookahead window. Omit for an infinite lookahead.",
        "n": "Number of simulated paths.",
        "seed": "Root seed of the counter based random streams.",
        "delta": "Time step of the path discretisation.",
        "bridge_correction": "Correct the extrema of each step with the "
        "Brownian bridge law.",
        "workers": "Number of threads. Results do not depend on it.",
    },
    output_descriptions=_report_description,
    name="Estimate a tail probability by simulation.",
    description="Monte Carlo estimate of P(F > x) with its standard error and "
    "95% confidence interval.",
    citations=[citations["salmon_parallel_2011"]],
)

plugin.methods.register_function(
    function=tail_asymptotics,
    inputs={"model": LevyProcess},
    parameters={
        "kind": Str % Choices(KINDS),
        "t": P_nonnegative,
        "x_grid": P_grid,
        "s": P_nonnegative,
    },
    outputs=[("report", DrawdownReport)],
    input_descriptions=_model_description,
    parameter_descriptions={
        "kind": _kind_description,
        "t": "Horizon over which the functional is taken.",
        "x_grid": _grid_description,
        "s": "Lookahead window. Omit for an infinite lookahead.",
    },
    output_descriptions=_report_description,
    name="Light-tailed asymptotics.",
    description="Exponential large-level approximations of the tail under the "
    "Cramer condition.",
    citations=[citations["kyprianou_fluctuations_2014"]],
)

plugin.methods.register_function(
    function=heavy_tail,
    inputs={"model": LevyProcess},
    parameters={
        "alpha": P_positive,
        "t": P_nonnegative,
        "x_grid": P_grid,
        "grid_points": Int % Range(2, None),
    },
    outputs=[("report", DrawdownReport)],
    input_descriptions=_model_description,
    parameter_descriptions={
        "alpha": "Exponent of the convolution equivalent jump tail.",
        "t": "Horizon over which the functional is taken.",
        "x_grid": _grid_description,
        "grid_points": "Quadrature points of the constants.",
    },
    output_descriptions=_report_description,
    name="Heavy-tailed asymptotics.",
    description="Asymptotes of the supremum and infimum of the future drawup "
    "for convolution equivalent upward jumps.",
    citations=[citations["kyprianou_fluctuations_2014"]],
)

plugin.methods.register_function(
    function=exact_tail,
    inputs={"model": LevyProcess},
    parameters={
        "kind": Str % Choices(list(EXACT_KINDS)),
        "x_grid": P_grid,
        "q": P_positive,
        "beta": P_nonnegative,
        "t": P_positive,
        "s": P_nonnegative,
    },
    outputs=[("report", DrawdownReport)],
    input_descriptions=_model_description,
    parameter_descriptions={
        "kind": _kind_description,
        "x_grid": _grid_description,
        "q": "Rate of the exponential horizon. Give either q or t.",
        "beta": "Rate of the exponential lookahead. Zero means infinite.",
        "t": "Fixed horizon. Give either q or t.",
        "s": "Fixed lookahead. Omit for an infinite lookahead.",
    },
    output_descriptions=_report_description,
    name="Exact tails.",
    description="Exact tails at exponential horizons and, by Laplace inversion, "
    "at fixed horizons.",
    citations=[
        citations["kuznetsov_theory_2012"],
        citations["stehfest_1970"],
        citations["abate_unified_2006"],
    ],
)

plugin.methods.register_function(
    function=bss_report,
    inputs={},
    parameters={
        "mu": Float,
        "sigma": P_positive,
        "p0": P_positive,
        "t": P_nonnegative,
        "q": P_positive,
        "x_grid": P_grid,
    },
    outputs=[("report", DrawdownReport)],
    input_descriptions={},
    parameter_descriptions={
        "mu": "Drift of the geometric Brownian motion.",
        "sigma": "Volatility of the geometric Brownian motion.",
        "p0": "Initial price.",
        "t": "Horizon of the fixed-horizon quantities.",
        "q": "Rate of the exponential horizon.",
        "x_grid": _grid_description,
    },
    output_descriptions=_report_description,
    name="Geometric Brownian motion closed forms.",
    description="Closed forms of the future drawdown laws, moments and prices "
    "for the log-price of a geometric Brownian motion.",
    citations=[citations["kyprianou_fluctuations_2014"]],
)

plugin.methods.register_function(
    function=verify,
    inputs={},
    parameters={"config": Str},
    outputs=[("report", DrawdownReport)],
    input_descriptions={},
    parameter_descriptions={"config": "Path to a TOML or JSON experiment file."},
    output_descriptions=_report_description,
    name="Verify an experiment.",
    description="Run an experiment file and compare analytic, asymptotic and "
    "Monte Carlo values level by level.",
    citations=[citations["salmon_parallel_2011"]],
)

plugin.register_semantic_types(LevyProcess, DrawdownReport)

plugin.register_semantic_type_to_format(
    LevyProcess, artifact_format=LevyModelDirectoryFormat
)
plugin.register_semantic_type_to_format(
    DrawdownReport, artifact_format=DrawdownReportDirectoryFormat
)
plugin.register_formats(
    LevyModelFormat,
    LevyModelDirectoryFormat,
    DrawdownReportFormat,
    DrawdownReportDirectoryFormat,
)

importlib.import_module("q2_drawdown.types._transformer")
