# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
import os
import warnings

import numpy as np
from scipy import integrate, special

from q2_drawdown.levy.errors import QuadratureError

THREADS_ENV = "Q2_DRAWDOWN_THREADS"
SQRT_2PI = math.sqrt(2.0 * math.pi)


def colorify(string: str):
    return "%s%s%s" % ("\033[1;32m", string, "\033[0m")


def resolve_threads(threads: int = None) -> int:
    # Explicit argument wins over the environment, which wins over one thread
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, 1))
    if threads < 1:
        raise ValueError(f"Number of threads must be at least 1, got {threads}.")
    return threads


def quadrature(func, a, b, what: str = "integral", **kwargs) -> float:
    """
    Wraps scipy.integrate.quad so that accuracy warnings surface as errors.

    Args:
        func: Integrand.
        a, b: Integration limits, either may be infinite.
        what (str): Name of the quantity, used in the error message.
        **kwargs: Forwarded to scipy.integrate.quad.

    Returns:
        float: Value of the integral.
    """
    kwargs.setdefault("limit", 200)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(func, a, b, **kwargs)
        except integrate.IntegrationWarning as e:
            raise QuadratureError(
                f"Quadrature for the {what} did not reach the requested "
                f"accuracy: {e}"
            ) from e
    return value


def normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / SQRT_2PI


def running_max_survival(m, drift: float, sigma: float, t: float):
    """P(sup_{s<=t} (drift s + sigma B_s) > m) for m >= 0."""
    m = np.asarray(m, dtype=float)
    if t == 0:
        return np.where(m < 0, 1.0, 0.0)
    scale = sigma * math.sqrt(t)
    first = special.log_ndtr((-m + drift * t) / scale)
    second = 2.0 * drift * m / sigma**2 + special.log_ndtr((-m - drift * t) / scale)
    return np.minimum(np.exp(np.logaddexp(first, second)), 1.0)


def running_max_mgf(drift: float, sigma: float, c: float, t: float) -> float:
    """E[exp(c sup_{s<=t} (drift s + sigma B_s))] for real c.

    Uses E[e^{cM}] = 1 + c int_0^inf e^{cm} P(M > m) dm.
    """
    if t == 0 or c == 0:
        return 1.0
    integral = quadrature(
        lambda m: math.exp(c * m) * float(running_max_survival(m, drift, sigma, t)),
        0.0,
        np.inf,
        what="running maximum moment",
    )
    return 1.0 + c * integral


def gaussian_positive_tilt(c: float, mean: float, var: float) -> float:
    """E[exp(cY) Y^+] for Y ~ N(mean, var)."""
    if var == 0:
        return math.exp(c * mean) * max(mean, 0.0)
    sd = math.sqrt(var)
    shifted = mean + c * var
    return math.exp(c * mean + 0.5 * c * c * var) * (
        shifted * special.ndtr(shifted / sd) + sd * normal_pdf(shifted / sd)
    )


def exp_erfc(exponent, argument):
    """exp(exponent) * erfc(argument) without overflow in either factor."""
    exponent = np.asarray(exponent, dtype=float)
    argument = np.asarray(argument, dtype=float)
    # erfc(z) = erfcx(z) e^{-z^2} is stable for z >= 0 only
    positive = argument >= 0
    with np.errstate(over="ignore", invalid="ignore"):
        stable = np.exp(exponent - np.square(argument)) * special.erfcx(
            np.abs(argument)
        )
        direct = np.exp(exponent) * special.erfc(argument)
    return np.where(positive, stable, direct)
