# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import mpmath as mp
import numpy as np
from scipy import special

from q2_drawdown.levy.errors import DomainError, NumericalWarning, PrecisionLoss

LN2 = math.log(2.0)

# Abate-Whitt parameters for the Euler-accelerated Fourier series
EULER_A = 18.4
EULER_N = 15
EULER_M = 11


@dataclass(frozen=True)
class InversionResult:
    value: float
    method: str
    terms: int
    error_estimate: float


@lru_cache(maxsize=None)
def stehfest_weights(terms: int) -> tuple:
    """Gaver-Stehfest weights V_1..V_N as mpmath numbers."""
    if terms < 2 or terms % 2:
        raise ValueError(f"Number of terms must be even and >= 2, got {terms}.")
    half = terms // 2
    with mp.workdps(max(30, 2 * terms + 10)):
        weights = []
        for k in range(1, terms + 1):
            total = mp.mpf(0)
            for j in range((k + 1) // 2, min(k, half) + 1):
                total += (
                    mp.mpf(j) ** half
                    * mp.factorial(2 * j)
                    / (
                        mp.factorial(half - j)
                        * mp.factorial(j)
                        * mp.factorial(j - 1)
                        * mp.factorial(k - j)
                        * mp.factorial(2 * j - k)
                    )
                )
            weights.append((-1) ** (k + half) * total)
    return tuple(weights)


def _stehfest(F: Callable, t: float, terms: int, shift: float, f_precision):
    weights = stehfest_weights(terms)
    with mp.workdps(max(30, 2 * terms + 10)):
        scale = mp.log(2) / mp.mpf(t)
        total = mp.mpf(0)
        magnitude = mp.mpf(0)
        precision = f_precision
        for k, weight in enumerate(weights, 1):
            node = k * scale + shift
            try:
                value = F(node)
            except (TypeError, AttributeError):
                # Transform built on numpy ufuncs; evaluate in double precision
                value = F(float(node))
            if precision is None:
                # Values returned in mpmath carry the working precision
                precision = (
                    float(mp.eps) if isinstance(value, mp.mpf) else np.finfo(float).eps
                )
            value = mp.mpf(value)
            total += weight * value
            magnitude += abs(weight * value)
        growth = mp.exp(shift * t)
        result = float(scale * total * growth)
        error = float(magnitude * precision * scale * growth)
    return result, error


def _euler_partial_sums(F: Callable, t: float, shift: float, count: int):
    a = EULER_A
    front = math.exp(a / 2.0) / t
    head = 0.5 * front * complex(F(a / (2.0 * t) + shift)).real
    sums = []
    running = head
    for k in range(1, count + 1):
        node = complex(a, 2.0 * k * math.pi) / (2.0 * t) + shift
        running += front * (-1) ** k * complex(F(node)).real
        sums.append(running)
    return sums


def _binomial_average(sums, n: int, m: int) -> float:
    # Average of partial sums s_n .. s_{n+m} with binomial weights
    coefficients = special.comb(m, np.arange(m + 1)) / 2.0**m
    return float(np.dot(coefficients, sums[n - 1 : n + m]))


def _euler(F: Callable, t: float, shift: float):
    try:
        sums = _euler_partial_sums(F, t, shift, EULER_N + EULER_M + 1)
    except (TypeError, ValueError, DomainError) as e:
        raise PrecisionLoss(
            "The transform cannot be evaluated at complex arguments, which the "
            "Euler inversion requires."
        ) from e
    value = _binomial_average(sums, EULER_N, EULER_M)
    neighbour = _binomial_average(sums, EULER_N + 1, EULER_M)
    growth = math.exp(shift * t)
    return value * growth, abs(value - neighbour) * growth


def laplace_invert(
    F: Callable,
    t: float,
    terms: int = 18,
    method: str = "auto",
    shift: float = 0.0,
    tol: float = 1e-6,
    atol: float = 1e-12,
    f_precision: float = None,
    full_output: bool = False,
):
    """
    Numerically inverts the Laplace transform F at time t.

    Args:
        F (Callable): Transform to invert. Stehfest evaluates it on the real
            line, Euler on a vertical line in the complex plane.
        t (float): Positive time at which the original function is wanted.
        terms (int): Even number of Gaver-Stehfest terms.
        method (str): "stehfest", "euler", or "auto". Auto uses Stehfest and
            falls back to Euler when cancellation is too severe.
        shift (float): Abscissa c such that F is analytic for Re(s) > c.
            The inversion runs on F(s + c) and rescales by exp(c t).
        tol (float): Relative tolerance for the error estimate.
        atol (float): Absolute floor used when the result is near zero.
        f_precision (float): Relative precision of the values F returns.
            Inferred from the returned type when not given.
        full_output (bool): Return an InversionResult instead of a float.

    Returns:
        float or InversionResult: The approximate value f(t).
    """
    if t <= 0:
        raise DomainError(f"Inversion time must be positive, got {t}.")
    if method not in ("auto", "stehfest", "euler"):
        raise ValueError(
            f"Unknown inversion method '{method}'. Must be one of: auto, "
            "stehfest, euler."
        )

    result = None
    if method in ("auto", "stehfest"):
        value, error = _stehfest(F, t, terms, shift, f_precision)
        if error <= tol * max(abs(value), atol):
            result = InversionResult(value, "stehfest", terms, error)
        elif method == "stehfest":
            raise PrecisionLoss(
                f"Gaver-Stehfest inversion with {terms} terms lost precision at "
                f"t={t}: estimated error {error:.3g} against value {value:.6g}. "
                "Evaluate the transform at higher precision or use fewer terms."
            )
        else:
            warnings.warn(
                f"Gaver-Stehfest inversion lost precision at t={t} (estimated "
                f"error {error:.3g}); falling back to Euler summation.",
                NumericalWarning,
            )

    if result is None:
        value, error = _euler(F, t, shift)
        if error > tol * max(abs(value), atol):
            warnings.warn(
                f"Euler inversion at t={t} has an estimated error of {error:.3g}, "
                f"above the requested tolerance.",
                NumericalWarning,
            )
        result = InversionResult(value, "euler", 2 * EULER_N + EULER_M, error)

    return result if full_output else result.value


def double_laplace_invert(F: Callable, t: float, u: float, terms: int = 14) -> float:
    """
    Inverts a two-dimensional Laplace transform F(r, s) at (u, t).

    Both directions use Gaver-Stehfest nodes, so F is called with mpmath
    numbers and must keep the working precision (2 * terms + 10 digits at
    least) for the nested sums to survive cancellation.
    """
    if t <= 0 or u <= 0:
        raise DomainError(f"Inversion point must be positive, got t={t}, u={u}.")
    weights = stehfest_weights(terms)
    with mp.workdps(max(40, 3 * terms + 10)):
        scale_t = mp.log(2) / mp.mpf(t)
        scale_u = mp.log(2) / mp.mpf(u)
        total = mp.mpf(0)
        for j, weight_r in enumerate(weights, 1):
            r = j * scale_u
            inner = mp.fsum(
                weight_s * F(r, k * scale_t) for k, weight_s in enumerate(weights, 1)
            )
            total += weight_r * inner
        return float(scale_t * scale_u * total)
