# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial

from q2_drawdown.levy.errors import DomainError, NumericalWarning, UnsupportedModel
from q2_drawdown.levy.inversion import laplace_invert
from q2_drawdown.levy.models import (
    ExponentialJumps,
    LevyModel,
    TemperedParetoJumps,
    phi,
    psi,
)
from q2_drawdown.levy.utils import quadrature

METHODS = ("closed_form", "laplace_inversion")

# Relative gap below which two roots of psi(theta) = q count as repeated
ROOT_GAP = 1e-7


class ScaleEvaluator:
    """
    Scale functions W^(q), Z^(q) and W^(q)'+ of a spectrally negative model.

    Brownian motion and Brownian motion with exponential downward jumps have
    rational transforms 1/(psi - q), which are expanded in partial fractions.
    Every other spectrally negative model is inverted numerically.

    Args:
        model (LevyModel): Spectrally negative (or continuous) model.
        q (float): Killing rate, q >= 0.
        method (str): "closed_form", "laplace_inversion" or None to pick the
            closed form whenever it exists.
        terms (int): Gaver-Stehfest terms for the inversion route.
    """

    def __init__(
        self, model: LevyModel, q: float, method: str = None, terms: int = None
    ):
        if not model.is_spectrally_negative:
            raise UnsupportedModel(
                "Scale functions exist only for spectrally negative models; got "
                f"a '{model.sign_tag}' model."
            )
        if model.has_monotone_paths:
            raise UnsupportedModel(
                "Scale functions need a model with non-monotone paths."
            )
        if q < 0:
            raise DomainError(f"q must be non-negative, got {q}.")
        if method is not None and method not in METHODS:
            raise ValueError(
                f"Unknown method '{method}'. Must be one of: {', '.join(METHODS)}."
            )

        self.model = model
        self.q = float(q)
        self.phi_q = phi(model, self.q)

        has_closed_form = model.jumps_down is None or isinstance(
            model.jumps_down, ExponentialJumps
        )
        if method == "closed_form" and not has_closed_form:
            raise UnsupportedModel(
                "No closed form is available for this jump law; use "
                "method='laplace_inversion'."
            )
        self.method = method or (
            "closed_form" if has_closed_form else "laplace_inversion"
        )

        self.roots = self.weights = None
        self._linear = False
        if self.method == "closed_form":
            self._expand()

        # Double-precision transforms cannot carry 18 Stehfest terms
        tempered = isinstance(model.jumps_down, TemperedParetoJumps)
        self.terms = terms or (12 if tempered else 18)
        self._f_precision = np.finfo(float).eps if tempered else None
        self._w_cached = lru_cache(maxsize=4096)(self._w_inverted)

    # Partial fractions ------------------------------------------------------
    def _transform_polynomials(self):
        m = self.model
        quadratic = Polynomial([-self.q, m.drift, 0.5 * m.sigma**2])
        if m.jumps_down is None:
            return Polynomial([1.0]), quadratic
        alpha, rate = m.jumps_down.alpha, m.jumps_down.rate
        numerator = Polynomial([alpha, 1.0])
        return numerator, quadratic * numerator - Polynomial([0.0, rate])

    def _expand(self):
        numerator, denominator = self._transform_polynomials()
        roots = denominator.roots()
        roots = np.real_if_close(roots, tol=1e6)
        if np.iscomplexobj(roots):
            raise UnsupportedModel("psi(theta) = q has non-real roots.")
        roots = np.sort(roots.astype(float))

        # Brownian motion with a = 0 and q = 0 has the double root 0
        if self.model.is_brownian and len(roots) == 2 and self._repeated(roots):
            self._linear = True
            return

        if self._repeated(roots):
            warnings.warn(
                "psi(theta) = q has a repeated root; evaluating the scale "
                "function by Laplace inversion instead.",
                NumericalWarning,
            )
            self.method = "laplace_inversion"
            return

        # The largest root is Phi(q); the root finder's value is more precise
        roots[-1] = self.phi_q
        derivative = denominator.deriv()
        self.roots = roots
        self.weights = np.array([numerator(r) / derivative(r) for r in roots])

    @staticmethod
    def _repeated(roots) -> bool:
        gaps = np.diff(np.sort(roots))
        scale = max(1.0, float(np.max(np.abs(roots))))
        return bool(np.any(gaps < ROOT_GAP * scale))

    # Inversion ------------------------------------------------------------
    def transform(self, s):
        return 1.0 / (psi(self.model, s) - self.q)

    def _w_inverted(self, x: float) -> float:
        return laplace_invert(
            self.transform,
            x,
            terms=self.terms,
            shift=self.phi_q,
            f_precision=self._f_precision,
        )

    # Public evaluation ----------------------------------------------------
    @property
    def w_at_zero(self) -> float:
        """W^(q)(0): zero with a Gaussian part, 1/drift without one."""
        if self.model.sigma > 0:
            return 0.0
        if self.method == "closed_form":
            return 1.0 / self.model.drift
        # Limit along a geometric grid, linearly extrapolated
        h = 1e-3
        return 2.0 * self._w_cached(h / 2) - self._w_cached(h)

    def W(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            return np.where(x < 0, 0.0, self.W(np.maximum(x, 0.0)))
        if self._linear:
            return 2.0 * x / self.model.sigma**2
        if self.method == "closed_form":
            value = np.exp(np.multiply.outer(x, self.roots)) @ self.weights
            # The weights sum to W(0) only up to rounding
            return np.where(x == 0, self.w_at_zero, value)
        return self._vectorised(x, self._w_point)

    def _w_point(self, x: float) -> float:
        return self.w_at_zero if x == 0 else self._w_cached(float(x))

    def Z(self, x):
        x = np.asarray(x, dtype=float)
        if self.q == 0:
            return np.ones_like(x)
        if self.method == "closed_form":
            return 1.0 + self.q * self._integrated_modes(x, 0.0)
        return self._vectorised(x, self._z_point)

    def _z_point(self, x: float) -> float:
        if x <= 0:
            return 1.0
        return 1.0 + self.q * quadrature(
            self._w_point, 0.0, x, what="Z scale function"
        )

    def W_prime(self, x):
        """Right derivative of W^(q)."""
        x = np.asarray(x, dtype=float)
        if self._linear:
            return np.full_like(x, 2.0 / self.model.sigma**2)
        if self.method == "closed_form":
            return np.exp(np.multiply.outer(x, self.roots)) @ (
                self.weights * self.roots
            )
        return self._vectorised(x, self._w_prime_point)

    def _w_prime_point(self, x: float) -> float:
        # One-sided difference with one Richardson step
        h = 1e-3 * max(1.0, x)
        base = self._w_point(x)
        coarse = (self._w_point(x + h) - base) / h
        fine = (self._w_point(x + h / 2) - base) / (h / 2)
        return 2.0 * fine - coarse

    def _integrated_modes(self, x, rate: float):
        """sum_i c_i int_0^x e^{(r_i - rate) z} dz"""
        exponents = self.roots - rate
        out = np.zeros_like(x, dtype=float)
        for c, e in zip(self.weights, exponents):
            if abs(e) < 1e-14:
                out = out + c * x
            else:
                out = out + c * np.expm1(e * x) / e
        return out

    @staticmethod
    def _vectorised(x: np.ndarray, func: Callable):
        values = np.vectorize(func, otypes=[float])(x)
        return values if values.ndim else float(values)


def w_q(ev: ScaleEvaluator, x):
    if np.any(np.asarray(x) < 0):
        raise DomainError(f"W^(q) is evaluated on [0, inf); got x={x}.")
    return ev.W(x)


def z_q(ev: ScaleEvaluator, x):
    if np.any(np.asarray(x) < 0):
        raise DomainError(f"Z^(q) is evaluated on [0, inf); got x={x}.")
    return ev.Z(x)


def w_q_deriv_plus(ev: ScaleEvaluator, x):
    if np.any(np.asarray(x) < 0):
        raise DomainError(f"W^(q)' is evaluated on [0, inf); got x={x}.")
    return ev.W_prime(x)


def w_q_exp_integral(ev: ScaleEvaluator, x: float, rate: float) -> float:
    """int_0^x e^{-rate z} W^(q)(z) dz"""
    if x <= 0:
        return 0.0
    if ev._linear:
        return quadrature(lambda z: np.exp(-rate * z) * float(ev.W(z)), 0.0, x)
    if ev.method == "closed_form":
        return float(ev._integrated_modes(np.asarray(x, dtype=float), rate))
    return quadrature(
        lambda z: np.exp(-rate * z) * ev._w_point(z), 0.0, x, what="W integral"
    )


def resolvent_sup(ev: ScaleEvaluator, x: float, y: float) -> float:
    """Density of the resolvent of U killed at q, up to passage above x."""
    if not 0 <= y <= x:
        raise DomainError(f"Resolvent density requires 0 <= y <= x; got y={y}, x={x}.")
    return float(ev.W(x - y) / ev.Z(x))


def resolvent_sup_mass(ev: ScaleEvaluator, x: float) -> float:
    z = float(ev.Z(x))
    if ev.q == 0:
        return quadrature(lambda y: float(ev.W(y)), 0.0, x) / z
    return (z - 1.0) / (ev.q * z)


@dataclass(frozen=True)
class ResolventDensity:
    """Resolvent measure of the drawdown D killed at q, up to passage above x.

    The measure is an atom at zero plus an absolutely continuous part.
    """

    evaluator: ScaleEvaluator
    x: float
    w_x: float
    w_prime_x: float

    @property
    def atom(self) -> float:
        return self.evaluator.w_at_zero * self.w_x / self.w_prime_x

    def density(self, y):
        y = np.asarray(y, dtype=float)
        if np.any((y < 0) | (y > self.x)):
            raise DomainError(f"Resolvent density is supported on [0, {self.x}].")
        ev = self.evaluator
        return self.w_x * ev.W_prime(y) / self.w_prime_x - ev.W(y)

    def integrate(self, g: Callable) -> float:
        """int g(y) R(dy) over [0, x]"""
        smooth = quadrature(
            lambda y: g(y) * float(self.density(y)),
            0.0,
            self.x,
            what="resolvent integral",
        )
        return self.atom * g(0.0) + smooth

    @property
    def total_mass(self) -> float:
        ev = self.evaluator
        if ev.q == 0:
            return self.integrate(lambda y: 1.0)
        return self.w_x**2 / self.w_prime_x - (float(ev.Z(self.x)) - 1.0) / ev.q


def resolvent_inf(ev: ScaleEvaluator, x: float) -> ResolventDensity:
    if x <= 0:
        raise DomainError(f"Barrier must be positive, got {x}.")
    return ResolventDensity(
        evaluator=ev, x=x, w_x=float(ev.W(x)), w_prime_x=float(ev.W_prime(x))
    )


def drawup_passage_transform(ev: ScaleEvaluator, x: float) -> float:
    """E[exp(-q T^U_x)] for the first passage of the drawup above x."""
    return float(1.0 / ev.Z(x))


def drawdown_passage_transform(ev: ScaleEvaluator, x: float) -> float:
    """E[exp(-q T^D_x)] for the first passage of the drawdown above x."""
    w = float(ev.W(x))
    return float(ev.Z(x)) - ev.q * w * w / float(ev.W_prime(x))


def _survival_ratio(ev: ScaleEvaluator) -> float:
    # q / Phi(q), with its q -> 0 limit
    if ev.q > 0:
        return ev.q / ev.phi_q
    mean = ev.model.mean
    return mean if mean > 0 else 0.0


def _survival_modes(ev: ScaleEvaluator):
    """Constant and exponential modes of P(D_{e_q} > y) in closed form."""
    ratio = _survival_ratio(ev)
    phi_index = len(ev.roots) - 1
    constant = 1.0 - ev.q * float(np.sum(ev.weights / ev.roots))
    coefficients = np.array(
        [
            c * (ev.q / r - ratio)
            for i, (c, r) in enumerate(zip(ev.weights, ev.roots))
            if i != phi_index
        ]
    )
    return constant, coefficients, ev.roots[:phi_index]


def drawdown_survival(ev: ScaleEvaluator, y):
    """P(D_{e_q} > y) = Z^(q)(y) - (q / Phi(q)) W^(q)(y)."""
    y = np.asarray(y, dtype=float)
    if ev.method == "closed_form" and not ev._linear and ev.q > 0:
        constant, coefficients, roots = _survival_modes(ev)
        value = constant + np.exp(np.multiply.outer(y, roots)) @ coefficients
    else:
        value = ev.Z(y) - _survival_ratio(ev) * ev.W(y)
    value = np.where(y < 0, 1.0, value)
    return float(value) if value.ndim == 0 else value


def drawdown_survival_exp_average(ev: ScaleEvaluator, x: float, rate: float) -> float:
    """int_0^inf rate e^{-rate z} P(D_{e_q} > x + z) dz"""
    if ev.method == "closed_form" and not ev._linear and ev.q > 0:
        constant, coefficients, roots = _survival_modes(ev)
        if np.all(roots < rate):
            return float(
                constant
                + np.sum(coefficients * np.exp(roots * x) * rate / (rate - roots))
            )
    return quadrature(
        lambda z: rate * np.exp(-rate * z) * drawdown_survival(ev, x + z),
        0.0,
        np.inf,
        what="averaged drawdown survival",
    )


def scale_table(ev: ScaleEvaluator, xs) -> pd.DataFrame:
    xs = np.asarray(xs, dtype=float)
    return pd.DataFrame(
        {
            "x": xs,
            "Wq": np.atleast_1d(w_q(ev, xs)),
            "Zq": np.atleast_1d(z_q(ev, xs)),
            "Wq_prime": np.atleast_1d(w_q_deriv_plus(ev, xs)),
        }
    )
