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
from typing import Union

import mpmath as mp
import numpy as np
import pandas as pd
from scipy import optimize

from q2_drawdown.levy.cramer import _inversion_options
from q2_drawdown.levy.errors import (
    DomainError,
    NumericalWarning,
    NumericRange,
    PoleProximity,
    UnsupportedModel,
)
from q2_drawdown.levy.inversion import double_laplace_invert, laplace_invert
from q2_drawdown.levy.models import (
    ExponentialJumps,
    LevyModel,
    dual,
    phi,
    psi,
    psi_prime,
)
from q2_drawdown.levy.scale import (
    ScaleEvaluator,
    drawdown_passage_transform,
    drawdown_survival,
    drawdown_survival_exp_average,
    drawup_passage_transform,
    resolvent_inf,
    w_q_exp_integral,
)
from q2_drawdown.levy.simulation import mc_running_extrema
from q2_drawdown.levy.utils import quadrature, running_max_survival

EXACT_KINDS = ("over_ustar", "under_ustar", "over_dstar", "under_dstar")
CONVENTIONS = ("corrected", "printed")
RANGE_TOL = 1e-6
INVERSION_TOL = 1e-4
POLE_TOL = 1e-8
# Relative gap below which q and beta are treated as equal
COINCIDENCE = 1e-7
# Smallest barrier used for the drawdown resolvent at x = 0
BARRIER_FLOOR = 1e-10
# Stehfest terms for transforms that carry quadrature noise
DOUBLE_PRECISION_TERMS = 10

# Kind of the dual model sharing the tail of each kind
DUAL_EXACT_KIND = {
    "over_ustar": "under_dstar",
    "under_ustar": "over_dstar",
    "over_dstar": "under_ustar",
    "under_dstar": "over_ustar",
}


@dataclass(frozen=True)
class ExponentialHorizons:
    """t = e_q and s = e_beta; beta = 0 means s = inf, beta = inf means s = 0."""

    q: float
    beta: float = 0.0


@dataclass(frozen=True)
class FixedHorizons:
    t: float
    s: float = math.inf


@dataclass(frozen=True)
class ExactTailRequest:
    model: LevyModel
    kind: str
    horizon: Union[ExponentialHorizons, FixedHorizons]
    x: float


def _route(model: LevyModel, kind: str):
    """Return the spectrally negative model and kind carrying the tail."""
    if kind not in EXACT_KINDS:
        raise ValueError(
            f"Unknown kind '{kind}'. Must be one of: {', '.join(EXACT_KINDS)}."
        )
    if model.is_spectrally_negative:
        routed, routed_kind = model, kind
    elif model.is_spectrally_positive:
        routed, routed_kind = dual(model), DUAL_EXACT_KIND[kind]
    else:
        raise UnsupportedModel(
            "Exact laws are available for spectrally one-sided models only; got "
            f"a '{model.sign_tag}' model."
        )
    if routed.has_monotone_paths:
        raise UnsupportedModel("Exact laws need a model with non-monotone paths.")

    # U* kinds need the model to drift down, D* kinds to drift up
    mean = routed.mean
    if routed_kind.endswith("ustar") and not mean < 0:
        raise UnsupportedModel(
            f"'{kind}' is finite only when the model drifts to -inf; the "
            f"spectrally negative side has mean {mean}."
        )
    if routed_kind.endswith("dstar") and not mean > 0:
        raise UnsupportedModel(
            f"'{kind}' is finite only when the model drifts to +inf; the "
            f"spectrally negative side has mean {mean}."
        )
    return routed, routed_kind


def _check_range(value: float, what: str) -> float:
    if not -RANGE_TOL <= value <= 1 + RANGE_TOL:
        raise NumericRange(
            f"{what} assembled to {value:.10g}, outside [0, 1]; a quadrature or "
            "inversion step has failed."
        )
    return min(max(value, 0.0), 1.0)


def _phi_slope(model: LevyModel, q: float, beta: float, phi_q: float, phi_b: float):
    """(Phi(q) - Phi(beta)) / (q - beta), continuous across q = beta."""
    if abs(q - beta) <= COINCIDENCE * max(q, beta):
        return 1.0 / psi_prime(model, phi_q)
    return (phi_q - phi_b) / (q - beta)


def _over_ustar(model, q, beta, x):
    ev = ScaleEvaluator(model, q)
    if np.isinf(beta):
        return drawup_passage_transform(ev, x)
    rate = phi(model, beta)
    return (1.0 + q * w_q_exp_integral(ev, x, rate)) * drawup_passage_transform(ev, x)


def _under_ustar(model, q, beta, x, convention):
    if np.isinf(beta):
        return 0.0
    phi_q, phi_b = phi(model, q), phi(model, beta)
    if convention == "printed":
        value = q / (q - beta) * math.exp(-phi_b * x) * (phi_b - phi_q) / phi_q
        if not 0 <= value <= 1:
            warnings.warn(
                f"The displayed underline-U* law gives {value:.6g} at q={q}, "
                f"beta={beta}, x={x}, outside [0, 1].",
                NumericalWarning,
            )
        return value
    slope = _phi_slope(model, q, beta, phi_q, phi_b)
    return q * slope * math.exp(-phi_b * x) / phi_q


def _over_dstar(model, q, beta, x):
    if np.isinf(beta):
        return 0.0
    return drawdown_survival_exp_average(ScaleEvaluator(model, beta), x, phi(model, q))


def _under_dstar(model, q, beta, x):
    ev = ScaleEvaluator(model, q)
    barrier = max(x, BARRIER_FLOOR)
    passage = drawdown_passage_transform(ev, barrier)
    if np.isinf(beta):
        return passage
    lookahead = ScaleEvaluator(model, beta)
    resolvent = resolvent_inf(ev, barrier)
    return passage + q * resolvent.integrate(
        lambda y: drawdown_survival(lookahead, barrier - y)
    )


def tail_exp_horizons(
    model: LevyModel,
    kind: str,
    q: float,
    beta: float,
    x: float,
    convention: str = "corrected",
) -> float:
    """
    Tail P(F > x) of a future drawup or drawdown extremum at t = e_q, s = e_beta.

    Drawdown kinds return P(-F > x). beta = 0 gives s = inf and beta = inf
    gives s = 0. Spectrally positive models are evaluated through their dual.

    Args:
        model (LevyModel): Spectrally one-sided model.
        kind (str): over_ustar, under_ustar, over_dstar or under_dstar.
        q (float): Rate of the exponential horizon t.
        beta (float): Rate of the exponential lookahead s.
        x (float): Level, x >= 0.
        convention (str): "corrected" or "printed" for the underline-U* display.
    """
    if q <= 0:
        raise DomainError(f"q must be positive, got {q}.")
    if beta < 0:
        raise DomainError(f"beta must be non-negative, got {beta}.")
    if x < 0:
        raise DomainError(f"x must be non-negative, got {x}.")
    if convention not in CONVENTIONS:
        raise ValueError(
            f"Unknown convention '{convention}'. Must be one of: corrected, printed."
        )
    model, kind = _route(model, kind)

    if kind == "over_ustar":
        value = _over_ustar(model, q, beta, x)
    elif kind == "under_ustar":
        value = _under_ustar(model, q, beta, x, convention)
        if convention == "printed":
            return value
    elif kind == "over_dstar":
        value = _over_dstar(model, q, beta, x)
    else:
        value = _under_dstar(model, q, beta, x)
    return _check_range(value, f"P({kind} > {x})")


def tail_exp_q_infinite_s(model: LevyModel, kind: str, q: float, x: float) -> float:
    """Tail at t = e_q with an infinite lookahead."""
    return tail_exp_horizons(model, kind, q, 0.0, x)


def expected_running_max(
    model: LevyModel, t: float, method: str = None, n: int = 20000, seed: int = 0
) -> float:
    """E[sup_{s <= t} X_s] for a spectrally negative model."""
    if t == 0:
        return 0.0
    method = method or ("reflection" if model.is_brownian else "transform")
    if method == "reflection":
        if not model.is_brownian:
            raise UnsupportedModel("The reflection route needs a Brownian model.")
        return quadrature(
            lambda m: float(running_max_survival(m, model.drift, model.sigma, t)),
            0.0,
            np.inf,
            what="expected running maximum",
        )
    if method == "transform":
        if not model.is_spectrally_negative:
            raise UnsupportedModel(
                "The transform route needs a spectrally negative model."
            )
        # sup X_{e_q} is exponential with rate Phi(q)
        return laplace_invert(
            lambda q: 1 / (q * phi(model, q)), t, **_inversion_options(model)
        )
    if method == "mc":
        extrema = mc_running_extrema(model, [t], n, seed)
        return float(extrema["sup_x"].mean())
    raise ValueError(
        f"Unknown method '{method}'. Must be one of: reflection, transform, mc."
    )


def underline_ustar_fixed_t(
    model: LevyModel, t: float, x: float, method: str = None, **kwargs
) -> float:
    """P(underline-U*_t > x) = e^{-Phi(0) x} (1 - Phi(0) E[U_t])."""
    if not model.is_spectrally_negative or not model.mean < 0:
        raise UnsupportedModel(
            "The fixed-horizon underline-U* law needs a spectrally negative "
            "model drifting to -inf."
        )
    if t < 0 or x < 0:
        raise DomainError(f"t and x must be non-negative, got t={t}, x={x}.")
    phi0 = phi(model, 0.0)
    mean_drawup = expected_running_max(model, t, method=method, **kwargs)
    value = math.exp(-phi0 * x) * (1.0 - phi0 * mean_drawup)
    return _check_range(value, f"P(under_ustar_t > {x})")


def double_laplace(model: LevyModel, r, s_arg, which: str):
    """
    Double transform of P(underline-U*_T <= u) (which="U") or
    P(-underline-D*_T <= u) (which="D"): Laplace-Stieltjes in u at r and
    Laplace in T at s_arg.

    mpmath arguments are evaluated at the working precision.
    """
    if r <= 0 or s_arg <= 0:
        raise DomainError(f"r and s must be positive, got r={r}, s={s_arg}.")
    precise = isinstance(r, mp.mpf) or isinstance(s_arg, mp.mpf)
    if precise:
        r, s_arg = mp.mpf(r), mp.mpf(s_arg)
    phi_s = phi(model, s_arg)

    if which == "U":
        if not model.is_spectrally_negative or not model.mean < 0:
            raise UnsupportedModel(
                "L_U needs a spectrally negative model drifting to -inf."
            )
        phi0 = phi(model, mp.mpf(0) if precise else 0.0)
        return phi0 * (phi_s + r) / ((phi0 + r) * s_arg * phi_s)
    if which == "D":
        if not model.is_spectrally_negative or not model.mean > 0:
            raise UnsupportedModel(
                "L_D needs a spectrally negative model drifting to +inf."
            )
        if abs(r - phi_s) < POLE_TOL * max(1.0, abs(phi_s)):
            raise PoleProximity(
                f"r={r} is within {POLE_TOL:g} of Phi(s)={phi_s}; the displayed "
                "transform is not evaluable there."
            )
        psi_r = psi(model, r)
        return (
            r * model.mean * phi_s * (psi_r - s_arg)
            / (s_arg**2 * psi_r * (r - phi_s))
        )
    raise ValueError(f"which must be 'U' or 'D', got '{which}'.")


def invert_double_laplace_u(model: LevyModel, t: float, u: float, terms: int = 14):
    """P(underline-U*_t <= u) by inverting L_U in both arguments."""

    def transform(r, s_arg):
        # Laplace-Stieltjes in u; dividing by r gives the plain transform
        return double_laplace(model, r, s_arg, "U") / r

    return double_laplace_invert(transform, t, u, terms=terms)


class _RationalScale:
    """
    W^(q) = sum_i c_i e^{r_i x} in mpmath arithmetic.

    Available when psi is rational: Brownian motion with at most exponential
    downward jumps.
    """

    def __init__(self, model: LevyModel, q):
        q = mp.mpf(q)
        drift, half_var = mp.mpf(model.drift), mp.mpf(model.sigma) ** 2 / 2
        if model.jumps_down is None:
            # Highest degree first, as mpmath expects
            poly = [half_var, drift, -q]
            factor = [mp.mpf(1)]
        else:
            alpha, rate = mp.mpf(model.jumps_down.alpha), mp.mpf(model.jumps_down.rate)
            poly = [
                half_var,
                drift + half_var * alpha,
                drift * alpha - q - rate,
                -q * alpha,
            ]
            factor = [mp.mpf(1), alpha]
        while poly and poly[0] == 0:
            poly = poly[1:]
        roots = [mp.re(r) for r in mp.polyroots(poly, maxsteps=200, extraprec=60)]
        derivative = [c * (len(poly) - 1 - i) for i, c in enumerate(poly[:-1])]
        self.q = q
        self.roots = sorted(roots)
        self.weights = [
            mp.polyval(factor, r) / mp.polyval(derivative, r) for r in self.roots
        ]
        self.phi = self.roots[-1]

    def W(self, x):
        if x == 0:
            return mp.fsum(self.weights)
        return mp.fsum(c * mp.exp(r * x) for c, r in zip(self.weights, self.roots))

    def W_prime(self, x):
        return mp.fsum(
            c * r * mp.exp(r * x) for c, r in zip(self.weights, self.roots)
        )

    def exp_integral(self, x, rate):
        """int_0^x e^{-rate z} W(z) dz"""
        return mp.fsum(
            c * _expm1_ratio(r - rate, x) for c, r in zip(self.weights, self.roots)
        )

    def Z(self, x):
        return 1 + self.q * self.exp_integral(x, 0)

    def survival_modes(self):
        """P(D_{e_q} > y) = constant + sum_i b_i e^{r_i y}, Phi(q) mode removed."""
        constant = 1 - self.q * mp.fsum(c / r for c, r in zip(self.weights, self.roots))
        modes = [
            (self.q * c * (1 / r - 1 / self.phi), r)
            for c, r in zip(self.weights[:-1], self.roots[:-1])
        ]
        return constant, modes


def _expm1_ratio(a, x):
    """int_0^x e^{a z} dz"""
    return x if a == 0 else mp.expm1(a * x) / a


def _is_rational(model: LevyModel) -> bool:
    return model.jumps_down is None or isinstance(model.jumps_down, ExponentialJumps)


class _RationalTails:
    """Tails at exponential horizons in mpmath arithmetic, with cached scales.

    beta = 0 stands for s = inf and beta = mp.inf for s = 0.
    """

    def __init__(self, model: LevyModel, kind: str, x: float):
        if not _is_rational(model):
            raise UnsupportedModel(
                "Extended-precision tails need a rational Laplace exponent."
            )
        self.model, self.kind, self.x = model, kind, mp.mpf(x)
        self._scales = {}

    def scale(self, q):
        q = mp.mpf(q)
        if q not in self._scales:
            self._scales[q] = _RationalScale(self.model, q)
        return self._scales[q]

    def __call__(self, q, beta):
        x = self.x
        sq = self.scale(q)
        if self.kind in ("over_ustar", "under_ustar"):
            if beta == mp.inf:
                return 1 / sq.Z(x) if self.kind == "over_ustar" else mp.mpf(0)
            phi_b = self.scale(beta).phi
            if self.kind == "over_ustar":
                return (1 + q * sq.exp_integral(x, phi_b)) / sq.Z(x)
            # Phi'(q) is the partial-fraction weight of the Phi(q) mode
            slope = sq.weights[-1] if q == beta else (sq.phi - phi_b) / (q - beta)
            return q * slope * mp.exp(-phi_b * x) / sq.phi
        constant, modes = self._lookahead_survival(beta)
        if self.kind == "over_dstar":
            rate = sq.phi
            return constant + mp.fsum(
                b * mp.exp(r * x) * rate / (rate - r) for b, r in modes
            )
        return self._under_dstar(sq, q, constant, modes)

    def _lookahead_survival(self, beta):
        if beta == mp.inf:
            return mp.mpf(0), []
        if beta == 0:
            # P(D_inf > y) = 1 - psi'(0) W(y)
            s0 = self.scale(0)
            mean = mp.mpf(self.model.mean)
            return 1 - mean * s0.weights[-1], [
                (-mean * c, r) for c, r in zip(s0.weights[:-1], s0.roots[:-1])
            ]
        return self.scale(beta).survival_modes()

    def _under_dstar(self, sq, q, constant, modes):
        x = max(self.x, mp.mpf(BARRIER_FLOOR))
        w_x, w_prime_x = sq.W(x), sq.W_prime(x)
        passage = sq.Z(x) - q * w_x**2 / w_prime_x

        def against_resolvent(a):
            # int_[0,x] e^{a (x - y)} R(dy), R from the drawdown resolvent
            atom = sq.W(0) * w_x / w_prime_x * mp.exp(a * x)
            smooth = mp.fsum(
                c * (w_x * r / w_prime_x - 1) * mp.exp(a * x) * _expm1_ratio(r - a, x)
                for c, r in zip(sq.weights, sq.roots)
            )
            return atom + smooth

        integral = constant * against_resolvent(0) + mp.fsum(
            b * against_resolvent(r) for b, r in modes
        )
        return passage + q * integral


def invert_to_fixed(
    model: LevyModel, kind: str, t: float, s: float, x: float, terms: int = None
) -> float:
    """
    Tail at fixed horizons (t, s) by inverting the exponential-horizon laws.

    s = inf and s = 0 invert in q only; finite positive s inverts in (q, beta).
    Models with a rational Laplace exponent are inverted in extended
    precision. Other models support s in {0, inf} only, inverted with
    DOUBLE_PRECISION_TERMS terms in double precision.
    """
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}.")
    if s < 0 or x < 0:
        raise DomainError(f"s and x must be non-negative, got s={s}, x={x}.")
    routed, routed_kind = _route(model, kind)
    single = np.isinf(s) or s == 0

    if _is_rational(routed):
        tails = _RationalTails(routed, routed_kind, x)
        if single:
            lookahead = mp.mpf(0) if np.isinf(s) else mp.inf
            value = laplace_invert(
                lambda q: tails(q, lookahead) / q, t, terms=terms or 16
            )
        else:
            value = double_laplace_invert(
                lambda beta, q: tails(q, beta) / (q * beta), t, s, terms=terms or 14
            )
    elif single:
        beta = 0.0 if np.isinf(s) else math.inf
        value = laplace_invert(
            lambda q: tail_exp_horizons(routed, routed_kind, float(q), beta, x)
            / float(q),
            t,
            terms=DOUBLE_PRECISION_TERMS,
            f_precision=np.finfo(float).eps,
        )
    else:
        raise UnsupportedModel(
            "Inversion in both horizons needs a rational Laplace exponent; use "
            "s = inf or s = 0 for other jump laws."
        )

    if not -INVERSION_TOL <= value <= 1 + INVERSION_TOL:
        warnings.warn(
            f"Inverted tail {value:.6g} at t={t}, s={s}, x={x} lies outside [0, 1] "
            "beyond the inversion tolerance.",
            NumericalWarning,
        )
    return value


def invert_to_fixed_grid(
    model: LevyModel, kind: str, t: float, s: float, xs, terms: int = None
) -> pd.DataFrame:
    """Inverted tails on a grid, raw and isotonic (nonincreasing, in [0, 1])."""
    xs = np.asarray(xs, dtype=float)
    order = np.argsort(xs)
    raw = np.array([invert_to_fixed(model, kind, t, s, x, terms) for x in xs])
    fitted = optimize.isotonic_regression(raw[order], increasing=False).x
    isotonic = np.empty_like(raw)
    isotonic[order] = np.clip(fitted, 0.0, 1.0)
    if np.max(np.abs(raw - isotonic)) > RANGE_TOL:
        warnings.warn(
            "Raw inverted tails are not monotone in x; the isotonic column "
            "differs from the raw one.",
            NumericalWarning,
        )
    return pd.DataFrame({"x": xs, "raw": raw, "isotonic": isotonic})


def exact_tail(req: ExactTailRequest, convention: str = "corrected") -> float:
    horizon = req.horizon
    if isinstance(horizon, ExponentialHorizons):
        return tail_exp_horizons(
            req.model, req.kind, horizon.q, horizon.beta, req.x, convention
        )
    return invert_to_fixed(req.model, req.kind, horizon.t, horizon.s, req.x)


def exact_table(model: LevyModel, kind: str, horizon, xs) -> pd.DataFrame:
    xs = np.asarray(xs, dtype=float)
    if isinstance(horizon, FixedHorizons):
        return invert_to_fixed_grid(model, kind, horizon.t, horizon.s, xs)
    values = [
        exact_tail(ExactTailRequest(model, kind, horizon, float(x))) for x in xs
    ]
    return pd.DataFrame({"x": xs, "tail": values})
