# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special

from q2_drawdown.levy.errors import (
    BoundaryProportion,
    DomainError,
    EffectiveSampleSizeError,
    UnsupportedModel,
)
from q2_drawdown.levy.inversion import laplace_invert
from q2_drawdown.levy.models import (
    LevyModel,
    TemperedParetoJumps,
    conjugate,
    cramer_gamma,
    dual,
    phi,
    psi,
    psi_prime,
    psi_second,
)
from q2_drawdown.levy.simulation import FunctionalKind, mc_samples
from q2_drawdown.levy.utils import (
    gaussian_positive_tilt,
    quadrature,
    running_max_mgf,
)

MOMENT_METHODS = ("reflection", "kendall", "transform", "mc")
BOUNDARY_TOL = 1e-3
ESS_FLOOR = 100

# Tail kinds of drawdown functionals and the drawup kind of the dual model
# whose tail they share
DUAL_KIND = {
    FunctionalKind.under_dstar: FunctionalKind.over_ustar,
    FunctionalKind.over_dstar: FunctionalKind.under_ustar,
    FunctionalKind.dstar: FunctionalKind.ustar,
}


class LadderExponent:
    """
    Laplace exponent kappa(beta, theta) of the ascending ladder process.

    Spectrally negative: kappa = Phi(beta) + theta. Spectrally positive:
    kappa = (beta - psi_hat(theta)) / (Phi_hat(beta) - theta), where the
    hats refer to the dual model.
    """

    def __init__(self, model: LevyModel):
        if not (model.is_spectrally_negative or model.is_spectrally_positive):
            raise UnsupportedModel(
                "Ladder exponents are only available in closed form for "
                "spectrally one-sided models."
            )
        self.model = model
        self._dual = None if model.is_spectrally_negative else dual(model)

    def __call__(self, beta: float, theta: float) -> float:
        if self._dual is None:
            return phi(self.model, beta) + theta
        phi_hat = phi(self._dual, beta)
        if abs(phi_hat - theta) < 1e-10 * max(1.0, abs(theta)):
            # Removable singularity at theta = Phi_hat(beta)
            return psi_prime(self._dual, phi_hat)
        return (beta - psi(self._dual, theta)) / (phi_hat - theta)

    def supremum_transform(self, u: float) -> float:
        """E[exp(-u U_inf)] = kappa(0, 0) / kappa(0, u)."""
        return self(0.0, 0.0) / self(0.0, u)


@dataclass(frozen=True)
class TailAsymptote:
    rate: float
    poly_exponent: float
    prefactor: float
    regime: str
    kind: str
    t: float
    s: float

    def approx(self, x):
        x = np.asarray(x, dtype=float)
        return self.prefactor * x ** (-self.poly_exponent) * np.exp(-self.rate * x)


def cramer_constant(model: LevyModel) -> float:
    gamma = cramer_gamma(model)
    if model.is_spectrally_negative:
        return 1.0
    if model.is_spectrally_positive:
        return abs(psi_prime(model, 0.0)) / psi_prime(model, gamma)
    raise UnsupportedModel(
        "The Cramer constant is only implemented for spectrally one-sided models."
    )


def hoglund_constant(model: LevyModel, v: float) -> float:
    """Prefactor of the x^{-1/2} e^{-gamma(v) x} decay of P(U_s > x), x = v s."""
    if not model.is_spectrally_negative:
        raise UnsupportedModel(
            "The Hoglund constant is only implemented for spectrally negative models."
        )
    triple = conjugate(model, v)
    xi, eta = triple.xi_v, triple.eta_v
    phi_eta = phi(model, eta)
    return (
        phi_eta
        * math.exp(phi_eta - xi)
        / (eta * xi * math.sqrt(2.0 * math.pi * psi_second(model, xi)))
    )


def wiener_hopf_moments(model: LevyModel, c: float, q: float):
    """(E[exp(c U_{e_q})], E[exp(-c D_{e_q})]) for a one-sided model."""
    if q <= 0:
        raise DomainError(f"q must be positive, got {q}.")
    if model.is_spectrally_negative:
        phi_q = phi(model, q)
        if c >= phi_q:
            raise DomainError(f"E[exp(c U)] is infinite for c={c} >= Phi(q)={phi_q}.")
        up = phi_q / (phi_q - c)
        down = q * (phi_q - c) / ((q - psi(model, c)) * phi_q)
        return up, down
    if model.is_spectrally_positive:
        # U and D swap roles under the dual; the exponents change sign
        return _dual_up(model, c, q), _dual_down(model, c, q)
    raise UnsupportedModel("Wiener-Hopf factors need a spectrally one-sided model.")


def _dual_up(model: LevyModel, c: float, q: float) -> float:
    phi_hat = phi(dual(model), q)
    return q * (phi_hat + c) / ((q - psi(model, c)) * phi_hat)


def _dual_down(model: LevyModel, c: float, q: float) -> float:
    phi_hat = phi(dual(model), q)
    return phi_hat / (phi_hat + c)


def kendall_integral(model: LevyModel, q: float, c: float) -> float:
    """int_0^inf e^{-q t} E[exp(c X_t) X_t^+] t^{-1} dt for Brownian motion.

    Kendall's identity gives 1 / (Phi(q) - c).
    """
    if not model.is_brownian:
        raise UnsupportedModel("The Kendall integral is evaluated for Brownian motion.")
    a, var = model.drift, model.sigma**2

    # t = u^2 removes the t^{-1/2} behaviour at the origin
    def integrand(u):
        t = u * u
        if t == 0:
            return 0.0
        return (
            2.0 * math.exp(-q * t) * gaussian_positive_tilt(c, a * t, var * t) / u
        )

    return quadrature(integrand, 0.0, np.inf, what="Kendall integral")


def _kendall_moment_U(model: LevyModel, c: float, t: float) -> float:
    a, var = model.drift, model.sigma**2

    def integrand(u):
        s = u * u
        return 2.0 * gaussian_positive_tilt(c, a * s, var * s) / u if s else 0.0

    return 1.0 + c * quadrature(integrand, 0.0, math.sqrt(t), what="U moment")


def _kendall_moment_D(model: LevyModel, c: float, t: float) -> float:
    a, var = model.drift, model.sigma**2
    rate = psi(model, -c)

    def integrand(u):
        s = u * u
        if s == 0:
            return 0.0
        return (
            2.0 * math.exp((t - s) * rate) * gaussian_positive_tilt(0.0, a * s, var * s)
        ) / u

    return math.exp(t * rate) + c * quadrature(
        integrand, 0.0, math.sqrt(t), what="D moment"
    )


def _inversion_options(model: LevyModel) -> dict:
    # Tempered jump laws evaluate in double precision only
    tempered = isinstance(model.jumps_down, TemperedParetoJumps) or isinstance(
        model.jumps_up, TemperedParetoJumps
    )
    if tempered:
        return {"terms": 12, "f_precision": np.finfo(float).eps}
    return {"terms": 18}


def _transform_moment_U(model: LevyModel, c: float, t: float) -> float:
    # int_0^inf e^{-q t} E[exp(c U_t)] dt = Phi(q) / (q (Phi(q) - c))
    def transform(q):
        phi_q = phi(model, q)
        return phi_q / (q * (phi_q - c))

    shift = max(psi(model, c), 0.0) if c > 0 else 0.0
    return laplace_invert(transform, t, shift=shift, **_inversion_options(model))


def _transform_moment_D(model: LevyModel, c: float, t: float) -> float:
    # int_0^inf e^{-q t} E[exp(c D_t)] dt = (1 + c / Phi(q)) / (q - psi(-c))
    rate = psi(model, -c)

    def transform(q):
        return (1.0 + c / phi(model, q)) / (q - rate)

    shift = max(rate, 0.0)
    return laplace_invert(transform, t, shift=shift, **_inversion_options(model))


def _mc_moment(model, column: str, c: float, t: float, n: int, seed: int) -> float:
    samples = mc_samples(model, t, 0.0, n, seed)
    return float(np.mean(np.exp(c * samples[column])))


def _check_moment_args(model: LevyModel, c: float, method: str):
    if method not in MOMENT_METHODS:
        raise ValueError(
            f"Unknown method '{method}'. Must be one of: {', '.join(MOMENT_METHODS)}."
        )
    if method in ("reflection", "kendall") and not model.is_brownian:
        raise UnsupportedModel(
            f"Method '{method}' is only available for Brownian motion."
        )


def exp_moment_U(
    model: LevyModel,
    c: float,
    t: float,
    method: str = None,
    n: int = 20000,
    seed: int = 0,
) -> float:
    """
    E[exp(c U_t)] for the drawup U_t = X_t - inf_{s <= t} X_s.

    Args:
        model (LevyModel): One-sided model, or any model with method="mc".
        c (float): Exponent; c must lie in the exponent domain.
        t (float): Time.
        method (str): "reflection" (Brownian reference), "kendall" (Brownian
            cross-check), "transform" (Laplace inversion of the Wiener-Hopf
            factor) or "mc". Defaults to reflection for Brownian motion and
            transform otherwise.
        n, seed: Paths and seed for method="mc".
    """
    method = method or ("reflection" if model.is_brownian else "transform")
    _check_moment_args(model, c, method)
    psi(model, c)
    if c == 0 or t == 0:
        return 1.0
    if method == "reflection":
        return running_max_mgf(model.drift, model.sigma, c, t)
    if method == "kendall":
        return _kendall_moment_U(model, c, t)
    if method == "mc":
        return _mc_moment(model, "drawup", c, t, n, seed)
    if model.is_spectrally_negative:
        return _transform_moment_U(model, c, t)
    if model.is_spectrally_positive:
        # U_t of X is the drawdown of the dual model
        return _transform_moment_D(dual(model), c, t)
    raise UnsupportedModel("Transform moments need a spectrally one-sided model.")


def exp_moment_D(
    model: LevyModel,
    c: float,
    t: float,
    method: str = None,
    n: int = 20000,
    seed: int = 0,
) -> float:
    """E[exp(c D_t)] for the drawdown D_t = sup_{s <= t} X_s - X_t."""
    method = method or ("reflection" if model.is_brownian else "transform")
    _check_moment_args(model, c, method)
    psi(model, -c)
    if c == 0 or t == 0:
        return 1.0
    if method == "reflection":
        return running_max_mgf(-model.drift, model.sigma, c, t)
    if method == "kendall":
        return _kendall_moment_D(model, c, t)
    if method == "mc":
        return _mc_moment(model, "drawdown", c, t, n, seed)
    if model.is_spectrally_negative:
        return _transform_moment_D(model, c, t)
    if model.is_spectrally_positive:
        return _transform_moment_U(dual(model), c, t)
    raise UnsupportedModel("Transform moments need a spectrally one-sided model.")


def _regime(model: LevyModel, gamma: float, x: float, s: float):
    """Decay rate, polynomial exponent, constant and regime label."""
    if np.isinf(s):
        return gamma, 0.0, cramer_constant(model), "cramer"
    if s <= 0:
        raise DomainError(f"Lookahead must be positive, got {s}.")
    v = x / s
    boundary = psi_prime(model, gamma)
    if abs(v - boundary) < BOUNDARY_TOL * boundary:
        raise BoundaryProportion(
            f"Proportion v={v} is too close to psi'(gamma)={boundary}; neither "
            "the Cramer nor the Hoglund regime applies."
        )
    if v < boundary:
        return gamma, 0.0, cramer_constant(model), "cramer"
    rate = conjugate(model, v).gamma_v
    return rate, 0.5, hoglund_constant(model, v), "hoglund"


def tail_approx(
    model: LevyModel,
    kind: str,
    t: float,
    s: float,
    x: float,
    moment_method: str = None,
) -> TailAsymptote:
    """
    Large-x asymptote of the tail of a future drawup or drawdown functional.

    Drawdown kinds are evaluated on the dual model, whose drawup kinds
    carry the same tail.
    """
    kind = FunctionalKind(kind)
    if kind in DUAL_KIND:
        asymptote = tail_approx(dual(model), DUAL_KIND[kind], t, s, x, moment_method)
        return TailAsymptote(
            asymptote.rate,
            asymptote.poly_exponent,
            asymptote.prefactor,
            asymptote.regime,
            kind.value,
            t,
            s,
        )
    if kind not in (
        FunctionalKind.over_ustar,
        FunctionalKind.under_ustar,
        FunctionalKind.ustar,
    ):
        raise UnsupportedModel(
            f"No tail asymptote is available for kind '{kind.value}'."
        )

    gamma = cramer_gamma(model)
    rate, poly, constant, regime = _regime(model, gamma, x, s)
    if kind == FunctionalKind.ustar:
        moment = 1.0
    elif kind == FunctionalKind.over_ustar:
        moment = exp_moment_U(model, rate, t, method=moment_method)
    else:
        # underline U*_t <= U*_0 pathwise, so the drawdown enters with -rate
        moment = exp_moment_D(model, -rate, t, method=moment_method)
    return TailAsymptote(rate, poly, constant * moment, regime, kind.value, t, s)


def asymptotic_table(
    model: LevyModel, kind: str, t: float, s: float, xs, moment_method: str = None
) -> pd.DataFrame:
    rows = []
    for x in np.asarray(xs, dtype=float):
        asymptote = tail_approx(model, kind, t, s, x, moment_method)
        rows.append(
            {
                "x": x,
                "approx_prob": float(asymptote.approx(x)),
                "rate": asymptote.rate,
                "prefactor": asymptote.prefactor,
                "regime": asymptote.regime,
            }
        )
    columns = ["x", "approx_prob", "rate", "prefactor", "regime"]
    return pd.DataFrame(rows, columns=columns)


def conditional_tilt(model: LevyModel, kind: str, v: float = None):
    """
    Tilt realising the law of X_t given a large future drawup.

    Returns (exponent, functional): the weights are exp(exponent * F) with F
    the drawup (over kinds) or the drawdown (under kinds) at t.
    """
    kind = FunctionalKind(kind)
    gamma = cramer_gamma(model)
    rate = gamma
    if v is not None:
        boundary = psi_prime(model, gamma)
        if v > boundary:
            rate = conjugate(model, v).gamma_v
    if kind == FunctionalKind.over_ustar:
        return rate, "drawup"
    if kind == FunctionalKind.under_ustar:
        return -rate, "drawdown"
    raise UnsupportedModel(f"No conditional tilt is defined for kind '{kind.value}'.")


@dataclass(frozen=True)
class TiltedLaw:
    table: pd.DataFrame
    mean: float
    ess: float


def tilted_conditional_law(
    model: LevyModel,
    t: float,
    tilt: float,
    kind: str,
    grid,
    n: int = 20000,
    seed: int = 0,
    ess_floor: float = ESS_FLOOR,
    **mc_kwargs,
) -> TiltedLaw:
    """
    Law of X_t under the measure with density exp(tilt F) / E[exp(tilt F)].

    F is the drawup U_t (kind="drawup") or the drawdown D_t
    (kind="drawdown"). The law is estimated by self-normalised importance
    weights over simulated paths.
    """
    if kind not in ("drawup", "drawdown"):
        raise ValueError(f"Kind must be 'drawup' or 'drawdown', got '{kind}'.")
    samples = mc_samples(model, t, 0.0, n, seed, **mc_kwargs)
    log_weights = tilt * samples[kind].to_numpy()
    # Normalise in log space so that large tilts do not overflow
    weights = np.exp(log_weights - special.logsumexp(log_weights))
    ess = 1.0 / float(np.sum(weights**2))
    if ess < ess_floor:
        raise EffectiveSampleSizeError(
            f"Effective sample size {ess:.1f} is below the floor {ess_floor}; "
            "increase the number of paths or reduce the tilt."
        )
    x_t = samples["x_t"].to_numpy()
    grid = np.sort(np.asarray(grid, dtype=float))
    order = np.argsort(x_t)
    cumulative = np.cumsum(weights[order])
    positions = np.searchsorted(x_t[order], grid, side="right")
    cdf = np.where(positions > 0, cumulative[np.maximum(positions - 1, 0)], 0.0)
    table = pd.DataFrame({"x": grid, "cdf": np.minimum(cdf, 1.0)})
    return TiltedLaw(table=table, mean=float(np.dot(weights, x_t)), ess=ess)
