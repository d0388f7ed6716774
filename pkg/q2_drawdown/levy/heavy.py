# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy import optimize

from q2_drawdown.levy.errors import (
    ConditionViolated,
    NumericalWarning,
    UnsupportedModel,
    Underflow,
)
from q2_drawdown.levy.inversion import laplace_invert
from q2_drawdown.levy.models import (
    ExponentialJumps,
    LevyModel,
    TemperedParetoJumps,
    _tempered_mass,
    dual,
    phi,
    psi,
)
from q2_drawdown.levy.simulation import mc_running_extrema
from q2_drawdown.levy.utils import quadrature

UNDERFLOW_GUARD = 1e-300
ATOM_LEVEL = 1e8
CONVENTIONS = ("corrected", "printed")

# Inversion settings for transforms built on a double-precision Phi
HEAVY_INVERSION = {"terms": 12, "f_precision": np.finfo(float).eps}


@dataclass(frozen=True)
class TailMeasure:
    """Tail u -> G(u, inf) of a measure on (0, inf), with its density if known."""

    tail: Callable
    alpha: float
    density: Optional[Callable] = None

    @classmethod
    def exponential(cls, alpha: float) -> "TailMeasure":
        return cls(
            tail=lambda u: np.exp(-alpha * np.asarray(u, dtype=float)),
            alpha=alpha,
            density=lambda u: alpha * np.exp(-alpha * np.asarray(u, dtype=float)),
        )

    @classmethod
    def pareto(cls, p: float) -> "TailMeasure":
        return cls(
            tail=lambda u: (1.0 + np.asarray(u, dtype=float)) ** -p,
            alpha=0.0,
            density=lambda u: p * (1.0 + np.asarray(u, dtype=float)) ** (-p - 1.0),
        )

    @classmethod
    def tempered_pareto(cls, alpha: float, rate: float = 1.0) -> "TailMeasure":
        law = TemperedParetoJumps(rate=rate, alpha=alpha)
        return cls(tail=law.tail, alpha=alpha, density=law.density)

    @classmethod
    def from_model(cls, model: LevyModel) -> "TailMeasure":
        law = model.jumps_up
        if law is None:
            raise UnsupportedModel("The model has no upward jump component.")
        alpha = law.alpha
        return cls(tail=law.tail, alpha=alpha, density=law.density)

    def __call__(self, u):
        return self.tail(u)


@dataclass(frozen=True)
class ClassDiagnostic:
    table: pd.DataFrame
    two_m0: float
    stable: bool


def _convolution_ratio(tm: TailMeasure, u: float, mass: float) -> float:
    """G*G(u, inf) / G(u, inf) for the normalised measure G / mass."""
    tail_u = float(tm.tail(u))

    # Scaled by G(u) so that quadrature tolerances stay relative
    def integrand(y):
        return float(tm.tail(u - y)) / tail_u * float(tm.density(y)) / mass

    # Split at the midpoint where the two factors exchange roles
    inner = quadrature(integrand, 0.0, u / 2, what="convolution tail") + quadrature(
        integrand, u / 2, u, what="convolution tail"
    )
    return 1.0 + inner


def class_diagnostic(
    tm: TailMeasure,
    y_grid,
    u_max: float,
    points: int = 8,
    tolerance: float = 0.05,
    two_m0: float = None,
) -> ClassDiagnostic:
    """
    Numerical check of convolution equivalence along u -> u_max.

    Shift ratios G(u - y) / G(u) are compared with e^{alpha y} and the
    convolution ratio with 2 M_0 (estimated from the last u when not given).
    This is a diagnostic; it does not prove class membership.
    """
    if float(tm.tail(u_max)) < UNDERFLOW_GUARD:
        raise Underflow(
            f"Tail underflows at u_max={u_max}; choose a smaller u_max."
        )
    y_grid = np.asarray(y_grid, dtype=float)
    us = np.geomspace(max(1.0, u_max / 2.0 ** (points - 1)), u_max, points)
    mass = float(tm.tail(0.0))

    rows = []
    for u in us:
        for y in y_grid:
            ratio = float(tm.tail(u - y)) / float(tm.tail(u))
            target = float(np.exp(tm.alpha * y))
            rows.append(
                {"u": u, "check": "shift", "y": y, "ratio": ratio, "target": target}
            )
        if tm.density is not None:
            rows.append(
                {
                    "u": u,
                    "check": "convolution",
                    "y": np.nan,
                    "ratio": _convolution_ratio(tm, u, mass),
                    "target": np.nan,
                }
            )
    table = pd.DataFrame(rows)

    conv = table["check"] == "convolution"
    if two_m0 is None:
        two_m0 = float(table.loc[conv, "ratio"].iloc[-1]) if conv.any() else np.nan
    table.loc[conv, "target"] = two_m0
    table["distance"] = (table["ratio"] - table["target"]).abs() / table["target"]

    # The estimated 2 M_0 matches the last u trivially, so two u values count
    last = table["u"].isin(us[-2:])
    stable = bool((table.loc[last, "distance"] < tolerance).all())
    return ClassDiagnostic(table=table, two_m0=two_m0, stable=stable)


def _require_spectrally_positive(model: LevyModel):
    if not model.is_spectrally_positive:
        raise UnsupportedModel(
            "Heavy-tailed asymptotics are implemented for spectrally positive "
            f"models only; got a '{model.sign_tag}' model."
        )


def vigon_ladder_tail(model: LevyModel, u: float, method: str = "quadrature") -> float:
    """
    Tail of the Levy measure of the ascending ladder height at u.

    For a spectrally positive model the dual renewal measure is
    e^{-Phi_hat(0) y} dy, so the tail is int_0^inf V(u + y) e^{-Phi_hat(0) y} dy.
    method="shortcut" returns the large-u equivalent V(u) / (Phi_hat(0) + alpha).
    """
    _require_spectrally_positive(model)
    jumps = model.jumps_up
    phi_hat0 = phi(dual(model), 0.0)
    if method == "shortcut":
        return float(jumps.tail(u)) / (phi_hat0 + jumps.alpha)
    if method != "quadrature":
        raise ValueError(
            f"Unknown method '{method}'. Must be one of: quadrature, shortcut."
        )
    tail_u = float(jumps.tail(u))
    if tail_u == 0:
        return 0.0
    return tail_u * quadrature(
        lambda y: float(jumps.tail(u + y)) / tail_u * np.exp(-phi_hat0 * y),
        0.0,
        np.inf,
        what="ladder tail",
    )


def _ladder_parameters(model: LevyModel, alpha: float):
    """Check the heavy-tail conditions; return (Phi_hat(0), kappa(0, -alpha))."""
    _require_spectrally_positive(model)
    jumps = model.jumps_up
    if isinstance(jumps, ExponentialJumps) or not np.isclose(jumps.alpha, alpha):
        raise ConditionViolated(
            condition="convolution_equivalence",
            message=(
                "The upward jump law must be convolution equivalent of index "
                f"alpha={alpha}; the model has a '{jumps.law}' law with index "
                f"{jumps.alpha}."
            ),
        )
    psi_alpha = psi(model, alpha)
    if psi_alpha >= 0:
        raise ConditionViolated(
            condition="negative_exponent_at_alpha",
            message=f"psi(alpha) must be negative; got psi({alpha})={psi_alpha}.",
        )
    phi_hat0 = phi(dual(model), 0.0)
    k = -psi_alpha / (phi_hat0 + alpha)
    kappa00 = _kappa_q0(model, 0.0)
    if kappa00 + k <= 0:
        raise ConditionViolated(
            condition="positive_ladder_sum",
            message="kappa(0, 0) + kappa(0, -alpha) must be positive.",
        )
    return phi_hat0, k


def _kappa_q0(model: LevyModel, q: float) -> float:
    """kappa(q, 0) = q / Phi_hat(q); at q = 0 the limit is max(-psi'(0), 0)."""
    if q == 0:
        return max(-float(model.mean), 0.0)
    return q / phi(dual(model), q)


def mu_transform(model: LevyModel, alpha: float, q: float, form: str = "closed"):
    """
    Laplace transform at q of the distribution function of mu.

    form="ladder" evaluates (1/q) kappa(q,0) / (kappa(q,0) + kappa(0,-alpha))^2;
    form="closed" the equivalent Phi_hat(q) / (q + kappa(0,-alpha) Phi_hat(q))^2.
    """
    _, k = _ladder_parameters(model, alpha)
    phi_hat = phi(dual(model), q)
    if form == "ladder":
        kappa = q / phi_hat
        return kappa / (q * (kappa + k) ** 2)
    if form == "closed":
        return phi_hat / (q + k * phi_hat) ** 2
    raise ValueError(f"Unknown form '{form}'. Must be one of: closed, ladder.")


def mu_total_mass(model: LevyModel, alpha: float) -> float:
    """mu([0, inf)) = kappa(0,0) / (kappa(0,0) + kappa(0,-alpha))^2."""
    _, k = _ladder_parameters(model, alpha)
    kappa00 = _kappa_q0(model, 0.0)
    return kappa00 / (kappa00 + k) ** 2


def mu_atom(model: LevyModel, alpha: float, level: float = ATOM_LEVEL) -> float:
    """Mass of mu at 0, as the large-q value of q (L mu)(q)."""
    return level * mu_transform(model, alpha, level)


def mu_distribution(model: LevyModel, alpha: float, grid) -> pd.DataFrame:
    """
    Distribution function of mu on a grid by Laplace inversion.

    mu is a signed measure, so the raw inverted values need not be
    monotone; the monotone column is their isotonic rearrangement.
    """
    grid = np.asarray(grid, dtype=float)
    _ladder_parameters(model, alpha)

    def transform(q):
        return mu_transform(model, alpha, float(q))

    raw = np.array(
        [
            mu_atom(model, alpha) if s == 0 else laplace_invert(
                transform, s, **HEAVY_INVERSION
            )
            for s in grid
        ]
    )
    monotone = optimize.isotonic_regression(raw).x
    if np.max(np.abs(raw - monotone)) > 1e-6:
        warnings.warn(
            "The inverted distribution function of mu is not monotone; mu "
            "carries negative mass on this grid.",
            NumericalWarning,
        )
    df = pd.DataFrame({"s": grid, "raw": raw, "monotone": monotone})
    df.attrs["atom"] = mu_atom(model, alpha)
    return df


def _inf_moment(model: LevyModel, alpha: float, t: float) -> float:
    """E[exp(alpha inf_{s <= t} X_s)], inverting Phi_hat / (q (Phi_hat + alpha))."""
    if t == 0:
        return 1.0
    model_hat = dual(model)

    def transform(q):
        phi_hat = phi(model_hat, float(q))
        return phi_hat / (float(q) * (phi_hat + alpha))

    return laplace_invert(transform, t, **HEAVY_INVERSION)


def _sup_moment(model: LevyModel, alpha: float, t: float) -> float:
    """E[exp(alpha sup_{s <= t} X_s)] through the Wiener-Hopf factorisation."""
    if t == 0:
        return 1.0
    model_hat = dual(model)
    psi_alpha = psi(model, alpha)

    def transform(q):
        phi_hat = phi(model_hat, float(q))
        return (phi_hat + alpha) / ((float(q) - psi_alpha) * phi_hat)

    return laplace_invert(transform, t, **HEAVY_INVERSION)


def _neg_inf_moment(model: LevyModel, alpha: float, t: float) -> float:
    """E[exp(-alpha inf_{s <= t} X_s)]; finite because the dual has no upward jumps."""
    if t == 0:
        return 1.0
    model_hat = dual(model)
    shift = max(psi(model, -alpha), 0.0)

    def transform(q):
        phi_hat = phi(model_hat, float(q))
        return phi_hat / (float(q) * (phi_hat - alpha))

    return laplace_invert(transform, t, shift=shift, **HEAVY_INVERSION)


@dataclass(frozen=True)
class HeavyConstants:
    const_plus: float
    const_minus: float
    total_mass: float
    atom: float
    convention: str


def heavy_constants(
    model: LevyModel,
    alpha: float,
    t: float,
    method: str = "transform",
    convention: str = "corrected",
    n: int = 20000,
    seed: int = 0,
    grid_points: int = 40,
) -> HeavyConstants:
    """
    Constants of the heavy-tailed asymptotes of the future drawup extrema.

    Args:
        model (LevyModel): Spectrally positive model with convolution
            equivalent upward jumps.
        alpha (float): Index of the jump law.
        t (float): Horizon.
        method (str): "transform" inverts the Wiener-Hopf factors; "mc"
            simulates the running extrema.
        convention (str): "corrected" scales the extrema moments by the
            total mass of mu and uses E[exp(alpha inf X_t)] for the lower
            constant; "printed" keeps the unscaled display with
            E[exp(-alpha inf X_t)].
        n, seed: Paths and seed for method="mc".
        grid_points (int): Grid size for the Stieltjes integral against mu.
    """
    if convention not in CONVENTIONS:
        raise ValueError(
            f"Unknown convention '{convention}'. Must be one of: corrected, printed."
        )
    if method not in ("transform", "mc"):
        raise ValueError(f"Unknown method '{method}'. Must be one of: transform, mc.")

    total = mu_total_mass(model, alpha)
    atom = mu_atom(model, alpha)
    grid = np.linspace(0.0, t, grid_points + 1)
    mids = 0.5 * (grid[1:] + grid[:-1])

    if method == "mc":
        lags = np.unique(np.concatenate([[t], t - mids]))
        extrema = mc_running_extrema(model, lags, n, seed)
        by_time = extrema.groupby("time")
        inf_mean = by_time["inf_x"].apply(lambda v: np.mean(np.exp(alpha * v)))
        neg_inf_mean = by_time["inf_x"].apply(lambda v: np.mean(np.exp(-alpha * v)))
        sup_mean = by_time["sup_x"].apply(lambda v: np.mean(np.exp(alpha * v)))

        def inf_moment(u):
            return 1.0 if u == 0 else float(inf_mean.loc[u])

        sup_t = float(sup_mean.loc[t])
        neg_inf_t = float(neg_inf_mean.loc[t])
    else:

        def inf_moment(u):
            return _inf_moment(model, alpha, u)

        sup_t = _sup_moment(model, alpha, t)
        neg_inf_t = None
        if convention == "printed":
            neg_inf_t = _neg_inf_moment(model, alpha, t)

    # Stieltjes sum against the raw distribution function of mu
    dist = mu_distribution(model, alpha, grid)["raw"].to_numpy()
    increments = np.diff(dist)
    integral = atom / inf_moment(t) + sum(
        dF / inf_moment(t - s) for dF, s in zip(increments, mids)
    )

    if convention == "corrected":
        const_plus = total * sup_t + integral
        const_minus = total * inf_moment(t)
    else:
        const_plus = sup_t + integral
        const_minus = neg_inf_t
    return HeavyConstants(
        const_plus=float(const_plus),
        const_minus=float(const_minus),
        total_mass=total,
        atom=atom,
        convention=convention,
    )


def heavy_tail_approx(
    model: LevyModel,
    kind: str,
    t: float,
    x: float,
    alpha: float = None,
    constants: HeavyConstants = None,
    ladder_method: str = "quadrature",
    **kwargs,
) -> float:
    """
    const * tail of the ladder height measure at x.

    Constants are computed with heavy_constants unless precomputed ones are
    passed; alpha defaults to the index of the upward jump law.
    """
    if kind not in ("over_ustar", "under_ustar"):
        raise ValueError(
            f"Kind must be 'over_ustar' or 'under_ustar', got '{kind}'."
        )
    if constants is None:
        _require_spectrally_positive(model)
        alpha = model.jumps_up.alpha if alpha is None else alpha
        constants = heavy_constants(model, alpha, t, **kwargs)
    pi_h = vigon_ladder_tail(model, x, method=ladder_method)
    if kind == "over_ustar":
        return constants.const_plus * pi_h
    return constants.const_minus * pi_h


def heavy_table(
    model: LevyModel, alpha: float, t: float, xs, **kwargs
) -> pd.DataFrame:
    constants = heavy_constants(model, alpha, t, **kwargs)
    rows = []
    for x in np.asarray(xs, dtype=float):
        pi_h = vigon_ladder_tail(model, x)
        rows.append(
            {
                "x": x,
                "pi_H": pi_h,
                "const_plus": constants.const_plus,
                "const_minus": constants.const_minus,
                "approx_over": constants.const_plus * pi_h,
                "approx_under": constants.const_minus * pi_h,
            }
        )
    return pd.DataFrame(rows)


def tempered_two_m0(alpha: float) -> float:
    """2 M_0 for the normalised tempered Pareto law of index alpha."""
    return 4.0 / _tempered_mass(alpha)
