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

from q2_drawdown.levy.errors import DomainError, ModelError, NumericRange
from q2_drawdown.levy.models import LevyModel, brownian_motion
from q2_drawdown.levy.utils import exp_erfc, quadrature, running_max_mgf

RANGE_TOL = 1e-6
REPORT_TOL = 1e-6
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class BssParams:
    """Log-price X_t = (mu - sigma^2 / 2) t + sigma W_t of a geometric BM."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ModelError(f"sigma must be positive, got {self.sigma}.")

    @property
    def drift(self) -> float:
        return self.mu - 0.5 * self.sigma**2

    @property
    def omega(self) -> float:
        return self.mu / self.sigma**2 - 0.5

    @property
    def gamma(self) -> float:
        return 2.0 * self.omega

    def delta(self, q: float) -> float:
        return math.sqrt(self.drift**2 + 2.0 * self.sigma**2 * q) / self.sigma**2

    def phi(self, q: float) -> float:
        return -self.omega + self.delta(q)

    def psi(self, theta: float) -> float:
        return 0.5 * self.sigma**2 * theta**2 + self.drift * theta

    def model(self) -> LevyModel:
        return brownian_motion(self.drift, self.sigma)

    def tilted(self) -> "BssParams":
        """Parameters under the measure tilted by e^{X_t - psi(1) t}."""
        return BssParams(mu=self.mu + self.sigma**2, sigma=self.sigma)


def _require_positive_trend(p: BssParams):
    if not p.mu > 0.5 * p.sigma**2:
        raise DomainError(
            f"Drawdown laws need mu > sigma^2 / 2; got mu={p.mu}, sigma={p.sigma}."
        )


def bss_scale(p: BssParams, q: float, x):
    """(W^(q)(x), Z^(q)(x)) from the explicit exponentials."""
    if q < 0:
        raise DomainError(f"q must be non-negative, got {q}.")
    x = np.asarray(x, dtype=float)
    w, d = p.omega, p.delta(q)
    up, down = -w + d, -(w + d)
    scale_w = (np.exp(up * x) - np.exp(down * x)) / (d * p.sigma**2)
    if q == 0:
        scale_z = np.ones_like(x)
    else:
        scale_z = (
            q
            / (d * p.sigma**2)
            * (np.exp(up * x) / up + np.exp(down * x) / (w + d))
        )
    if scale_w.ndim == 0:
        return float(scale_w), float(scale_z)
    return scale_w, scale_z


def _w_prime(p: BssParams, q: float, x):
    w, d = p.omega, p.delta(q)
    return ((d - w) * np.exp((d - w) * x) + (d + w) * np.exp(-(d + w) * x)) / (
        d * p.sigma**2
    )


def _check(value: float, what: str) -> float:
    if not -RANGE_TOL <= value <= 1 + RANGE_TOL:
        raise NumericRange(f"{what} evaluated to {value:.10g}, outside [0, 1].")
    return min(max(value, 0.0), 1.0)


def bss_tail_D_at_eq(p: BssParams, q: float, x: float, kind: str) -> float:
    """P(-F_{e_q} > x) for F the overline or underline future drawdown."""
    _require_positive_trend(p)
    if q <= 0:
        raise DomainError(f"q must be positive, got {q}.")
    if kind == "over_dstar":
        w, d = p.omega, p.delta(q)
        value = (d - w) / (d + w) * math.exp(-2.0 * w * x)
    elif kind == "under_dstar":
        value = _under_dstar_reference(p, q, x)
    else:
        raise ValueError(f"Kind must be 'over_dstar' or 'under_dstar', got '{kind}'.")
    return _check(value, f"P({kind} > {x})")


def _under_dstar_reference(p: BssParams, q: float, x: float) -> float:
    # 1 + q a int W(x-z) W_q(z) dz - q a W_q(x) / W_q'(x) int W(x-z) W_q'(z) dz
    if x == 0:
        return 1.0
    a = p.drift

    def w0(y):
        return bss_scale(p, 0.0, y)[0]

    def wq(y):
        return bss_scale(p, q, y)[0]

    smooth = quadrature(lambda z: w0(x - z) * wq(z), 0.0, x, what="BSS convolution")
    against = quadrature(
        lambda z: w0(x - z) * float(_w_prime(p, q, z)), 0.0, x, what="BSS convolution"
    )
    return 1.0 + q * a * smooth - q * a * wq(x) / float(_w_prime(p, q, x)) * against


def _under_dstar_display(p: BssParams, q: float, x: float) -> float:
    w, d, s2 = p.omega, p.delta(q), p.sigma**2
    a = p.drift
    wq, zq = bss_scale(p, q, x)
    front = a / (s2**2 * d * w)
    grouped = (
        math.exp(-(d + w) * x) / (d - w)
        - math.exp((d - w) * x) / (d + w)
        - 2.0 * w / (d**2 - w**2) * math.exp(-2.0 * w * x)
    )
    ratio = wq / float(_w_prime(p, q, x)) if x > 0 else 0.0
    last = (
        (d + w) / (d - w) * math.exp(-(d + w) * x)
        + (d - w) / (d + w) * math.exp((d - w) * x)
        - 2.0 * d / (d**2 - w**2) * math.exp(-2.0 * w * x)
    )
    return 1.0 + front * (zq - 1.0) + q * front * grouped + (p.mu - s2) * ratio * last


def _over_dstar_display(p: BssParams, q: float, x: float) -> float:
    w, d = p.omega, p.delta(q)
    return 1.0 - p.drift / (p.sigma**2 * w) * (
        1.0 - (-w + d) / (w + d) * math.exp(-2.0 * w * x)
    )


def supremum_mgf(p: BssParams, t: float) -> float:
    """E[exp(-2 omega U_t)] from the running-maximum law of the log-price."""
    return running_max_mgf(p.drift, p.sigma, -p.gamma, t)


def _supremum_mgf_display(p: BssParams, t: float) -> float:
    w, s2 = np.float64(p.omega), np.float64(p.sigma) ** 2
    root_t = math.sqrt(t)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        first = (2.0 - s2) / (2.0 - 2.0 * s2) * exp_erfc(
            w**2 * (1.0 - s2) / s2 * t, w * (2.0 - s2) / (SQRT2 * p.sigma) * root_t
        )
        second = s2 / (2.0 - 2.0 * s2) * special.erfc(w * p.sigma / SQRT2 * root_t)
        return float(first - second)


def bss_tail_overlineD_fixed_t(p: BssParams, t: float, x: float) -> float:
    """P(-overline-D*_t > x) through the running-maximum moment E[e^{-2 omega U_t}]."""
    _require_positive_trend(p)
    if t < 0 or x < 0:
        raise DomainError(f"t and x must be non-negative, got t={t}, x={x}.")
    factor = p.drift / (p.sigma**2 * p.omega)
    value = 1.0 - factor * (1.0 - supremum_mgf(p, t) * math.exp(-p.gamma * x))
    return _check(value, f"P(over_dstar_{t} > {x})")


@dataclass(frozen=True)
class BssMoments:
    up: float
    down: float
    tilted_up: float
    tilted_down: float

    def as_tuple(self) -> tuple:
        return self.up, self.down, self.tilted_up, self.tilted_down


def bss_exp_moments(p: BssParams, t: float) -> BssMoments:
    """
    E[e^{gamma U_t}], E[e^{gamma D_t}] and their values under the measure
    tilted by e^{X_t - psi(1) t}.

    U_t is distributed as the running maximum of X and D_t as that of -X.
    """
    _require_positive_trend(p)
    g = p.gamma
    tilted = p.tilted()
    return BssMoments(
        up=running_max_mgf(p.drift, p.sigma, g, t),
        down=running_max_mgf(-p.drift, p.sigma, g, t),
        tilted_up=running_max_mgf(tilted.drift, p.sigma, g, t),
        tilted_down=running_max_mgf(-tilted.drift, p.sigma, g, t),
    )


def _exp_moments_display(p: BssParams, t: float) -> BssMoments:
    # numpy scalars so that singular groupings give inf or nan, not an exception
    w, mu, s = np.float64(p.omega), np.float64(p.mu), np.float64(p.sigma)
    s2 = s**2
    root_t = math.sqrt(t)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        growth = w**2 * (1.0 + s2) / s2 * t
        arg_long = w * (2.0 + s2) / (SQRT2 * s) * root_t
        arg_short = w * s / SQRT2 * root_t

        def plain(sign):
            return float(
                (2.0 + s2) / (2.0 + 2.0 * s2) * exp_erfc(growth, sign * arg_long)
                + s2 / (2.0 + 2.0 * s2) * special.erfc(-sign * arg_short)
            )

        tilt_growth = w * ((2.0 * mu - s2) * (s2 + 1.0) - s2**2) / s2**2 * t
        tilt_long = (
            ((2.0 * mu - s2) * (s2 + 2.0) - 2.0 * s2**2) / (2.0 * SQRT2 * s**3) * root_t
        )
        tilt_short = (2.0 * mu - 3.0 * s2) / (2.0 * SQRT2 * s) * root_t
        tilt_denominator = (4.0 * mu - 2.0 * s2) * (1.0 + s2) - 4.0 * s2**2
        tilt_weight = s2 * (2.0 * mu - 3.0 * s2) / tilt_denominator

        def tilted(sign):
            return float(
                (1.0 + s2) / (1.0 + 2.0 * s2) * exp_erfc(tilt_growth, sign * tilt_long)
                + tilt_weight * special.erfc(-sign * tilt_short)
            )

        return BssMoments(
            up=plain(-1.0),
            down=plain(1.0),
            tilted_up=tilted(-1.0),
            tilted_down=tilted(1.0),
        )


def bss_price_expectations(p: BssParams, p0: float, t: float):
    """
    Expected price at t under the drawup and the drawdown measures.

    Returns (P0 e^{psi(1) t} E1[e^{gamma U_t}] / E[e^{gamma U_t}],
    P0 e^{psi(1) t} E1[e^{gamma D_t}] / E[e^{gamma D_t}]).
    """
    if p0 <= 0:
        raise DomainError(f"Initial price must be positive, got {p0}.")
    m = bss_exp_moments(p, t)
    level = p0 * math.exp(p.psi(1.0) * t)
    return level * m.tilted_up / m.up, level * m.tilted_down / m.down


def bss_comparison_report(p: BssParams, t: float, q: float, xs) -> pd.DataFrame:
    """
    Reference values against the displayed closed forms.

    Each row carries both values and their absolute and relative deviation;
    ``attrs["itemised"]`` lists the quantities deviating by more than 1e-6.
    """
    _require_positive_trend(p)
    rows = []

    def add(quantity, reference, display):
        deviation = abs(display - reference)
        relative = deviation / abs(reference) if reference != 0 else np.inf
        rows.append(
            {
                "quantity": quantity,
                "reference": reference,
                "display": display,
                "abs_dev": deviation,
                "rel_dev": relative,
            }
        )

    add("E[exp(-gamma U_t)]", supremum_mgf(p, t), _supremum_mgf_display(p, t))
    names = ["E[exp(gamma U_t)]", "E[exp(gamma D_t)]"]
    names += [f"tilted {name}" for name in names]
    reference = bss_exp_moments(p, t).as_tuple()
    display = _exp_moments_display(p, t).as_tuple()
    for name, ref, disp in zip(names, reference, display):
        add(name, ref, disp)

    for x in np.asarray(xs, dtype=float):
        add(
            f"P(over_dstar_eq > {x:g})",
            bss_tail_D_at_eq(p, q, x, "over_dstar"),
            _over_dstar_display(p, q, x),
        )
        add(
            f"P(under_dstar_eq > {x:g})",
            bss_tail_D_at_eq(p, q, x, "under_dstar"),
            _under_dstar_display(p, q, x),
        )

    report = pd.DataFrame(rows)
    # NaN deviations come from displays singular at the given parameters
    flagged = ~(report["abs_dev"] <= REPORT_TOL)
    report["flagged"] = flagged
    report.attrs["itemised"] = report.loc[flagged, "quantity"].tolist()
    return report


def bss_table(p: BssParams, q: float, t: float, p0: float, xs) -> pd.DataFrame:
    """All closed-form quantities on an x grid, one row per x."""
    moments = bss_exp_moments(p, t)
    over_price, under_price = bss_price_expectations(p, p0, t)
    rows = []
    for x in np.asarray(xs, dtype=float):
        wq, zq = bss_scale(p, q, x)
        rows.append(
            {
                "x": x,
                "phi_q": p.phi(q),
                "Wq": wq,
                "Zq": zq,
                "over_dstar_eq": bss_tail_D_at_eq(p, q, x, "over_dstar"),
                "under_dstar_eq": bss_tail_D_at_eq(p, q, x, "under_dstar"),
                "over_dstar_t": bss_tail_overlineD_fixed_t(p, t, x),
                "mgf_up": moments.up,
                "mgf_down": moments.down,
                "tilted_mgf_up": moments.tilted_up,
                "tilted_mgf_down": moments.tilted_down,
                "price_over": over_price,
                "price_under": under_price,
            }
        )
    return pd.DataFrame(rows)
