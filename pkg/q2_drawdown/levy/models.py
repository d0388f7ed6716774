# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
from dataclasses import dataclass, field
from typing import ClassVar, Optional, Union

import mpmath as mp
import numpy as np
from scipy import integrate, optimize, special

from q2_drawdown.levy.errors import (
    ConvergenceError,
    DomainError,
    InfeasibleProportion,
    ModelError,
    NoCramerRoot,
)

# Distance to a pole of psi below which evaluation is refused
POLE_GUARD = 1e-9
MAX_BRACKET_STEPS = 200

SIGN_TAGS = ("spectrally_negative", "spectrally_positive", "two_sided", "continuous")


def _as_number(theta):
    # mpmath values stay untouched so that psi can run at extended precision
    if isinstance(theta, (mp.mpf, mp.mpc)):
        return theta
    if isinstance(theta, (complex, np.complexfloating)):
        return complex(theta)
    return float(theta)


def _real_part(theta) -> float:
    return float(theta.real) if hasattr(theta, "real") else float(theta)


@dataclass(frozen=True)
class ExponentialJumps:
    """Compound Poisson jumps with exponentially distributed sizes.

    Sizes are positive; the sign is applied by the owning LevyModel.
    """

    rate: float
    mean: float

    law: ClassVar[str] = "exponential"
    closed_upper: ClassVar[bool] = False

    def __post_init__(self):
        if self.rate < 0:
            raise ModelError(f"Jump rate must be non-negative, got {self.rate}.")
        if self.mean <= 0:
            raise ModelError(f"Mean jump size must be positive, got {self.mean}.")

    @property
    def alpha(self) -> float:
        return 1.0 / self.mean

    @property
    def upper(self) -> float:
        return self.alpha

    def laplace(self, theta):
        # rate * (alpha / (alpha - theta) - 1)
        return self.rate * theta / (self.alpha - theta)

    def laplace_d1(self, theta):
        return self.rate * self.alpha / (self.alpha - theta) ** 2

    def laplace_d2(self, theta):
        return 2.0 * self.rate * self.alpha / (self.alpha - theta) ** 3

    def tail(self, u):
        return self.rate * np.exp(-self.alpha * np.asarray(u, dtype=float))

    def density(self, u):
        return self.rate * self.alpha * np.exp(-self.alpha * np.asarray(u, dtype=float))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(self.mean, size)

    def to_dict(self) -> dict:
        return {"law": self.law, "rate": self.rate, "mean": self.mean}


def _tempered_mass(beta):
    """Integral of e^{-beta x} (1 + x)^{-3/2} over [0, inf)."""
    root = np.sqrt(beta)
    return 2.0 * (1.0 - math.sqrt(math.pi) * root * special.erfcx(root))


def _tempered_mass_d1(beta):
    root = np.sqrt(beta)
    return 2.0 - math.sqrt(math.pi) * special.erfcx(root) * (1.0 + 2.0 * beta) / root


def _tempered_mass_d2(beta: float) -> float:
    value, _ = integrate.quad(
        lambda x: x * x * math.exp(-beta * x) * (1.0 + x) ** -1.5, 0.0, np.inf
    )
    return value


@dataclass(frozen=True)
class TemperedParetoJumps:
    """Jumps with size density proportional to e^{-alpha x} (1 + x)^{-3/2}.

    The tail decays like e^{-alpha u} u^{-3/2}, so the law is
    convolution equivalent of index alpha. The moment generating function
    is finite up to and including alpha.
    """

    rate: float
    alpha: float

    law: ClassVar[str] = "tempered_pareto"
    closed_upper: ClassVar[bool] = True

    def __post_init__(self):
        if self.rate < 0:
            raise ModelError(f"Jump rate must be non-negative, got {self.rate}.")
        if self.alpha <= 0:
            raise ModelError(f"Tempering index must be positive, got {self.alpha}.")

    @property
    def upper(self) -> float:
        return self.alpha

    @property
    def mean(self) -> float:
        return -_tempered_mass_d1(self.alpha) / _tempered_mass(self.alpha)

    @property
    def _norm(self) -> float:
        return _tempered_mass(self.alpha)

    def _shifted(self, theta):
        theta = theta if isinstance(theta, complex) else float(theta)
        return self.alpha - theta

    def laplace(self, theta):
        theta = complex(theta) if isinstance(theta, (complex, mp.mpc)) else theta
        return self.rate * (_tempered_mass(self._shifted(theta)) / self._norm - 1.0)

    def laplace_d1(self, theta):
        return -self.rate * _tempered_mass_d1(self._shifted(theta)) / self._norm

    def laplace_d2(self, theta):
        return self.rate * _tempered_mass_d2(float(self._shifted(theta))) / self._norm

    def tail(self, u):
        u = np.asarray(u, dtype=float)
        z = np.sqrt(self.alpha * (1.0 + u))
        inner = 1.0 / np.sqrt(1.0 + u) - math.sqrt(math.pi * self.alpha) * (
            special.erfcx(z)
        )
        return self.rate * 2.0 * np.exp(-self.alpha * u) * inner / self._norm

    def density(self, u):
        u = np.asarray(u, dtype=float)
        return self.rate * np.exp(-self.alpha * u) * (1.0 + u) ** -1.5 / self._norm

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # Rejection from the Pareto II(1/2) envelope (1/2)(1 + x)^{-3/2}
        out = np.empty(size)
        filled = 0
        while filled < size:
            batch = max(2 * (size - filled), 16)
            proposal = rng.random(batch) ** -2.0 - 1.0
            accept = rng.random(batch) < np.exp(-self.alpha * proposal)
            taken = proposal[accept][: size - filled]
            out[filled : filled + taken.size] = taken
            filled += taken.size
        return out

    def to_dict(self) -> dict:
        return {"law": self.law, "rate": self.rate, "alpha": self.alpha}


JumpLaw = Union[ExponentialJumps, TemperedParetoJumps]


def jump_law_from_dict(spec: dict) -> JumpLaw:
    law = spec.get("law", "exponential")
    if law == "exponential":
        return ExponentialJumps(rate=float(spec["rate"]), mean=float(spec["mean"]))
    if law == "tempered_pareto":
        return TemperedParetoJumps(
            rate=float(spec["rate"]), alpha=float(spec["alpha"])
        )
    raise ModelError(
        f"Unknown jump law '{law}'. Must be one of: exponential, tempered_pareto."
    )


@dataclass(frozen=True)
class ExponentDomain:
    theta_min: float
    theta_max: float
    closed_min: bool = False
    closed_max: bool = False

    def contains(self, theta: float, interior: bool = False) -> bool:
        if self.closed_max and not interior:
            upper_ok = theta <= self.theta_max
        else:
            upper_ok = theta < self.theta_max - POLE_GUARD
        if self.closed_min and not interior:
            lower_ok = theta >= self.theta_min
        else:
            lower_ok = theta > self.theta_min + POLE_GUARD
        return upper_ok and lower_ok


@dataclass(frozen=True)
class ConjugateTriple:
    xi_v: float
    eta_v: float
    gamma_v: float


@dataclass(frozen=True)
class LevyModel:
    """Brownian motion with drift plus independent one-sided jump components.

    Parameters
    ----------
    drift : float
        Linear drift per unit time.
    sigma : float
        Gaussian volatility.
    jumps_up, jumps_down : JumpLaw, optional
        Upward and downward jump components; sizes are positive in both.
    sign_tag : str, optional
        Checked against the jump components when supplied.
    allow_monotone : bool
        Accept degenerate or monotone models. Only path simulation
        supports them.
    """

    drift: float = 0.0
    sigma: float = 0.0
    jumps_up: Optional[JumpLaw] = None
    jumps_down: Optional[JumpLaw] = None
    sign_tag: Optional[str] = None
    allow_monotone: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ModelError(f"Volatility must be non-negative, got {self.sigma}.")

        # Zero-rate components are the same as absent ones
        for name in ("jumps_up", "jumps_down"):
            component = getattr(self, name)
            if component is not None and component.rate == 0:
                object.__setattr__(self, name, None)

        derived = self._derive_sign_tag()
        if self.sign_tag is not None and self.sign_tag != derived:
            raise ModelError(
                f"Sign tag '{self.sign_tag}' is inconsistent with the jump "
                f"components, which describe a '{derived}' model."
            )
        object.__setattr__(self, "sign_tag", derived)

        if not self.allow_monotone:
            if self.sigma == 0 and self.jumps_up is None and self.jumps_down is None:
                raise ModelError(
                    "Degenerate model: volatility is zero and no jump component "
                    "is present."
                )
            if self.has_monotone_paths:
                raise ModelError("Models with monotone paths are not supported.")

    def _derive_sign_tag(self) -> str:
        if self.jumps_up is None and self.jumps_down is None:
            return "continuous"
        if self.jumps_up is None:
            return "spectrally_negative"
        if self.jumps_down is None:
            return "spectrally_positive"
        return "two_sided"

    @property
    def has_monotone_paths(self) -> bool:
        if self.sigma > 0:
            return False
        if self.jumps_down is None and self.drift >= 0:
            return True
        if self.jumps_up is None and self.drift <= 0:
            return True
        return False

    @property
    def is_spectrally_negative(self) -> bool:
        """True for models without upward jumps, Brownian motion included."""
        return self.sign_tag in ("spectrally_negative", "continuous")

    @property
    def is_spectrally_positive(self) -> bool:
        return self.sign_tag == "spectrally_positive"

    @property
    def is_brownian(self) -> bool:
        return self.sign_tag == "continuous" and self.sigma > 0

    @property
    def domain(self) -> ExponentDomain:
        theta_max, closed_max = np.inf, False
        theta_min, closed_min = -np.inf, False
        if self.jumps_up is not None:
            theta_max, closed_max = self.jumps_up.upper, self.jumps_up.closed_upper
        if self.jumps_down is not None:
            theta_min = -self.jumps_down.upper
            closed_min = self.jumps_down.closed_upper
        return ExponentDomain(theta_min, theta_max, closed_min, closed_max)

    @property
    def mean(self) -> float:
        return psi_prime(self, 0.0)

    def to_dict(self) -> dict:
        spec = {"drift": self.drift, "sigma": self.sigma}
        if self.jumps_up is not None:
            spec["jumps_up"] = self.jumps_up.to_dict()
        if self.jumps_down is not None:
            spec["jumps_down"] = self.jumps_down.to_dict()
        spec["sign_tag"] = self.sign_tag
        return spec

    @classmethod
    def from_dict(cls, spec: dict, allow_monotone: bool = False) -> "LevyModel":
        return cls(
            drift=float(spec.get("drift", 0.0)),
            sigma=float(spec.get("sigma", 0.0)),
            jumps_up=(
                jump_law_from_dict(spec["jumps_up"]) if spec.get("jumps_up") else None
            ),
            jumps_down=(
                jump_law_from_dict(spec["jumps_down"])
                if spec.get("jumps_down")
                else None
            ),
            sign_tag=spec.get("sign_tag"),
            allow_monotone=allow_monotone,
        )


def brownian_motion(drift: float, sigma: float) -> LevyModel:
    return LevyModel(drift=drift, sigma=sigma)


def kou(
    drift: float,
    sigma: float,
    rate_up: float = 0.0,
    mean_up: float = 1.0,
    rate_down: float = 0.0,
    mean_down: float = 1.0,
) -> LevyModel:
    return LevyModel(
        drift=drift,
        sigma=sigma,
        jumps_up=ExponentialJumps(rate_up, mean_up) if rate_up > 0 else None,
        jumps_down=ExponentialJumps(rate_down, mean_down) if rate_down > 0 else None,
    )


def _check_domain(model: LevyModel, theta, interior: bool = False):
    real = _real_part(theta)
    if not model.domain.contains(real, interior=interior):
        dom = model.domain
        raise DomainError(
            f"theta={real} lies outside the exponent domain "
            f"[{dom.theta_min}, {dom.theta_max}] of the model."
        )


def psi(model: LevyModel, theta):
    """Laplace exponent log E[exp(theta X_1)]."""
    theta = _as_number(theta)
    _check_domain(model, theta)
    value = model.drift * theta + 0.5 * model.sigma**2 * theta * theta
    if model.jumps_up is not None:
        value = value + model.jumps_up.laplace(theta)
    if model.jumps_down is not None:
        value = value + model.jumps_down.laplace(-theta)
    return value


def psi_prime(model: LevyModel, theta):
    theta = _as_number(theta)
    _check_domain(model, theta, interior=True)
    value = model.drift + model.sigma**2 * theta
    if model.jumps_up is not None:
        value = value + model.jumps_up.laplace_d1(theta)
    if model.jumps_down is not None:
        value = value - model.jumps_down.laplace_d1(-theta)
    return value


def psi_second(model: LevyModel, theta) -> float:
    theta = _as_number(theta)
    _check_domain(model, theta, interior=True)
    value = model.sigma**2
    if model.jumps_up is not None:
        value = value + model.jumps_up.laplace_d2(theta)
    if model.jumps_down is not None:
        value = value + model.jumps_down.laplace_d2(-theta)
    return value


def _approach_upper(model: LevyModel, start: float, k: int) -> float:
    # Geometric steps to the right; halving distance towards a finite pole
    theta_max = model.domain.theta_max
    if np.isinf(theta_max):
        return start + 2.0**k
    return theta_max - (theta_max - start) * 2.0 ** -(k + 1)


def _approach_lower(model: LevyModel, start: float, k: int) -> float:
    theta_min = model.domain.theta_min
    if np.isinf(theta_min):
        return start - 2.0**k
    return theta_min + (start - theta_min) * 2.0 ** -(k + 1)


def _psi_minimiser(model: LevyModel) -> float:
    """Largest of 0 and the zero of psi'."""
    if psi_prime(model, 0.0) >= 0:
        return 0.0
    hi = None
    for k in range(MAX_BRACKET_STEPS):
        candidate = _approach_upper(model, 0.0, k)
        if not model.domain.contains(candidate, interior=True):
            break
        if psi_prime(model, candidate) > 0:
            hi = candidate
            break
    if hi is None:
        raise ConvergenceError(
            "Could not bracket the minimiser of psi inside the exponent domain."
        )
    return optimize.brentq(lambda th: psi_prime(model, th), 0.0, hi, xtol=1e-15)


def _refine_at_precision(model: LevyModel, q, root: float):
    # Tempered jumps evaluate in double precision, so findroot may not
    # reach the mpmath tolerance; the float root is then the best we have
    try:
        return mp.findroot(lambda th: psi(model, th) - q, mp.mpf(root))
    except (ValueError, ZeroDivisionError):
        return mp.mpf(root)


def phi(model: LevyModel, q):
    """Largest root of psi(theta) = q (right inverse of psi).

    Levels given as mpmath numbers return a root refined at the current
    mpmath precision.
    """
    if isinstance(q, mp.mpf):
        return _refine_at_precision(model, q, phi(model, float(q)))

    q = float(q)
    if q < 0:
        raise DomainError(f"phi requires q >= 0, got {q}.")

    lower = _psi_minimiser(model)
    if q == 0 and lower == 0.0:
        return 0.0

    # Expand the right end of the bracket until psi exceeds q
    dom = model.domain
    upper = None
    for k in range(MAX_BRACKET_STEPS):
        candidate = _approach_upper(model, lower, k)
        if not dom.contains(candidate, interior=True):
            if dom.closed_max and psi(model, dom.theta_max) >= q:
                upper = dom.theta_max
            break
        if psi(model, candidate) > q:
            upper = candidate
            break
    if upper is None:
        raise ConvergenceError(
            f"psi stays below the level q={q} on the exponent domain; no root "
            f"could be bracketed."
        )

    root = optimize.brentq(
        lambda th: psi(model, th) - q,
        lower,
        upper,
        xtol=1e-15,
        rtol=4 * np.finfo(float).eps,
        maxiter=500,
    )

    # One Newton polish step, kept only when it stays inside the bracket
    if dom.contains(root, interior=True):
        slope = psi_prime(model, root)
        if slope > 0:
            polished = root - (psi(model, root) - q) / slope
            if lower <= polished <= upper and abs(psi(model, polished) - q) < abs(
                psi(model, root) - q
            ):
                root = polished
    return root


def cramer_gamma(model: LevyModel) -> float:
    """Positive root of psi for models drifting to minus infinity."""
    if model.mean >= 0:
        raise NoCramerRoot(
            "The Cramer root requires E[X_1] < 0; the model has mean "
            f"{model.mean}."
        )
    try:
        gamma = phi(model, 0.0)
    except ConvergenceError as e:
        raise NoCramerRoot(
            "psi is negative on the whole positive part of the exponent domain."
        ) from e
    if gamma <= 0:
        raise NoCramerRoot("No strictly positive root of psi was found.")
    return gamma


def conjugate(model: LevyModel, v: float) -> ConjugateTriple:
    """Solve psi'(xi) = v and return (xi_v, psi(xi_v), psi*(v) / v)."""
    if v <= 0:
        raise InfeasibleProportion(f"Proportion must be positive, got {v}.")
    dom = model.domain
    start = psi_prime(model, 0.0)
    if start == v:
        xi = 0.0
    else:
        step = _approach_upper if start < v else _approach_lower
        bracket = None
        for k in range(MAX_BRACKET_STEPS):
            candidate = step(model, 0.0, k)
            if not dom.contains(candidate, interior=True):
                break
            slope = psi_prime(model, candidate)
            if (slope - v) * (start - v) < 0:
                bracket = sorted((0.0, candidate))
                break
        if bracket is None:
            raise InfeasibleProportion(
                f"v={v} lies outside the range of psi' over the interior of "
                f"the exponent domain."
            )
        xi = optimize.brentq(
            lambda th: psi_prime(model, th) - v, *bracket, xtol=1e-15, maxiter=500
        )
    eta = psi(model, xi)
    return ConjugateTriple(xi_v=xi, eta_v=eta, gamma_v=(xi * v - eta) / v)


def dual(model: LevyModel) -> LevyModel:
    """The reflected process -X."""
    return LevyModel(
        drift=-model.drift,
        sigma=model.sigma,
        jumps_up=model.jumps_down,
        jumps_down=model.jumps_up,
        allow_monotone=model.allow_monotone,
    )
