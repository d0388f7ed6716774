# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from q2_drawdown.levy.errors import ConfigError, LevyError
from q2_drawdown.levy.exact import ExponentialHorizons, FixedHorizons
from q2_drawdown.levy.models import LevyModel
from q2_drawdown.levy.simulation import BLOCK_SIZE, KINDS, MIN_PATHS, SURROGATE_C

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECTIONS = (
    "model",
    "functional",
    "horizon",
    "grid",
    "monte_carlo",
    "output",
    "tolerance",
    "heavy",
)
REQUIRED_SECTIONS = ("model", "functional", "horizon", "grid")
MODEL_KEYS = ("drift", "sigma", "jumps_up", "jumps_down", "sign_tag")
JUMP_KEYS = {
    "exponential": ("law", "rate", "mean"),
    "tempered_pareto": ("law", "rate", "alpha"),
}
MONTE_CARLO_KEYS = (
    "n",
    "seed",
    "delta",
    "bridge",
    "workers",
    "block_size",
    "surrogate_c",
)

Horizon = Union[ExponentialHorizons, FixedHorizons]


@dataclass(frozen=True)
class MonteCarloConfig:
    n: int = 0
    seed: int = 0
    delta: Optional[float] = None
    bridge: bool = True
    workers: Optional[int] = None
    block_size: int = BLOCK_SIZE
    surrogate_c: float = SURROGATE_C


@dataclass(frozen=True)
class OutputConfig:
    csv: Optional[str] = None
    json: Optional[str] = None


@dataclass(frozen=True)
class ToleranceConfig:
    """A row passes when |mc - reference| <= n_se * se + abs + rel * |reference|."""

    n_se: float = 3.0
    abs: float = 0.0
    rel: float = 0.0

    def allowed(self, std_error: float, reference: float) -> float:
        return self.n_se * std_error + self.abs + self.rel * abs(reference)


@dataclass(frozen=True)
class ExperimentConfig:
    model: LevyModel
    kind: str
    horizon: Horizon
    xs: Tuple[float, ...]
    monte_carlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    tolerance: ToleranceConfig = field(default_factory=ToleranceConfig)
    heavy_alpha: Optional[float] = None

    def resolved(self) -> dict:
        """The full configuration after defaults, as plain JSON values."""
        if isinstance(self.horizon, ExponentialHorizons):
            horizon = {"type": "exponential", "q": self.horizon.q}
            horizon["beta"] = _encode_inf(self.horizon.beta)
        else:
            horizon = {"type": "fixed", "t": self.horizon.t}
            horizon["s"] = _encode_inf(self.horizon.s)
        return {
            "model": self.model.to_dict(),
            "functional": {"kind": self.kind},
            "horizon": horizon,
            "grid": {"x": list(self.xs)},
            "monte_carlo": asdict(self.monte_carlo),
            "output": asdict(self.output),
            "tolerance": asdict(self.tolerance),
            "heavy": {"alpha": self.heavy_alpha},
        }


def _encode_inf(value: float):
    return "inf" if math.isinf(value) else value


def _check_keys(section, allowed, path: str):
    if not isinstance(section, dict):
        raise ConfigError(f"Expected a table, got {type(section).__name__}.", path)
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(
            f"Unknown key(s) {', '.join(unknown)}. Allowed keys are: "
            f"{', '.join(allowed)}.",
            path,
        )


def _real(
    section: dict,
    key: str,
    path: str,
    default=None,
    minimum: float = None,
    strict: bool = False,
    allow_inf: bool = False,
    required: bool = False,
):
    where = f"{path}.{key}"
    if key not in section:
        if required:
            raise ConfigError("Missing required value.", where)
        return default
    value = section[key]
    if allow_inf and value in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Expected a number, got {value!r}.", where)
    value = float(value)
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        raise ConfigError(f"Expected a finite number, got {value!r}.", where)
    if minimum is not None:
        if (strict and not value > minimum) or (not strict and value < minimum):
            bound = ">" if strict else ">="
            raise ConfigError(f"Must be {bound} {minimum}, got {value}.", where)
    return value


def _integer(section: dict, key: str, path: str, default=None, minimum: int = 0):
    where = f"{path}.{key}"
    if key not in section:
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"Expected an integer, got {value!r}.", where)
    if value < minimum:
        raise ConfigError(f"Must be >= {minimum}, got {value}.", where)
    return value


def _string(section: dict, key: str, path: str, default=None):
    if key not in section:
        return default
    value = section[key]
    if not isinstance(value, str):
        raise ConfigError(f"Expected a string, got {value!r}.", f"{path}.{key}")
    return value


def parse_grid(value, path: str = "grid.x") -> Tuple[float, ...]:
    """
    Non-negative levels from a list, a linear range written as "a:b:n" or a
    comma-separated string.
    """
    if isinstance(value, str) and ":" not in value:
        try:
            value = [float(item) for item in value.split(",")]
        except ValueError as e:
            raise ConfigError(f"Expected numbers, got '{value}'.", path) from e
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"Expected 'a:b:n', got '{value}'.", path)
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as e:
            raise ConfigError(f"Expected 'a:b:n', got '{value}'.", path) from e
        if count < 1:
            raise ConfigError(f"Number of points must be positive in '{value}'.", path)
        levels = np.linspace(start, stop, count)
    elif isinstance(value, (list, tuple)):
        if not value:
            raise ConfigError("Grid must not be empty.", path)
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(f"Expected numbers, got {item!r}.", path)
        levels = np.asarray(value, dtype=float)
    else:
        raise ConfigError(f"Expected a list or 'a:b:n', got {value!r}.", path)
    if not np.all(np.isfinite(levels)) or np.any(levels < 0):
        raise ConfigError("Levels must be finite and non-negative.", path)
    return tuple(float(x) for x in levels)


def _jump_section(spec, path: str) -> dict:
    if not isinstance(spec, dict):
        raise ConfigError(f"Expected a table, got {type(spec).__name__}.", path)
    law = _string(spec, "law", path, default="exponential")
    if law not in JUMP_KEYS:
        raise ConfigError(
            f"Unknown jump law '{law}'. Must be one of: {', '.join(JUMP_KEYS)}.",
            f"{path}.law",
        )
    _check_keys(spec, JUMP_KEYS[law], path)
    parsed = {"law": law, "rate": _real(spec, "rate", path, required=True, minimum=0)}
    shape = JUMP_KEYS[law][2]
    parsed[shape] = _real(spec, shape, path, required=True, minimum=0, strict=True)
    return parsed


def parse_model(spec, path: str = "model") -> LevyModel:
    _check_keys(spec, MODEL_KEYS, path)
    parsed = {
        "drift": _real(spec, "drift", path, default=0.0),
        "sigma": _real(spec, "sigma", path, default=0.0, minimum=0.0),
        "sign_tag": _string(spec, "sign_tag", path),
    }
    for side in ("jumps_up", "jumps_down"):
        if side in spec:
            parsed[side] = _jump_section(spec[side], f"{path}.{side}")
    try:
        return LevyModel.from_dict(parsed)
    except LevyError as e:
        raise ConfigError(e.message, path) from e


def parse_horizon(spec, path: str = "horizon") -> Horizon:
    if not isinstance(spec, dict):
        raise ConfigError(f"Expected a table, got {type(spec).__name__}.", path)
    kind = _string(spec, "type", path)
    if kind == "exponential":
        _check_keys(spec, ("type", "q", "beta"), path)
        return ExponentialHorizons(
            q=_real(spec, "q", path, required=True, minimum=0, strict=True),
            beta=_real(spec, "beta", path, default=0.0, minimum=0, allow_inf=True),
        )
    if kind == "fixed":
        _check_keys(spec, ("type", "t", "s"), path)
        return FixedHorizons(
            t=_real(spec, "t", path, required=True, minimum=0, strict=True),
            s=_real(spec, "s", path, default=math.inf, minimum=0, allow_inf=True),
        )
    raise ConfigError(
        f"Horizon type must be 'exponential' or 'fixed', got {kind!r}.", f"{path}.type"
    )


def _monte_carlo(spec, path: str = "monte_carlo") -> MonteCarloConfig:
    _check_keys(spec, MONTE_CARLO_KEYS, path)
    n = _integer(spec, "n", path, default=0)
    if 0 < n < MIN_PATHS:
        raise ConfigError(
            f"Use 0 to skip Monte Carlo or at least {MIN_PATHS} paths, got {n}.",
            f"{path}.n",
        )
    bridge = spec.get("bridge", True)
    if not isinstance(bridge, bool):
        raise ConfigError(f"Expected true or false, got {bridge!r}.", f"{path}.bridge")
    return MonteCarloConfig(
        n=n,
        seed=_integer(spec, "seed", path, default=0),
        delta=_real(spec, "delta", path, minimum=0, strict=True),
        bridge=bridge,
        workers=_integer(spec, "workers", path, minimum=1),
        block_size=_integer(spec, "block_size", path, default=BLOCK_SIZE, minimum=1),
        surrogate_c=_real(
            spec, "surrogate_c", path, default=SURROGATE_C, minimum=0, strict=True
        ),
    )


def _output(spec, base_dir: str, path: str = "output") -> OutputConfig:
    _check_keys(spec, ("csv", "json"), path)

    def resolve(key):
        value = _string(spec, key, path)
        if value is None or os.path.isabs(value):
            return value
        return os.path.join(base_dir, value)

    return OutputConfig(csv=resolve("csv"), json=resolve("json"))


def _tolerance(spec, path: str = "tolerance") -> ToleranceConfig:
    _check_keys(spec, ("n_se", "abs", "rel"), path)
    return ToleranceConfig(
        n_se=_real(spec, "n_se", path, default=3.0, minimum=0),
        abs=_real(spec, "abs", path, default=0.0, minimum=0),
        rel=_real(spec, "rel", path, default=0.0, minimum=0),
    )


def parse_experiment(doc: dict, base_dir: str = ".") -> ExperimentConfig:
    """
    Validates an experiment document and resolves its defaults.

    Output paths are taken relative to base_dir. Nothing is computed here,
    so every ConfigError is raised before any numerical work starts.
    """
    _check_keys(doc, SECTIONS, "config")
    for section in REQUIRED_SECTIONS:
        if section not in doc:
            raise ConfigError("Missing required section.", section)

    functional = doc["functional"]
    _check_keys(functional, ("kind",), "functional")
    kind = _string(functional, "kind", "functional")
    if kind not in KINDS:
        raise ConfigError(
            f"Unknown kind {kind!r}. Must be one of: {', '.join(KINDS)}.",
            "functional.kind",
        )

    grid = doc["grid"]
    _check_keys(grid, ("x",), "grid")
    if "x" not in grid:
        raise ConfigError("Missing required value.", "grid.x")

    heavy = doc.get("heavy", {})
    _check_keys(heavy, ("alpha",), "heavy")

    return ExperimentConfig(
        model=parse_model(doc["model"]),
        kind=kind,
        horizon=parse_horizon(doc["horizon"]),
        xs=parse_grid(grid["x"]),
        monte_carlo=_monte_carlo(doc.get("monte_carlo", {})),
        output=_output(doc.get("output", {}), base_dir),
        tolerance=_tolerance(doc.get("tolerance", {})),
        heavy_alpha=_real(heavy, "alpha", "heavy", minimum=0, strict=True),
    )


def load_document(path: str) -> dict:
    """Reads a TOML or JSON document, chosen by the file suffix."""
    suffix = os.path.splitext(path)[1].lower()
    if suffix not in (".toml", ".json"):
        raise ConfigError(
            f"Unsupported config file '{path}'. Use a .toml or .json file."
        )
    try:
        if suffix == ".toml":
            with open(path, "rb") as fh:
                return tomllib.load(fh)
        with open(path, "r") as fh:
            return json.load(fh)
    except OSError as e:
        raise ConfigError(f"Cannot read config file '{path}': {e}") from e
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot parse config file '{path}': {e}") from e


def load_experiment(path: str) -> ExperimentConfig:
    doc = load_document(path)
    return parse_experiment(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def load_model(path: str) -> LevyModel:
    """Reads a model file holding either the model table or a [model] section."""
    doc = load_document(path)
    if isinstance(doc.get("model"), dict):
        _check_keys(doc, ("model",), "config")
        doc = doc["model"]
    return parse_model(doc)
