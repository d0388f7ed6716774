# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
from dataclasses import dataclass, replace
from enum import Enum
from multiprocessing.pool import ThreadPool
from typing import Callable, Iterable, Tuple

import numpy as np
import pandas as pd
from scipy import optimize
from tqdm import tqdm

from q2_drawdown.levy.errors import HorizonError
from q2_drawdown.levy.models import (
    LevyModel,
    cramer_gamma,
    dual,
    phi,
    psi,
    psi_prime,
)
from q2_drawdown.levy.utils import resolve_threads

STREAM_POLICY = "philox-block"
BLOCK_SIZE = 256
SURROGATE_C = 50.0
SURROGATE_KNOTS = 1000
MIN_PATHS = 100

# Slack used when matching grid times against window ends
TIME_EPS = 1e-12


class FunctionalKind(str, Enum):
    ustar = "ustar"
    dstar = "dstar"
    over_ustar = "over_ustar"
    under_ustar = "under_ustar"
    over_dstar = "over_dstar"
    under_dstar = "under_dstar"
    drawup = "drawup"
    drawdown = "drawdown"
    over_drawup = "over_drawup"
    over_drawdown = "over_drawdown"

    @property
    def is_negative(self) -> bool:
        """Future-drawdown kinds take values in (-inf, 0]."""
        return self in (
            FunctionalKind.dstar,
            FunctionalKind.over_dstar,
            FunctionalKind.under_dstar,
        )


KINDS = [kind.value for kind in FunctionalKind]
PATH_EXTRAS = ["x_t", "sup_x", "inf_x"]
REPRESENTATION_KINDS = ["over_ustar", "under_ustar", "over_dstar", "under_dstar"]


def tail_indicator(kind, values, x: float) -> np.ndarray:
    """1(F > x), or 1(F < -x) for the future-drawdown kinds."""
    kind = FunctionalKind(kind)
    values = np.asarray(values, dtype=float)
    return values < -x if kind.is_negative else values > x


@dataclass(frozen=True)
class PathGrid:
    horizon: float
    lookahead: float
    step: float
    jump_times: Tuple[float, ...] = ()
    extra_times: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"Grid step must be positive, got {self.step}.")
        if self.horizon < 0 or self.lookahead < 0:
            raise ValueError("Horizon and lookahead must be non-negative.")
        if not np.isfinite(self.lookahead):
            raise HorizonError(
                "An infinite lookahead must be replaced by a finite surrogate "
                "before a grid is built."
            )
        end = self.end
        if any(tau < 0 or tau > end for tau in self.jump_times):
            raise ValueError(f"Jump times must lie within [0, {end}].")

    @property
    def end(self) -> float:
        return self.horizon + self.lookahead

    @property
    def knots(self) -> np.ndarray:
        regular = np.arange(0.0, self.end, self.step)
        fixed = [0.0, self.horizon, self.end, *self.extra_times]
        return np.unique(np.concatenate([regular, fixed, list(self.jump_times)]))

    def with_jumps(self, jump_times: Iterable[float]) -> "PathGrid":
        return replace(self, jump_times=tuple(sorted(jump_times)))


@dataclass(frozen=True)
class SamplePath:
    """Path values on grid knots with per-segment extrema.

    A jump at time tau appears as two knots at tau holding the pre- and
    post-jump values. seg_max[k] and seg_min[k] bound the path between
    knots k and k + 1.
    """

    times: np.ndarray
    values: np.ndarray
    seg_max: np.ndarray
    seg_min: np.ndarray


def _jump_component(law, total: float, sign: float, rng: np.random.Generator):
    if law is None:
        return np.empty(0), np.empty(0)
    count = rng.poisson(law.rate * total)
    times = rng.uniform(0.0, total, count)
    sizes = sign * law.sample(rng, count)
    return times, sizes


def simulate_path(
    model: LevyModel, grid: PathGrid, stream: np.random.Generator, bridge: bool = True
) -> SamplePath:
    """
    Simulates X on the grid, exactly in distribution at the knots.

    Jump times of both compound Poisson parts are added to the grid. With
    bridge=True, the extrema between knots are drawn from the exact law of
    the Brownian bridge maximum (resp. minimum) given the endpoint values.
    """
    total = grid.end
    up_times, up_sizes = _jump_component(model.jumps_up, total, 1.0, stream)
    down_times, down_sizes = _jump_component(model.jumps_down, total, -1.0, stream)
    jump_times = np.concatenate([up_times, down_times])
    jump_sizes = np.concatenate([up_sizes, down_sizes])
    grid = grid.with_jumps(jump_times)

    regular = np.unique(np.concatenate([grid.knots, jump_times]))
    # Order key: regular knot, pre-jump copy, post-jump copy
    times = np.concatenate([regular, jump_times, jump_times])
    keys = np.concatenate(
        [np.zeros(regular.size), np.ones(jump_times.size), 2 * np.ones(jump_times.size)]
    )
    jumps = np.concatenate(
        [np.zeros(regular.size), np.zeros(jump_times.size), jump_sizes]
    )
    order = np.lexsort((keys, times))
    times, keys, jumps = times[order], keys[order], jumps[order]

    # Drop the regular knots that coincide with a jump time
    duplicate = (keys == 0) & np.isin(times, jump_times)
    times, jumps = times[~duplicate], jumps[~duplicate]

    dt = np.diff(times)
    gaussian = stream.standard_normal(dt.size)
    increments = model.drift * dt + model.sigma * np.sqrt(dt) * gaussian + jumps[1:]
    values = np.concatenate([[0.0], np.cumsum(increments)])

    start, stop = values[:-1], values[1:]
    if bridge and model.sigma > 0:
        spread = 2.0 * model.sigma**2 * dt
        gap = np.square(stop - start)
        up = np.sqrt(gap + spread * stream.standard_exponential(dt.size))
        down = np.sqrt(gap + spread * stream.standard_exponential(dt.size))
        seg_max = 0.5 * (start + stop + up)
        seg_min = 0.5 * (start + stop - down)
    else:
        seg_max = np.maximum(start, stop)
        seg_min = np.minimum(start, stop)
    return SamplePath(times=times, values=values, seg_max=seg_max, seg_min=seg_min)


def functionals(path: SamplePath, t: float, s: float, lookahead=None) -> dict:
    """All ten path functionals at horizon t and lookahead s in one sweep.

    U*_{t,s} and D*_{t,s} are the extrema of X - X_t over the closed window
    [t, t + s]. Their running extrema over starts u <= t use the windows
    [u, t + s], which share the common end t + s. The running maxima of the
    drawup and drawdown are lower bounds, exact at the knots.

    Args:
        path (SamplePath): Path covering [0, t + s], or [0, t] when the
            lookahead is given.
        t (float): Horizon.
        s (float): Lookahead, may be inf when the lookahead is given.
        lookahead (tuple): (sup, inf) of X_{t+r} - X_t over r in [0, s],
            drawn apart from the path.
    """
    times, values = path.times, path.values
    end = t if lookahead is not None else t + s
    if times[-1] < end - 1e-9 * max(1.0, end):
        raise HorizonError(
            f"Path ends at {times[-1]}, before the required horizon {end}."
        )

    idx_t = int(np.searchsorted(times, t + TIME_EPS, side="right")) - 1
    start_values = values[: idx_t + 1]
    x_t = values[idx_t]

    if lookahead is None:
        idx_end = int(np.searchsorted(times, t + s + TIME_EPS, side="right")) - 1
        ahead_up = max(path.seg_max[idx_t:idx_end].max(initial=x_t) - x_t, 0.0)
        ahead_down = min(path.seg_min[idx_t:idx_end].min(initial=x_t) - x_t, 0.0)
    else:
        ahead_up, ahead_down = lookahead

    # Extrema of X over [u, t] for every knot u <= t
    head_max = np.append(np.maximum(start_values[:-1], path.seg_max[:idx_t]), x_t)
    head_min = np.append(np.minimum(start_values[:-1], path.seg_min[:idx_t]), x_t)
    suffix_max = np.maximum.accumulate(head_max[::-1])[::-1]
    suffix_min = np.minimum.accumulate(head_min[::-1])[::-1]
    future_up = np.maximum(suffix_max, x_t + ahead_up) - start_values
    future_down = np.minimum(suffix_min, x_t + ahead_down) - start_values

    # Starts at the extremum inside each segment before t; exact at the
    # segment maximum for U* and at the segment minimum for D*
    seg_max, seg_min = path.seg_max[:idx_t], path.seg_min[:idx_t]
    rest_max = np.maximum(suffix_max[1:], x_t + ahead_up)
    rest_min = np.minimum(suffix_min[1:], x_t + ahead_down)
    up_from_high = np.maximum(seg_max, rest_max) - seg_max
    up_from_low = rest_max - seg_min
    down_from_low = np.minimum(seg_min, rest_min) - seg_min
    down_from_high = rest_min - seg_max

    # Running extrema of X up to each knot, including the segments before it
    seg_min_before = np.concatenate([[np.inf], path.seg_min[:idx_t]])
    seg_max_before = np.concatenate([[-np.inf], path.seg_max[:idx_t]])
    running_min = np.minimum.accumulate(np.minimum(start_values, seg_min_before))
    running_max = np.maximum.accumulate(np.maximum(start_values, seg_max_before))

    drawups = start_values - running_min
    drawdowns = running_max - start_values
    # A segment extremum beats the knot value inside the segment
    if idx_t > 0:
        seg_up = path.seg_max[:idx_t] - running_min[:idx_t]
        seg_down = running_max[:idx_t] - path.seg_min[:idx_t]
        over_drawup = max(drawups.max(), seg_up.max())
        over_drawdown = max(drawdowns.max(), seg_down.max())
    else:
        over_drawup, over_drawdown = 0.0, 0.0

    return {
        "ustar": future_up[idx_t],
        "dstar": future_down[idx_t],
        "over_ustar": max(future_up.max(), up_from_low.max(initial=0.0)),
        "under_ustar": min(future_up.min(), up_from_high.min(initial=np.inf)),
        "over_dstar": max(future_down.max(), down_from_low.max(initial=-np.inf)),
        "under_dstar": min(future_down.min(), down_from_high.min(initial=0.0)),
        "drawup": drawups[idx_t],
        "drawdown": drawdowns[idx_t],
        "over_drawup": over_drawup,
        "over_drawdown": over_drawdown,
        "x_t": x_t,
        "sup_x": running_max[idx_t],
        "inf_x": running_min[idx_t],
    }


@dataclass(frozen=True)
class McEstimate:
    n: int
    mean: float
    std_error: float
    ci95: Tuple[float, float]
    seed: int
    stream_policy: str = STREAM_POLICY
    delta: float = None

    @classmethod
    def from_values(cls, values, seed: int, delta: float = None) -> "McEstimate":
        values = np.asarray(values, dtype=float)
        n = values.size
        mean = math.fsum(values) / n
        var = math.fsum(np.square(values - mean)) / (n - 1) if n > 1 else 0.0
        se = math.sqrt(var / n)
        return cls(
            n=n,
            mean=mean,
            std_error=se,
            ci95=(mean - 1.96 * se, mean + 1.96 * se),
            seed=seed,
            delta=delta,
        )

    @classmethod
    def from_indicators(cls, hits, seed: int, delta: float = None) -> "McEstimate":
        hits = np.asarray(hits, dtype=float)
        n = hits.size
        p = math.fsum(hits) / n
        se = math.sqrt(max(p * (1.0 - p), 0.0) / n)
        return cls(
            n=n,
            mean=p,
            std_error=se,
            ci95=(p - 1.96 * se, p + 1.96 * se),
            seed=seed,
            delta=delta,
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "std_error": self.std_error,
            "ci95": list(self.ci95),
            "seed": self.seed,
            "stream_policy": self.stream_policy,
            "delta": self.delta,
        }


def infinite_lookahead(model: LevyModel, t: float, c: float = SURROGATE_C) -> float:
    """Finite lookahead standing in for s = inf."""
    slope = psi_prime(model, 0.0)
    if slope == 0:
        raise HorizonError("An infinite lookahead needs a model with non-zero mean.")
    return t + c * (model.sigma**2 + 1.0) / abs(slope)


def _surrogate_extrema(model, rng, bridge, c) -> Tuple[float, float]:
    horizon = infinite_lookahead(model, 0.0, c)
    grid = PathGrid(horizon, 0.0, horizon / SURROGATE_KNOTS)
    path = simulate_path(model, grid, rng, bridge)
    return max(path.seg_max.max(), 0.0), min(path.seg_min.min(), 0.0)


def sample_infinite_lookahead(
    model: LevyModel,
    rng: np.random.Generator,
    bridge: bool = True,
    c: float = SURROGATE_C,
) -> Tuple[float, float]:
    """
    One draw of (sup, inf) of X over [0, inf) for a model with non-zero mean.

    The side the mean drifts towards is returned as +inf or -inf. The other
    side is exponential with rate Phi(0) (of the model, or of its dual) when
    no jumps act on it. Otherwise it is read off a path on the surrogate
    horizon of infinite_lookahead. Segment extrema carry the bridge law, so
    that path needs no fine step.
    """
    slope = psi_prime(model, 0.0)
    if slope == 0:
        raise HorizonError("An infinite lookahead needs a model with non-zero mean.")
    if slope < 0:
        if model.jumps_up is None:
            return rng.exponential(1.0 / phi(model, 0.0)), -np.inf
        return _surrogate_extrema(model, rng, bridge, c)[0], -np.inf
    if model.jumps_down is None:
        return np.inf, -rng.exponential(1.0 / phi(dual(model), 0.0))
    return np.inf, _surrogate_extrema(model, rng, bridge, c)[1]


def block_stream(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _run_blocks(
    draw: Callable,
    n: int,
    seed: int,
    workers: int = None,
    block_size: int = BLOCK_SIZE,
    progress: bool = False,
) -> list:
    """
    Draws n records in blocks of block_size paths.

    Block b always uses the stream derived from (seed, b), so the output
    depends on (seed, n, block_size) only, never on the worker count.

    Args:
        draw (Callable): Maps a generator to one record (a dict).
        n (int): Number of paths.
        seed (int): Root seed.
        workers (int): Threads; defaults to Q2_DRAWDOWN_THREADS or 1.
        block_size (int): Paths per block.
        progress (bool): Show a tqdm progress bar over blocks.

    Returns:
        list: The n records in path order.
    """
    n_blocks = math.ceil(n / block_size)
    workers = resolve_threads(workers)

    def run_block(block: int) -> list:
        rng = block_stream(seed, block)
        size = min(block_size, n - block * block_size)
        return [draw(rng) for _ in range(size)]

    # Split the blocks into evenly sized partitions, one per worker
    partitions = np.array_split(np.arange(n_blocks), min(workers, n_blocks))

    with tqdm(total=n_blocks, disable=not progress, desc="MC blocks") as bar:

        def run_partition(blocks) -> list:
            records = []
            for block in blocks:
                records.append(run_block(int(block)))
                bar.update(1)
            return records

        if workers == 1:
            results = [run_partition(blocks) for blocks in partitions]
        else:
            with ThreadPool(processes=len(partitions)) as pool:
                results = pool.map(run_partition, partitions)

    return [record for part in results for block in part for record in block]


def _default_step(*scales: float) -> float:
    finite = [x for x in scales if 0 < x < np.inf]
    if not finite:
        raise HorizonError("Cannot choose a grid step for zero-length horizons.")
    return min(finite) / 2000.0


def _path_functionals(model, t, s, step, rng, bridge, c) -> dict:
    if np.isinf(s):
        path = simulate_path(model, PathGrid(t, 0.0, step), rng, bridge)
        ahead = sample_infinite_lookahead(model, rng, bridge, c)
        return functionals(path, t, s, lookahead=ahead)
    return functionals(simulate_path(model, PathGrid(t, s, step), rng, bridge), t, s)


def mc_samples(
    model: LevyModel,
    t: float,
    s: float,
    n: int,
    seed: int,
    delta: float = None,
    bridge: bool = True,
    workers: int = None,
    block_size: int = BLOCK_SIZE,
    surrogate_c: float = SURROGATE_C,
    progress: bool = False,
) -> pd.DataFrame:
    """Samples of every functional at fixed (t, s), one row per path.

    s = inf draws the lookahead extrema from sample_infinite_lookahead, so
    only [0, t] is discretised.
    """
    delta = delta or _default_step(t, s)

    def draw(rng):
        return _path_functionals(model, t, s, delta, rng, bridge, surrogate_c)

    records = _run_blocks(draw, n, seed, workers, block_size, progress)
    df = pd.DataFrame.from_records(records, columns=KINDS + PATH_EXTRAS)
    df.attrs.update({"seed": seed, "delta": delta, "t": t, "s": s})
    return df


def mc_tail(
    model: LevyModel,
    kind: str,
    t: float,
    s: float,
    x: float,
    n: int,
    seed: int,
    **kwargs,
) -> McEstimate:
    """Monte Carlo estimate of P(F > x), or P(F < -x) for drawdown kinds."""
    if n < MIN_PATHS:
        raise ValueError(f"At least {MIN_PATHS} paths are required, got {n}.")
    samples = mc_samples(model, t, s, n, seed, **kwargs)
    return McEstimate.from_indicators(
        tail_indicator(kind, samples[FunctionalKind(kind).value], x),
        seed=seed,
        delta=samples.attrs["delta"],
    )


def sample_by_representation(
    model: LevyModel,
    t: float,
    s: float,
    stream: np.random.Generator,
    delta: float,
    bridge: bool = True,
    surrogate_c: float = SURROGATE_C,
) -> dict:
    """
    One draw of the running extrema of the future drawup and drawdown,
    assembled from a path on [0, t] and an independent lookahead.

    A finite lookahead uses the drawup and drawdown of a fresh path on
    [0, s], which share the law of the supremum and minus the infimum of
    X over [0, s]. s = inf uses sample_infinite_lookahead.
    """
    past = functionals(
        simulate_path(model, PathGrid(t, 0.0, delta), stream, bridge), t, 0.0
    )
    if np.isinf(s):
        up_s, down_s = sample_infinite_lookahead(model, stream, bridge, surrogate_c)
        down_s = -down_s
    elif s > 0:
        fresh = functionals(
            simulate_path(model, PathGrid(s, 0.0, delta), stream, bridge), s, 0.0
        )
        up_s, down_s = fresh["drawup"], fresh["drawdown"]
    else:
        up_s, down_s = 0.0, 0.0
    return {
        "over_ustar": max(up_s + past["drawup"], past["over_drawup"]),
        "under_ustar": max(up_s - past["drawdown"], 0.0),
        "over_dstar": min(past["drawup"] - down_s, 0.0),
        "under_dstar": -max(down_s + past["drawdown"], past["over_drawdown"]),
    }


def mc_representation_samples(
    model: LevyModel,
    t: float,
    s: float,
    n: int,
    seed: int,
    delta: float = None,
    bridge: bool = True,
    workers: int = None,
    block_size: int = BLOCK_SIZE,
    surrogate_c: float = SURROGATE_C,
    progress: bool = False,
) -> pd.DataFrame:
    delta = delta or _default_step(t, s)

    def draw(rng):
        return sample_by_representation(
            model, t, s, rng, delta, bridge, surrogate_c
        )

    records = _run_blocks(draw, n, seed, workers, block_size, progress)
    df = pd.DataFrame.from_records(records, columns=REPRESENTATION_KINDS)
    df.attrs.update({"seed": seed, "delta": delta, "t": t, "s": s})
    return df


@dataclass(frozen=True)
class ExponentialHorizonRun:
    samples: pd.DataFrame
    seed: int
    delta: float
    q: float
    beta: float

    def tail(self, kind: str, x: float) -> McEstimate:
        kind = FunctionalKind(kind).value
        return McEstimate.from_indicators(
            tail_indicator(kind, self.samples[kind], x),
            seed=self.seed,
            delta=self.delta,
        )

    def horizon_mean(self) -> McEstimate:
        return McEstimate.from_values(
            self.samples["t"], seed=self.seed, delta=self.delta
        )


def sample_exponential_horizons(
    model: LevyModel,
    q: float,
    beta: float,
    n: int,
    seed: int,
    delta: float = None,
    bridge: bool = True,
    workers: int = None,
    block_size: int = BLOCK_SIZE,
    surrogate_c: float = SURROGATE_C,
    progress: bool = False,
) -> ExponentialHorizonRun:
    """
    Functionals at independent exponential horizons t = e_q and s = e_beta.

    beta = 0 stands for s = inf and beta = inf for s = 0.
    """
    if q <= 0:
        raise ValueError(f"Horizon rate q must be positive, got {q}.")
    if beta < 0:
        raise ValueError(f"Lookahead rate beta must be non-negative, got {beta}.")
    delta = delta or _default_step(1.0 / q, 1.0 / beta if beta > 0 else np.inf)

    def draw(rng):
        t = rng.exponential(1.0 / q)
        if beta == 0:
            s = np.inf
        elif np.isinf(beta):
            s = 0.0
        else:
            s = rng.exponential(1.0 / beta)
        record = _path_functionals(model, t, s, delta, rng, bridge, surrogate_c)
        record.update({"t": t, "s": s})
        return record

    records = _run_blocks(draw, n, seed, workers, block_size, progress)
    columns = KINDS + PATH_EXTRAS + ["t", "s"]
    samples = pd.DataFrame.from_records(records, columns=columns)
    return ExponentialHorizonRun(samples, seed=seed, delta=delta, q=q, beta=beta)


def occupation_horizon(model: LevyModel, t: float, n: int) -> float:
    """
    Truncation time after which positive occupation is negligible.

    Beyond H the probability of revisiting [0, inf) is bounded by
    exp(H psi(theta*)), with theta* the minimiser of psi.
    """
    gamma = cramer_gamma(model)
    theta_star = optimize.minimize_scalar(
        lambda th: psi(model, th), bounds=(0.0, gamma), method="bounded"
    ).x
    floor = psi(model, theta_star)
    return max(t, math.log(0.05 / math.sqrt(n)) / floor)


def occupation_atom(
    model: LevyModel,
    t: float,
    n: int,
    seed: int,
    delta: float = None,
    workers: int = None,
    block_size: int = BLOCK_SIZE,
    progress: bool = False,
) -> McEstimate:
    """MC estimate of P(time spent in [0, inf) < t), over the whole path."""
    horizon = occupation_horizon(model, t, n)
    delta = delta or horizon / 10000.0
    grid = PathGrid(horizon, 0.0, delta)

    def draw(rng):
        path = simulate_path(model, grid, rng, bridge=False)
        occupied = math.fsum(np.diff(path.times)[path.values[:-1] >= 0])
        return {"occupation": occupied}

    records = _run_blocks(draw, n, seed, workers, block_size, progress)
    occupation = np.array([r["occupation"] for r in records])
    return McEstimate.from_indicators(occupation < t, seed=seed, delta=delta)


def mc_running_extrema(
    model: LevyModel,
    times,
    n: int,
    seed: int,
    delta: float = None,
    bridge: bool = True,
    workers: int = None,
    block_size: int = BLOCK_SIZE,
    progress: bool = False,
) -> pd.DataFrame:
    """Running supremum and infimum of X at each of the given times.

    Returns a long table with columns path, time, sup_x, inf_x.
    """
    times = np.sort(np.asarray(times, dtype=float))
    end = float(times[-1])
    delta = delta or _default_step(end)
    grid = PathGrid(end, 0.0, delta, extra_times=tuple(times))

    def draw(rng):
        path = simulate_path(model, grid, rng, bridge)
        return [functionals(path, tau, 0.0) for tau in times]

    records = _run_blocks(draw, n, seed, workers, block_size, progress)
    rows = [
        {"path": i, "time": tau, "sup_x": f["sup_x"], "inf_x": f["inf_x"]}
        for i, record in enumerate(records)
        for tau, f in zip(times, record)
    ]
    df = pd.DataFrame(rows)
    df.attrs.update({"seed": seed, "delta": delta})
    return df
