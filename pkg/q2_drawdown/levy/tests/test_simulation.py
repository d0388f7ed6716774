# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
import unittest

import numpy as np
import pandas as pd
from scipy import special, stats

from q2_drawdown.levy.errors import HorizonError, NoCramerRoot
from q2_drawdown.levy.models import LevyModel, brownian_motion, dual, kou
from q2_drawdown.levy.simulation import (
    KINDS,
    FunctionalKind,
    McEstimate,
    PathGrid,
    SamplePath,
    block_stream,
    functionals,
    infinite_lookahead,
    mc_representation_samples,
    mc_running_extrema,
    mc_samples,
    mc_tail,
    occupation_atom,
    sample_by_representation,
    sample_exponential_horizons,
    sample_infinite_lookahead,
    simulate_path,
    tail_indicator,
)

# P(sup_{s<=1} B_s > 1) for a standard Brownian motion
REFLECTION = 2.0 * special.ndtr(-1.0)


def within(estimate: McEstimate, target: float, width: float = 4.0) -> bool:
    return abs(estimate.mean - target) <= width * max(estimate.std_error, 1e-12)


class TestFunctionals(unittest.TestCase):
    def setUp(self):
        values = np.array([0.0, 1.0, -1.0, 2.0])
        self.path = SamplePath(
            times=np.array([0.0, 1.0, 2.0, 3.0]),
            values=values,
            seg_max=np.maximum(values[:-1], values[1:]),
            seg_min=np.minimum(values[:-1], values[1:]),
        )

    def test_all_functionals(self):
        obs = functionals(self.path, 2.0, 1.0)
        exp = {
            "ustar": 3.0,
            "dstar": 0.0,
            "over_ustar": 3.0,
            "under_ustar": 1.0,
            "over_dstar": 0.0,
            "under_dstar": -2.0,
            "drawup": 0.0,
            "drawdown": 2.0,
            "over_drawup": 1.0,
            "over_drawdown": 2.0,
            "x_t": -1.0,
            "sup_x": 1.0,
            "inf_x": -1.0,
        }
        for key, value in exp.items():
            self.assertAlmostEqual(obs[key], value, msg=key)

    def test_zero_lookahead(self):
        obs = functionals(self.path, 2.0, 0.0)
        self.assertEqual(obs["ustar"], 0.0)
        self.assertEqual(obs["under_ustar"], 0.0)
        self.assertEqual(obs["over_ustar"], obs["over_drawup"])
        self.assertEqual(obs["under_dstar"], -2.0)
        self.assertEqual(obs["drawdown"], 2.0)

    def test_windows_end_at_horizon_plus_lookahead(self):
        steps = block_stream(0, 0).standard_normal(100)
        values = np.concatenate([[0.0], np.cumsum(steps)])
        path = SamplePath(
            times=np.arange(101.0),
            values=values,
            seg_max=np.maximum(values[:-1], values[1:]),
            seg_min=np.minimum(values[:-1], values[1:]),
        )
        ups = [values[u:86].max() - values[u] for u in range(61)]
        downs = [values[u:86].min() - values[u] for u in range(61)]
        obs = functionals(path, 60.0, 25.0)
        self.assertAlmostEqual(obs["ustar"], ups[-1])
        self.assertAlmostEqual(obs["dstar"], downs[-1])
        self.assertAlmostEqual(obs["over_ustar"], max(ups))
        self.assertAlmostEqual(obs["under_ustar"], min(ups))
        self.assertAlmostEqual(obs["over_dstar"], max(downs))
        self.assertAlmostEqual(obs["under_dstar"], min(downs))

    def test_separate_lookahead(self):
        obs = functionals(self.path, 2.0, np.inf, lookahead=(3.0, -np.inf))
        self.assertEqual(obs["ustar"], 3.0)
        self.assertEqual(obs["over_ustar"], 3.0)
        self.assertEqual(obs["under_ustar"], 1.0)
        self.assertEqual(obs["dstar"], -np.inf)
        self.assertEqual(obs["under_dstar"], -np.inf)

    def test_short_path(self):
        with self.assertRaises(HorizonError):
            functionals(self.path, 3.0, 1.0)

    def test_tail_indicator(self):
        values = np.array([-2.0, -0.5, 0.5, 2.0])
        np.testing.assert_array_equal(
            tail_indicator("drawup", values, 1.0), [False, False, False, True]
        )
        np.testing.assert_array_equal(
            tail_indicator("under_dstar", values, 1.0), [True, False, False, False]
        )
        self.assertTrue(FunctionalKind("dstar").is_negative)
        self.assertFalse(FunctionalKind("over_ustar").is_negative)


class TestPathGrid(unittest.TestCase):
    def test_knots(self):
        grid = PathGrid(horizon=1.0, lookahead=0.5, step=0.4, extra_times=(0.7,))
        np.testing.assert_allclose(grid.knots, [0.0, 0.4, 0.7, 0.8, 1.0, 1.2, 1.5])

    def test_invalid(self):
        with self.assertRaises(ValueError):
            PathGrid(horizon=1.0, lookahead=0.0, step=0.0)
        with self.assertRaises(HorizonError):
            PathGrid(horizon=1.0, lookahead=np.inf, step=0.1)
        with self.assertRaises(ValueError):
            PathGrid(horizon=1.0, lookahead=0.0, step=0.1, jump_times=(2.0,))

    def test_jump_path_shape(self):
        model = kou(-1.0, 0.0, rate_up=2.0, mean_up=1.0)
        path = simulate_path(model, PathGrid(5.0, 0.0, 0.25), block_stream(3, 0))
        self.assertEqual(path.values[0], 0.0)
        self.assertEqual(len(path.values), len(path.times))
        self.assertEqual(len(path.seg_max), len(path.times) - 1)
        self.assertTrue(np.all(np.diff(path.times) >= 0))
        np.testing.assert_array_equal(
            path.seg_max, np.maximum(path.values[:-1], path.values[1:])
        )


class TestMcEstimate(unittest.TestCase):
    def test_from_indicators(self):
        est = McEstimate.from_indicators([1, 0, 1, 1], seed=5, delta=0.1)
        self.assertEqual(est.n, 4)
        self.assertEqual(est.mean, 0.75)
        self.assertAlmostEqual(est.std_error, math.sqrt(0.1875 / 4))
        self.assertEqual(est.stream_policy, "philox-block")
        self.assertAlmostEqual(est.ci95[1] - est.ci95[0], 2 * 1.96 * est.std_error)

    def test_from_values(self):
        est = McEstimate.from_values([1.0, 2.0, 3.0], seed=1)
        self.assertEqual(est.mean, 2.0)
        self.assertAlmostEqual(est.std_error, math.sqrt(1.0 / 3.0))
        record = est.to_dict()
        self.assertEqual(record["seed"], 1)
        self.assertIsNone(record["delta"])
        self.assertEqual(len(record["ci95"]), 2)


class TestMonteCarlo(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.bm = brownian_motion(0.0, 1.0)

    def test_reproducible_across_workers(self):
        model = kou(-0.2, 0.5, rate_down=1.0, mean_down=0.5)
        kwargs = dict(t=1.0, s=0.5, n=300, seed=7, delta=0.02, block_size=64)
        single = mc_samples(model, workers=1, **kwargs)
        pooled = mc_samples(model, workers=3, **kwargs)
        pd.testing.assert_frame_equal(single, pooled)
        self.assertListEqual(list(single.columns[: len(KINDS)]), KINDS)

    def test_duality(self):
        model = kou(0.3, 1.0, rate_up=1.0, mean_up=0.5)
        kwargs = dict(t=1.0, s=1.0, n=1500, delta=0.01)
        under_dstar = mc_samples(model, seed=31, **kwargs)["under_dstar"]
        over_ustar = mc_samples(dual(model), seed=32, **kwargs)["over_ustar"]
        result = stats.ks_2samp(under_dstar, -over_ustar)
        self.assertGreater(result.pvalue, 0.01)

    def test_running_supremum(self):
        df = mc_running_extrema(self.bm, [0.5, 1.0], n=2000, seed=1, delta=0.05)
        self.assertEqual(len(df), 4000)
        at_one = df[df["time"] == 1.0]
        est = McEstimate.from_indicators(at_one["sup_x"] > 1.0, seed=1)
        self.assertTrue(within(est, REFLECTION), est)
        self.assertTrue(np.all(df["sup_x"] >= 0) and np.all(df["inf_x"] <= 0))

    def test_drawup_has_law_of_supremum(self):
        est = mc_tail(self.bm, "drawup", 1.0, 0.0, 1.0, n=2000, seed=11, delta=0.05)
        self.assertTrue(within(est, REFLECTION), est)

    def test_future_drawup(self):
        est = mc_tail(self.bm, "ustar", 0.5, 1.0, 1.0, n=2000, seed=12, delta=0.05)
        self.assertTrue(within(est, REFLECTION), est)

    def test_terminal_mean_with_jumps(self):
        model = kou(-1.0, 0.0, rate_up=2.0, mean_up=1.0)
        df = mc_samples(model, 1.0, 0.0, n=1000, seed=4, delta=0.1)
        est = McEstimate.from_values(df["x_t"], seed=4)
        self.assertTrue(within(est, 1.0), est)

    def test_minimum_paths(self):
        with self.assertRaises(ValueError):
            mc_tail(self.bm, "drawup", 1.0, 0.0, 1.0, n=10, seed=1)

    def test_infinite_lookahead(self):
        model = brownian_motion(-0.5, 1.0)
        self.assertAlmostEqual(infinite_lookahead(model, 1.0, c=10.0), 41.0)
        with self.assertRaises(HorizonError):
            infinite_lookahead(self.bm, 1.0)

    def test_infinite_lookahead_law(self):
        model = brownian_motion(-0.5, 1.0)
        rng = block_stream(2, 0)
        draws = np.array([sample_infinite_lookahead(model, rng) for _ in range(2000)])
        self.assertTrue(np.all(np.isneginf(draws[:, 1])))
        # Exponential with rate Phi(0) = 1
        est = McEstimate.from_values(draws[:, 0], seed=2)
        self.assertTrue(within(est, 1.0), est)
        up, down = sample_infinite_lookahead(dual(model), rng)
        self.assertEqual(up, np.inf)
        self.assertLessEqual(down, 0.0)
        with self.assertRaises(HorizonError):
            sample_infinite_lookahead(self.bm, rng)

    def test_infinite_lookahead_with_jumps(self):
        # Ruin probability 0.5 e^{-x} for exponential jumps up
        model = kou(-1.0, 0.0, rate_up=1.0, mean_up=0.5)
        rng = block_stream(3, 0)
        sups = np.array([sample_infinite_lookahead(model, rng)[0] for _ in range(1000)])
        est = McEstimate.from_indicators(sups > 1.0, seed=3)
        self.assertTrue(within(est, 0.5 * math.exp(-1.0)), est)

    def test_infinite_lookahead_samples(self):
        df = mc_samples(brownian_motion(-0.5, 1.0), 1.0, np.inf, n=2000, seed=6)
        self.assertAlmostEqual(df.attrs["delta"], 0.0005)
        self.assertTrue(np.isinf(df.attrs["s"]))
        self.assertTrue(np.all(np.isneginf(df["dstar"])))
        est = McEstimate.from_indicators(df["ustar"] > 1.0, seed=6)
        self.assertTrue(within(est, math.exp(-1.0)), est)

    def test_exponential_horizons(self):
        run = sample_exponential_horizons(
            brownian_motion(-0.5, 1.0), q=2.0, beta=np.inf, n=500, seed=9, delta=0.01
        )
        self.assertTrue(within(run.horizon_mean(), 0.5), run.horizon_mean())
        self.assertTrue(np.all(run.samples["s"] == 0.0))
        self.assertEqual(run.tail("under_ustar", 0.0).mean, 0.0)
        self.assertEqual(run.tail("over_dstar", 0.0).mean, 0.0)

    def test_exponential_horizons_arguments(self):
        with self.assertRaises(ValueError):
            sample_exponential_horizons(self.bm, q=0.0, beta=1.0, n=100, seed=1)
        with self.assertRaises(ValueError):
            sample_exponential_horizons(self.bm, q=1.0, beta=-1.0, n=100, seed=1)

    def test_occupation_atom(self):
        est = occupation_atom(brownian_motion(-1.0, 1.0), 1.0, n=200, seed=2)
        self.assertEqual(est.n, 200)
        self.assertTrue(0.0 < est.mean < 1.0)
        with self.assertRaises(NoCramerRoot):
            occupation_atom(brownian_motion(1.0, 1.0), 1.0, n=200, seed=2)


class TestRepresentation(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.model = kou(-0.3, 1.0, rate_down=1.0, mean_down=0.5)

    def test_agrees_with_direct_sampling(self):
        kwargs = dict(t=1.0, s=1.0, n=2000, delta=0.005)
        direct = mc_samples(self.model, seed=41, **kwargs)
        assembled = mc_representation_samples(self.model, seed=42, **kwargs)
        for kind in ("over_ustar", "under_ustar"):
            result = stats.ks_2samp(direct[kind], assembled[kind])
            self.assertGreater(result.pvalue, 0.01, kind)

    def test_zero_lookahead(self):
        draw = sample_by_representation(self.model, 1.0, 0.0, block_stream(5, 0), 0.01)
        self.assertEqual(draw["under_ustar"], 0.0)
        self.assertEqual(draw["over_dstar"], 0.0)

    def test_infinite_lookahead(self):
        draw = sample_by_representation(
            brownian_motion(-0.5, 1.0), 1.0, np.inf, block_stream(6, 0), 0.01
        )
        self.assertTrue(np.isfinite(draw["over_ustar"]))
        self.assertEqual(draw["under_dstar"], -np.inf)

    def test_deterministic_drift(self):
        model = LevyModel(drift=-1.0, allow_monotone=True)
        kwargs = dict(t=1.0, s=1.0, n=100, seed=1, delta=0.1)
        for samples in (
            mc_samples(model, **kwargs),
            mc_representation_samples(model, **kwargs),
        ):
            np.testing.assert_allclose(samples["over_ustar"], 0.0, atol=1e-12)


if __name__ == "__main__":
    unittest.main()
