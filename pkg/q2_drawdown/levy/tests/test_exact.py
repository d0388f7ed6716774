# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
import unittest

import mpmath as mp
import numpy as np

from q2_drawdown.levy.errors import (
    DomainError,
    NumericalWarning,
    PoleProximity,
    UnsupportedModel,
)
from q2_drawdown.levy.exact import (
    EXACT_KINDS,
    ExactTailRequest,
    ExponentialHorizons,
    FixedHorizons,
    _RationalTails,
    double_laplace,
    exact_table,
    exact_tail,
    expected_running_max,
    invert_double_laplace_u,
    invert_to_fixed,
    invert_to_fixed_grid,
    tail_exp_horizons,
    tail_exp_q_infinite_s,
    underline_ustar_fixed_t,
)
from q2_drawdown.levy.models import (
    LevyModel,
    TemperedParetoJumps,
    brownian_motion,
    dual,
    kou,
)
from q2_drawdown.levy.simulation import mc_tail, sample_exponential_horizons

# Models drifting down carry the U* kinds, models drifting up the D* kinds
DOWN = brownian_motion(-0.5, 1.0)
UP = brownian_motion(0.5, 1.0)
DOWN_JUMPS = kou(-0.5, 1.0, rate_down=1.0, mean_down=0.5)
UP_JUMPS = kou(1.0, 1.0, rate_down=1.0, mean_down=0.5)


def model_for(kind: str, jumps: bool = False) -> LevyModel:
    if kind.endswith("ustar"):
        return DOWN_JUMPS if jumps else DOWN
    return UP_JUMPS if jumps else UP


class TestExponentialHorizons(unittest.TestCase):
    def test_under_ustar_infinite_lookahead(self):
        self.assertAlmostEqual(
            tail_exp_q_infinite_s(DOWN, "under_ustar", 1.0, 1.0),
            0.5 * math.exp(-1.0),
            places=10,
        )

    def test_over_dstar_infinite_lookahead(self):
        for x in (0.0, 0.5, 2.0):
            self.assertAlmostEqual(
                tail_exp_q_infinite_s(UP, "over_dstar", 1.0, x),
                0.5 * math.exp(-x),
                places=8,
            )

    def test_over_ustar_at_zero(self):
        for beta in (0.0, 0.5, np.inf):
            self.assertAlmostEqual(
                tail_exp_horizons(DOWN, "over_ustar", 1.0, beta, 0.0), 1.0, places=12
            )

    def test_vanishes_for_large_x(self):
        for kind in EXACT_KINDS:
            value = tail_exp_horizons(model_for(kind), kind, 1.0, 0.5, 12.0)
            self.assertLess(value, 1e-6, kind)

    def test_probabilities_and_monotonicity(self):
        xs = [0.0, 0.25, 1.0, 3.0]
        for jumps in (False, True):
            for kind in EXACT_KINDS:
                model = model_for(kind, jumps)
                values = [tail_exp_horizons(model, kind, 1.0, 0.7, x) for x in xs]
                self.assertTrue(all(0.0 <= v <= 1.0 for v in values), kind)
                self.assertTrue(np.all(np.diff(values) <= 1e-10), kind)

    def test_limit_beta_to_zero(self):
        for kind in EXACT_KINDS:
            model = model_for(kind)
            at_zero = tail_exp_horizons(model, kind, 1.0, 0.0, 0.8)
            near_zero = tail_exp_horizons(model, kind, 1.0, 1e-9, 0.8)
            self.assertAlmostEqual(at_zero, near_zero, places=6, msg=kind)

    def test_continuity_at_beta_equal_q(self):
        at_q = tail_exp_horizons(DOWN_JUMPS, "under_ustar", 1.3, 1.3, 0.5)
        for beta in (1.3 * (1 - 1e-9), 1.3 * (1 + 1e-5), 1.3 * (1 - 1e-5)):
            near = tail_exp_horizons(DOWN_JUMPS, "under_ustar", 1.3, beta, 0.5)
            self.assertAlmostEqual(at_q, near, places=4)

    def test_zero_lookahead(self):
        self.assertEqual(tail_exp_horizons(DOWN, "under_ustar", 1.0, np.inf, 0.5), 0.0)
        self.assertEqual(tail_exp_horizons(UP, "over_dstar", 1.0, np.inf, 0.5), 0.0)

    def test_spectrally_positive_uses_dual(self):
        model = kou(0.5, 1.0, rate_up=1.0, mean_up=0.5)
        self.assertAlmostEqual(
            tail_exp_horizons(model, "over_dstar", 1.0, 0.5, 1.0),
            tail_exp_horizons(dual(model), "under_ustar", 1.0, 0.5, 1.0),
            places=12,
        )

    def test_printed_convention_warns(self):
        with self.assertWarns(NumericalWarning):
            value = tail_exp_horizons(
                DOWN, "under_ustar", 1.0, 0.5, 1.0, convention="printed"
            )
        self.assertLess(value, 0.0)

    def test_extended_precision_agrees(self):
        for jumps in (False, True):
            for kind in EXACT_KINDS:
                model = model_for(kind, jumps)
                with mp.workdps(30):
                    precise = _RationalTails(model, kind, 0.6)(mp.mpf(1), mp.mpf(0.7))
                self.assertAlmostEqual(
                    tail_exp_horizons(model, kind, 1.0, 0.7, 0.6),
                    float(precise),
                    places=6,
                    msg=f"{kind}, jumps={jumps}",
                )

    def test_monte_carlo(self):
        for kind in ("over_ustar", "under_ustar", "over_dstar"):
            model = model_for(kind)
            run = sample_exponential_horizons(
                model, q=1.0, beta=2.0, n=2000, seed=21, delta=0.005
            )
            estimate = run.tail(kind, 1.0)
            exact = tail_exp_horizons(model, kind, 1.0, 2.0, 1.0)
            self.assertLess(abs(estimate.mean - exact), 4 * estimate.std_error, kind)

    def test_invalid(self):
        with self.assertRaises(UnsupportedModel):
            tail_exp_horizons(UP, "over_ustar", 1.0, 0.5, 1.0)
        with self.assertRaises(UnsupportedModel):
            tail_exp_horizons(DOWN, "under_dstar", 1.0, 0.5, 1.0)
        with self.assertRaises(UnsupportedModel):
            tail_exp_horizons(
                kou(-1.0, 1.0, rate_up=1.0, rate_down=1.0), "over_ustar", 1.0, 0.5, 1.0
            )
        with self.assertRaisesRegex(ValueError, "Unknown kind"):
            tail_exp_horizons(DOWN, "ustar", 1.0, 0.5, 1.0)
        with self.assertRaises(DomainError):
            tail_exp_horizons(DOWN, "over_ustar", 0.0, 0.5, 1.0)
        with self.assertRaises(DomainError):
            tail_exp_horizons(DOWN, "over_ustar", 1.0, 0.5, -1.0)
        with self.assertRaisesRegex(ValueError, "convention"):
            tail_exp_horizons(DOWN, "over_ustar", 1.0, 0.5, 1.0, convention="x")


class TestFixedHorizon(unittest.TestCase):
    def test_underline_ustar_fixed_t(self):
        at_zero = underline_ustar_fixed_t(DOWN, 1.0, 0.0)
        self.assertAlmostEqual(
            underline_ustar_fixed_t(DOWN, 1.0, 1.0), at_zero * math.exp(-1.0)
        )
        self.assertAlmostEqual(
            underline_ustar_fixed_t(DOWN, 0.0, 2.0), math.exp(-2.0), places=12
        )
        with self.assertRaises(UnsupportedModel):
            underline_ustar_fixed_t(UP, 1.0, 1.0)

    def test_expected_running_max_routes(self):
        reflection = expected_running_max(DOWN, 1.0)
        transform = expected_running_max(DOWN, 1.0, method="transform")
        self.assertAlmostEqual(reflection, transform, places=5)
        mc = expected_running_max(DOWN, 1.0, method="mc", n=2000, seed=8)
        self.assertLess(abs(mc - reflection), 0.05)
        with self.assertRaises(UnsupportedModel):
            expected_running_max(DOWN_JUMPS, 1.0, method="reflection")

    def test_monte_carlo_underline_ustar(self):
        exact = underline_ustar_fixed_t(DOWN, 1.0, 1.0)
        estimate = mc_tail(
            DOWN, "under_ustar", 1.0, np.inf, 1.0, n=2000, seed=5, delta=0.01
        )
        self.assertLess(abs(estimate.mean - exact), 4 * estimate.std_error)

    def test_infinite_lookahead_inversion(self):
        self.assertAlmostEqual(
            invert_to_fixed(DOWN, "under_ustar", 1.0, np.inf, 1.0),
            underline_ustar_fixed_t(DOWN, 1.0, 1.0),
            places=4,
        )

    def test_double_inversion_monte_carlo(self):
        for kind, x in (("over_ustar", 1.0), ("under_ustar", 0.5)):
            exact = invert_to_fixed(DOWN, kind, 1.0, 1.0, x)
            estimate = mc_tail(DOWN, kind, 1.0, 1.0, x, n=2000, seed=13, delta=0.005)
            self.assertLess(abs(estimate.mean - exact), 4 * estimate.std_error, kind)

    def test_non_rational_model(self):
        model = LevyModel(
            drift=1.0, sigma=0.5, jumps_down=TemperedParetoJumps(rate=0.5, alpha=1.0)
        )
        value = invert_to_fixed(model, "over_dstar", 1.0, np.inf, 0.5)
        self.assertTrue(0.0 <= value <= 1.0)
        with self.assertRaises(UnsupportedModel):
            invert_to_fixed(model, "over_dstar", 1.0, 0.5, 0.5)

    def test_grid(self):
        df = invert_to_fixed_grid(DOWN, "under_ustar", 1.0, np.inf, [2.0, 0.0, 1.0])
        self.assertListEqual(list(df.columns), ["x", "raw", "isotonic"])
        ordered = df.sort_values("x")["isotonic"].to_numpy()
        self.assertTrue(np.all(np.diff(ordered) <= 0))

    def test_invalid(self):
        with self.assertRaises(DomainError):
            invert_to_fixed(DOWN, "under_ustar", 0.0, 1.0, 1.0)
        with self.assertRaises(DomainError):
            invert_to_fixed(DOWN, "under_ustar", 1.0, -1.0, 1.0)


class TestDoubleLaplace(unittest.TestCase):
    def test_plug_in(self):
        self.assertAlmostEqual(double_laplace(DOWN, 1.0, 1.0, "U"), 0.75, places=10)
        self.assertLess(double_laplace(DOWN, 1.0, 1e6, "U"), 1e-6)

    def test_small_r_limit(self):
        self.assertAlmostEqual(double_laplace(DOWN, 1e-9, 2.0, "U"), 0.5, places=6)
        self.assertAlmostEqual(double_laplace(UP, 1e-8, 1.0, "D"), 1.0, places=6)

    def test_extended_precision(self):
        with mp.workdps(30):
            value = double_laplace(DOWN, mp.mpf(1), mp.mpf(1), "U")
            self.assertIsInstance(value, mp.mpf)
            self.assertLess(abs(value - mp.mpf(3) / 4), mp.mpf(10) ** -25)

    def test_inversion_matches_fixed_t_law(self):
        self.assertLess(
            abs(
                invert_double_laplace_u(DOWN, 1.0, 1.0)
                - (1.0 - underline_ustar_fixed_t(DOWN, 1.0, 1.0))
            ),
            2e-3,
        )

    def test_pole(self):
        with self.assertRaises(PoleProximity):
            double_laplace(UP, 1.0, 1.0, "D")

    def test_invalid(self):
        with self.assertRaises(UnsupportedModel):
            double_laplace(UP, 1.0, 1.0, "U")
        with self.assertRaises(UnsupportedModel):
            double_laplace(DOWN, 1.0, 1.0, "D")
        with self.assertRaises(DomainError):
            double_laplace(DOWN, 0.0, 1.0, "U")
        with self.assertRaises(ValueError):
            double_laplace(DOWN, 1.0, 1.0, "V")


class TestRequests(unittest.TestCase):
    def test_exact_tail(self):
        req = ExactTailRequest(DOWN, "under_ustar", ExponentialHorizons(1.0), 1.0)
        self.assertAlmostEqual(exact_tail(req), 0.5 * math.exp(-1.0), places=10)
        fixed = ExactTailRequest(DOWN, "under_ustar", FixedHorizons(1.0), 1.0)
        self.assertAlmostEqual(
            exact_tail(fixed), underline_ustar_fixed_t(DOWN, 1.0, 1.0), places=4
        )

    def test_exact_table(self):
        table = exact_table(DOWN, "over_ustar", ExponentialHorizons(1.0, 2.0), [0, 1])
        self.assertListEqual(list(table.columns), ["x", "tail"])
        self.assertAlmostEqual(table["tail"].iloc[0], 1.0)


if __name__ == "__main__":
    unittest.main()
