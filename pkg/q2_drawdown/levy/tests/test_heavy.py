# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from q2_drawdown.levy.errors import ConditionViolated, UnsupportedModel, Underflow
from q2_drawdown.levy.heavy import (
    TailMeasure,
    class_diagnostic,
    heavy_constants,
    heavy_table,
    heavy_tail_approx,
    mu_atom,
    mu_distribution,
    mu_total_mass,
    mu_transform,
    tempered_two_m0,
    vigon_ladder_tail,
)
from q2_drawdown.levy.models import LevyModel, TemperedParetoJumps, kou


def heavy_model(alpha: float = 1.0, sigma: float = 0.5) -> LevyModel:
    return LevyModel(
        drift=-3.0,
        sigma=sigma,
        jumps_up=TemperedParetoJumps(rate=0.5, alpha=alpha),
    )


class TestClassDiagnostic(unittest.TestCase):
    def test_exponential_shift_is_exact(self):
        report = class_diagnostic(TailMeasure.exponential(1.0), [0.5, 1.0], 40.0)
        shift = report.table[report.table["check"] == "shift"]
        np.testing.assert_allclose(shift["ratio"], shift["target"], rtol=1e-12)
        # G*G / G grows linearly, so no convolution limit exists
        self.assertFalse(report.stable)

    def test_pareto_is_subexponential(self):
        report = class_diagnostic(
            TailMeasure.pareto(1.5), [1.0, 2.0], 1000.0, two_m0=2.0
        )
        self.assertTrue(report.stable)
        self.assertListEqual(
            list(report.table.columns),
            ["u", "check", "y", "ratio", "target", "distance"],
        )

    def test_tempered_convolution_ratio_approaches_limit(self):
        two_m0 = tempered_two_m0(1.0)
        report = class_diagnostic(
            TailMeasure.tempered_pareto(1.0), [0.5], 400.0, two_m0=two_m0
        )
        conv = report.table[report.table["check"] == "convolution"]
        self.assertEqual(report.two_m0, two_m0)
        self.assertLess(conv["distance"].iloc[-1], conv["distance"].iloc[0])

    def test_underflow(self):
        with self.assertRaises(Underflow):
            class_diagnostic(TailMeasure.exponential(1.0), [1.0], 800.0)


class TestLadderTail(unittest.TestCase):
    def test_exponential_shortcut_is_exact(self):
        model = kou(-1.0, 0.5, rate_up=1.0, mean_up=0.5)
        self.assertAlmostEqual(
            vigon_ladder_tail(model, 2.0),
            vigon_ladder_tail(model, 2.0, method="shortcut"),
            places=10,
        )

    def test_shortcut_ratio(self):
        model = heavy_model()
        exact = vigon_ladder_tail(model, 50.0)
        shortcut = vigon_ladder_tail(model, 50.0, method="shortcut")
        self.assertLess(abs(shortcut / exact - 1.0), 0.1)

    def test_monotone(self):
        values = [vigon_ladder_tail(heavy_model(), u) for u in (0.0, 1.0, 5.0, 20.0)]
        self.assertTrue(np.all(np.diff(values) < 0))

    def test_invalid(self):
        with self.assertRaises(UnsupportedModel):
            vigon_ladder_tail(kou(1.0, 1.0, rate_down=1.0), 1.0)
        with self.assertRaisesRegex(ValueError, "Unknown method"):
            vigon_ladder_tail(heavy_model(), 1.0, method="exact")


class TestMu(unittest.TestCase):
    def test_conditions(self):
        with self.assertRaises(ConditionViolated) as cm:
            mu_transform(kou(-1.0, 0.5, rate_up=1.0, mean_up=0.5), 2.0, 1.0)
        self.assertEqual(cm.exception.condition, "convolution_equivalence")

        with self.assertRaises(ConditionViolated) as cm:
            mu_transform(heavy_model(), 1.5, 1.0)
        self.assertEqual(cm.exception.condition, "convolution_equivalence")

        positive = LevyModel(
            drift=-1.0, sigma=0.5, jumps_up=TemperedParetoJumps(rate=0.5, alpha=1.0)
        )
        with self.assertRaises(ConditionViolated) as cm:
            mu_transform(positive, 1.0, 1.0)
        self.assertEqual(cm.exception.condition, "negative_exponent_at_alpha")

    @settings(max_examples=20, deadline=None)
    @given(
        st.floats(min_value=0.5, max_value=2.0),
        st.floats(min_value=0.01, max_value=50.0),
    )
    def test_forms_agree(self, alpha, q):
        model = heavy_model(alpha)
        closed = mu_transform(model, alpha, q)
        ladder = mu_transform(model, alpha, q, form="ladder")
        self.assertLess(abs(closed - ladder), 1e-12 * max(1.0, abs(closed)))

    def test_total_mass_is_small_q_limit(self):
        model = heavy_model()
        q = 1e-7
        np.testing.assert_allclose(
            q * mu_transform(model, 1.0, q), mu_total_mass(model, 1.0), rtol=1e-4
        )

    def test_atom(self):
        self.assertAlmostEqual(mu_atom(heavy_model(), 1.0), 0.0, places=3)
        # Without a Gaussian part Phi_hat(q) ~ q / 3, which leaves an atom
        model = heavy_model(sigma=0.0)
        k = -float(np.real(model.jumps_up.laplace(1.0))) + 3.0
        self.assertAlmostEqual(mu_atom(model, 1.0), 3.0 / (3.0 + k) ** 2, places=5)

    def test_distribution(self):
        df = mu_distribution(heavy_model(), 1.0, [0.0, 0.5, 1.0, 2.0])
        self.assertListEqual(list(df.columns), ["s", "raw", "monotone"])
        self.assertTrue(np.all(np.diff(df["monotone"]) >= 0))
        self.assertIn("atom", df.attrs)

    def test_unknown_form(self):
        with self.assertRaises(ValueError):
            mu_transform(heavy_model(), 1.0, 1.0, form="series")


class TestHeavyConstants(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.model = heavy_model()
        cls.corrected = heavy_constants(cls.model, 1.0, 1.0, grid_points=10)

    def test_corrected_convention(self):
        c = self.corrected
        self.assertEqual(c.convention, "corrected")
        self.assertGreater(c.const_minus, 0.0)
        self.assertLessEqual(c.const_minus, c.total_mass)
        self.assertGreater(c.const_plus, c.const_minus)

    def test_printed_convention(self):
        c = heavy_constants(self.model, 1.0, 1.0, convention="printed", grid_points=10)
        self.assertGreaterEqual(c.const_minus, 1.0)

    def test_zero_horizon(self):
        c = heavy_constants(self.model, 1.0, 0.0, convention="printed", grid_points=4)
        self.assertEqual(c.const_minus, 1.0)
        self.assertAlmostEqual(c.const_plus, 1.0 + c.atom, places=10)

    def test_monte_carlo_matches_transform(self):
        c = heavy_constants(
            self.model, 1.0, 1.0, method="mc", n=300, seed=1, grid_points=4
        )
        self.assertLess(abs(c.const_minus / self.corrected.const_minus - 1.0), 0.2)

    def test_invalid(self):
        with self.assertRaisesRegex(ValueError, "convention"):
            heavy_constants(self.model, 1.0, 1.0, convention="other")
        with self.assertRaisesRegex(ValueError, "method"):
            heavy_constants(self.model, 1.0, 1.0, method="quadrature")

    def test_tail_approx(self):
        xs = [5.0, 10.0, 20.0]
        over = [
            heavy_tail_approx(
                self.model, "over_ustar", 1.0, x, constants=self.corrected
            )
            for x in xs
        ]
        under = [
            heavy_tail_approx(
                self.model, "under_ustar", 1.0, x, constants=self.corrected
            )
            for x in xs
        ]
        ratios = np.array(over) / np.array(under)
        np.testing.assert_allclose(
            ratios, self.corrected.const_plus / self.corrected.const_minus
        )
        self.assertTrue(np.all(np.diff(over) < 0))
        self.assertTrue(all(0.0 < p < 1.0 for p in over + under))
        with self.assertRaises(ValueError):
            heavy_tail_approx(self.model, "drawup", 1.0, 1.0, constants=self.corrected)

    def test_table(self):
        table = heavy_table(self.model, 1.0, 0.5, [5.0, 10.0], grid_points=4)
        self.assertListEqual(
            list(table.columns),
            ["x", "pi_H", "const_plus", "const_minus", "approx_over", "approx_under"],
        )
        np.testing.assert_allclose(
            table["approx_over"], table["const_plus"] * table["pi_H"]
        )


if __name__ == "__main__":
    unittest.main()
