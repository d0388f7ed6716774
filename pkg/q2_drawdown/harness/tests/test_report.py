# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
import os
import tempfile
import unittest
from dataclasses import dataclass

import numpy as np
from pandas.testing import assert_frame_equal

from q2_drawdown.harness.report import (
    REPORT_COLUMNS,
    ReportRow,
    VerificationReport,
    emit,
    make_json_safe,
    read_json_report,
)


def sample_report() -> VerificationReport:
    rows = [
        ReportRow(
            x=0.5,
            analytic=1 / 3,
            mc_mean=0.3,
            mc_se=0.02,
            ci_lo=0.26,
            ci_hi=0.34,
            passed=True,
        ),
        ReportRow(x=1.0, asymptotic=0.125),
    ]
    return VerificationReport(rows=rows, metadata={"seed": 3, "delta": math.inf})


class TestVerificationReport(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory(prefix="q2-drawdown-test-temp-")

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_exit_codes(self):
        report = sample_report()
        self.assertEqual(report.exit_code, 0)
        report.rows[1].passed = False
        self.assertEqual(report.exit_code, 1)
        self.assertEqual(report.failures, [report.rows[1]])
        report.rows[0].error = "analytic: Laplace inversion lost too much precision."
        report.rows[0].passed = False
        self.assertEqual(report.exit_code, 2)
        self.assertEqual(report.errors, [report.rows[0]])
        self.assertEqual(report.failures, [report.rows[1]])

    def test_empty_report_csv_has_header_only(self):
        path = os.path.join(self.temp_dir.name, "report.csv")
        emit(VerificationReport(), "csv", path)
        with open(path) as fh:
            self.assertEqual(fh.read(), ",".join(REPORT_COLUMNS) + "\n")

    def test_csv_keeps_17_digits(self):
        path = emit(sample_report(), "csv", os.path.join(self.temp_dir.name, "r.csv"))
        with open(path) as fh:
            lines = fh.read().splitlines()
        self.assertEqual(lines[0], ",".join(REPORT_COLUMNS))
        self.assertTrue(lines[1].startswith("0.5,0.33333333333333331,,0.29999999999"))
        self.assertTrue(lines[1].endswith(",True"))
        self.assertEqual(lines[2], "1,,0.125,,,,,")

    def test_json_round_trip(self):
        report = sample_report()
        path = emit(report, "json", os.path.join(self.temp_dir.name, "r.json"))
        obs = read_json_report(path)
        assert_frame_equal(obs.to_frame(), report.to_frame())
        self.assertEqual(obs.metadata, {"seed": 3, "delta": "inf"})

    def test_emit_errors(self):
        with self.assertRaisesRegex(ValueError, "csv, json"):
            emit(sample_report(), "xml", os.path.join(self.temp_dir.name, "r.xml"))
        missing = os.path.join(self.temp_dir.name, "missing", "r.csv")
        with self.assertRaisesRegex(OSError, "Cannot write the csv report"):
            emit(sample_report(), "csv", missing)


class TestMakeJsonSafe(unittest.TestCase):
    def test_values(self):
        @dataclass
        class Point:
            x: float
            y: tuple

        obs = make_json_safe(
            {
                "nan": np.float64("nan"),
                "inf": -math.inf,
                "int": np.int64(3),
                "flag": np.bool_(True),
                "array": np.array([0.5, np.nan]),
                "point": Point(x=1.0, y=(2, math.inf)),
                1: "key",
            }
        )
        exp = {
            "nan": None,
            "inf": "-inf",
            "int": 3,
            "flag": True,
            "array": [0.5, None],
            "point": {"x": 1.0, "y": [2, "inf"]},
            "1": "key",
        }
        self.assertDictEqual(obs, exp)
        self.assertIs(type(obs["int"]), int)


if __name__ == "__main__":
    unittest.main()
