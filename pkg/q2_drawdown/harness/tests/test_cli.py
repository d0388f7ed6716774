# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import json
import os
import shutil
import tempfile
import unittest
from importlib.resources import files

import pandas as pd
from click.testing import CliRunner

from q2_drawdown.harness.cli import cli
from q2_drawdown.harness.report import REPORT_COLUMNS, read_json_report


def get_data_path(filename: str) -> str:
    return str(files("q2_drawdown.harness.tests") / "data" / filename)


def simulated_config(tolerance: dict) -> dict:
    return {
        "model": {"drift": -0.5, "sigma": 1.0},
        "functional": {"kind": "over_ustar"},
        "horizon": {"type": "exponential", "q": 1.0, "beta": 2.0},
        "grid": {"x": "0.5:1.0:2"},
        "monte_carlo": {"n": 200, "seed": 21, "delta": 0.01},
        "tolerance": tolerance,
        "output": {"csv": "report.csv"},
    }


class TestCli(unittest.TestCase):
    def setUp(self):
        self.runner = CliRunner()
        self.temp_dir = tempfile.TemporaryDirectory(prefix="q2-drawdown-test-temp-")

    def tearDown(self):
        self.temp_dir.cleanup()

    def write_config(self, doc: dict) -> str:
        path = os.path.join(self.temp_dir.name, "experiment.json")
        with open(path, "w") as fh:
            json.dump(doc, fh)
        return path

    def test_version(self):
        result = self.runner.invoke(cli, ["--version"])
        self.assertEqual(result.exit_code, 0)
        self.assertIn("q2-drawdown", result.output)

    def test_scale_fn_to_stdout(self):
        result = self.runner.invoke(
            cli,
            [
                "scale-fn",
                "--model",
                get_data_path("model_brownian.json"),
                "--q",
                "1",
                "--x-grid",
                "0,1",
            ],
        )
        self.assertEqual(result.exit_code, 0, result.output)
        lines = result.output.splitlines()
        self.assertEqual(lines[0], "x,Wq,Zq,Wq_prime")
        self.assertEqual(len(lines), 3)

    def test_exact_to_file(self):
        out = os.path.join(self.temp_dir.name, "exact.csv")
        result = self.runner.invoke(
            cli,
            [
                "exact",
                "--model",
                get_data_path("model_brownian.json"),
                "--kind",
                "over_dstar",
                "--q",
                "1",
                "--inf",
                "--x-grid",
                "0:1:3",
                "--out",
                out,
            ],
        )
        self.assertEqual(result.exit_code, 0, result.output)
        table = pd.read_csv(out)
        self.assertListEqual(list(table.columns), ["x", "tail"])
        self.assertEqual(len(table), 3)

    def test_exact_needs_one_horizon(self):
        result = self.runner.invoke(
            cli,
            [
                "exact",
                "--model",
                get_data_path("model_brownian.json"),
                "--kind",
                "over_dstar",
                "--q",
                "1",
                "--t",
                "1",
                "--x-grid",
                "1",
            ],
        )
        self.assertEqual(result.exit_code, 2)
        self.assertIn("Error: Give either the rate q or the horizon t", result.output)

    def test_asymptotics_conflicting_lookahead(self):
        result = self.runner.invoke(
            cli,
            [
                "asymptotics",
                "--model",
                get_data_path("model_brownian.json"),
                "--kind",
                "ustar",
                "--t",
                "1",
                "--s",
                "1",
                "--inf",
                "--x-grid",
                "1",
            ],
        )
        self.assertEqual(result.exit_code, 2)

    def test_missing_model_file(self):
        result = self.runner.invoke(
            cli, ["scale-fn", "--model", "missing.toml", "--q", "1", "--x-grid", "1"]
        )
        self.assertEqual(result.exit_code, 2)

    def test_simulate_writes_estimate(self):
        out = os.path.join(self.temp_dir.name, "estimate.json")
        samples = os.path.join(self.temp_dir.name, "samples.csv")
        result = self.runner.invoke(
            cli,
            [
                "simulate",
                "--model",
                get_data_path("model_kou.toml"),
                "--kind",
                "ustar",
                "--t",
                "0.5",
                "--s",
                "0.5",
                "--x",
                "0.5",
                "--n",
                "200",
                "--seed",
                "3",
                "--delta",
                "0.05",
                "--out",
                out,
                "--samples",
                samples,
            ],
        )
        self.assertEqual(result.exit_code, 0, result.output)
        with open(out) as fh:
            estimate = json.load(fh)
        self.assertEqual(estimate["n"], 200)
        self.assertEqual(estimate["seed"], 3)
        self.assertEqual(estimate["stream_policy"], "philox-block")
        self.assertTrue(0.0 <= estimate["mean"] <= 1.0)
        self.assertEqual(len(pd.read_csv(samples)), 200)

    def test_bss_report(self):
        out = os.path.join(self.temp_dir.name, "bss.csv")
        report = os.path.join(self.temp_dir.name, "bss.json")
        result = self.runner.invoke(
            cli,
            [
                "bss",
                "--mu",
                "1",
                "--sigma",
                "1",
                "--p0",
                "100",
                "--t",
                "1",
                "--q",
                "1",
                "--x-grid",
                "0.5,1",
                "--out",
                out,
                "--report",
                report,
            ],
        )
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(pd.read_csv(out).shape, (2, 13))
        with open(report) as fh:
            comparison = json.load(fh)
        self.assertEqual(len(comparison["rows"]), 9)
        self.assertIn("E[exp(-gamma U_t)]", comparison["itemised"])

    def test_verify_passes(self):
        config = os.path.join(self.temp_dir.name, "bm_supremum.json")
        shutil.copy(get_data_path("bm_supremum.json"), config)
        result = self.runner.invoke(cli, ["verify", config, "--no-progress"])
        self.assertEqual(result.exit_code, 0, result.output)
        table = pd.read_csv(os.path.join(self.temp_dir.name, "report.csv"))
        self.assertListEqual(list(table.columns), REPORT_COLUMNS)
        report = read_json_report(os.path.join(self.temp_dir.name, "report.json"))
        self.assertEqual(len(report.rows), 3)
        self.assertEqual(report.metadata["kind"], "ustar")

    def test_verify_tolerance_failure(self):
        config = self.write_config(simulated_config({"n_se": 0.0}))
        result = self.runner.invoke(cli, ["verify", config, "--no-progress"])
        self.assertEqual(result.exit_code, 1, result.output)
        table = pd.read_csv(os.path.join(self.temp_dir.name, "report.csv"))
        self.assertFalse(table["pass"].any())

    def test_verify_loose_tolerance(self):
        config = self.write_config(simulated_config({"abs": 1.0}))
        result = self.runner.invoke(cli, ["verify", config, "--no-progress"])
        self.assertEqual(result.exit_code, 0, result.output)

    def test_verify_config_error(self):
        doc = simulated_config({})
        doc["functional"]["kind"] = "bogus"
        result = self.runner.invoke(cli, ["verify", self.write_config(doc)])
        self.assertEqual(result.exit_code, 2)
        self.assertIn("Error: functional.kind", result.output)


if __name__ == "__main__":
    unittest.main()
