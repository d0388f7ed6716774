# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import json

import pandas as pd
import qiime2.plugin.model as model
from qiime2.plugin import ValidationError

from q2_drawdown.harness.report import REPORT_COLUMNS
from q2_drawdown.levy.errors import LevyError
from q2_drawdown.levy.models import LevyModel

MODEL_KEYS = ["drift", "sigma", "jumps_up", "jumps_down", "sign_tag"]
JUMP_KEYS = {
    "exponential": ["law", "rate", "mean"],
    "tempered_pareto": ["law", "rate", "alpha"],
}

# One header per table an action produces
REPORT_HEADERS = {
    "scale_functions": ["x", "Wq", "Zq", "Wq_prime"],
    "simulate_tail": [
        "n",
        "mean",
        "std_error",
        "ci_lo",
        "ci_hi",
        "seed",
        "stream_policy",
        "delta",
    ],
    "tail_asymptotics": ["x", "approx_prob", "rate", "prefactor", "regime"],
    "heavy_tail": [
        "x",
        "pi_H",
        "const_plus",
        "const_minus",
        "approx_over",
        "approx_under",
    ],
    "exact_tail": ["x", "tail"],
    "exact_tail_fixed": ["x", "raw", "isotonic"],
    "bss_report": [
        "x",
        "phi_q",
        "Wq",
        "Zq",
        "over_dstar_eq",
        "under_dstar_eq",
        "over_dstar_t",
        "mgf_up",
        "mgf_down",
        "tilted_mgf_up",
        "tilted_mgf_down",
        "price_over",
        "price_under",
    ],
    "verify": REPORT_COLUMNS,
}


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class LevyModelFormat(model.TextFileFormat):
    def _validate(self):
        try:
            with self.open() as fh:
                spec = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"Model file is not valid JSON: {e}") from e
        if not isinstance(spec, dict):
            raise ValidationError("Model file must hold a JSON object.")

        keys_obs = list(spec)
        if not set(keys_obs).issubset(MODEL_KEYS):
            raise ValidationError(
                "Keys do not match LevyModel format. Must consist of "
                "the following values: "
                + ", ".join(MODEL_KEYS)
                + ".\n\nFound instead: "
                + ", ".join(keys_obs)
            )
        for key in ("drift", "sigma"):
            if key in spec and not _is_number(spec[key]):
                raise ValidationError(f"'{key}' must be a number, found {spec[key]!r}.")

        for side in ("jumps_up", "jumps_down"):
            jumps = spec.get(side)
            if jumps is None:
                continue
            law = jumps.get("law", "exponential") if isinstance(jumps, dict) else None
            if law not in JUMP_KEYS:
                raise ValidationError(
                    f"'{side}' must be a table with a law out of "
                    f"{', '.join(JUMP_KEYS)}, found {jumps!r}."
                )
            keys_exp = JUMP_KEYS[law]
            if sorted(set(jumps) | {"law"}) != sorted(keys_exp):
                raise ValidationError(
                    f"Keys of '{side}' do not match the {law} law. Must consist of "
                    "the following values: "
                    + ", ".join(keys_exp)
                    + ".\n\nFound instead: "
                    + ", ".join(jumps)
                )
            if not all(_is_number(jumps[key]) for key in keys_exp[1:]):
                raise ValidationError(f"Parameters of '{side}' must be numbers.")

        try:
            LevyModel.from_dict(spec)
        except LevyError as e:
            raise ValidationError(e.message) from e

    def _validate_(self, level):
        self._validate()


class DrawdownReportFormat(model.TextFileFormat):
    def _validate(self, n_records=None):
        df = pd.read_csv(str(self), nrows=n_records)
        header_obs = list(df.columns)
        if header_obs not in REPORT_HEADERS.values():
            raise ValidationError(
                "Header line does not match DrawdownReport format. Must be one "
                "of the following: "
                + "; ".join(", ".join(header) for header in REPORT_HEADERS.values())
                + ".\n\nFound instead: "
                + ", ".join(header_obs)
            )

    def _validate_(self, level):
        record_count_map = {"min": 10, "max": None}
        self._validate(record_count_map[level])


LevyModelDirectoryFormat = model.SingleFileDirectoryFormat(
    "LevyModelDirectoryFormat", "model.json", LevyModelFormat
)
DrawdownReportDirectoryFormat = model.SingleFileDirectoryFormat(
    "DrawdownReportDirectoryFormat", "report.csv", DrawdownReportFormat
)
