# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

REPORT_COLUMNS = [
    "x",
    "analytic",
    "asymptotic",
    "mc_mean",
    "mc_se",
    "ci_lo",
    "ci_hi",
    "pass",
]
FLOAT_FORMAT = "%.17g"
FORMATS = ("csv", "json")


@dataclass
class ReportRow:
    x: float
    analytic: float = math.nan
    asymptotic: float = math.nan
    mc_mean: float = math.nan
    mc_se: float = math.nan
    ci_lo: float = math.nan
    ci_hi: float = math.nan
    # None when no reference or no Monte Carlo estimate exists for the row
    passed: Optional[bool] = None
    error: Optional[str] = None

    def to_record(self) -> dict:
        record = {name: getattr(self, name) for name in REPORT_COLUMNS[:-1]}
        record["pass"] = self.passed
        return record


@dataclass
class VerificationReport:
    rows: List[ReportRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def errors(self) -> List[ReportRow]:
        return [row for row in self.rows if row.error is not None]

    @property
    def failures(self) -> List[ReportRow]:
        return [row for row in self.rows if row.error is None and row.passed is False]

    @property
    def exit_code(self) -> int:
        if self.errors:
            return 2
        return 1 if self.failures else 0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [row.to_record() for row in self.rows], columns=REPORT_COLUMNS
        )

    def to_dict(self) -> dict:
        rows = []
        for row in self.rows:
            record = row.to_record()
            record["error"] = row.error
            rows.append(record)
        return make_json_safe({"metadata": self.metadata, "rows": rows})

    @classmethod
    def from_dict(cls, payload: dict) -> "VerificationReport":
        rows = []
        for record in payload["rows"]:
            values = {
                name: math.nan if record.get(name) is None else float(record[name])
                for name in REPORT_COLUMNS[:-1]
            }
            row = ReportRow(**values, error=record.get("error"))
            row.passed = record.get("pass")
            rows.append(row)
        return cls(rows=rows, metadata=payload.get("metadata", {}))


def make_json_safe(obj):
    """
    Converts dataclasses, numpy values and non-finite floats into plain JSON.

    NaN becomes null and infinities become the strings "inf" and "-inf",
    which the config reader accepts back.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = dataclasses.asdict(obj)
    if isinstance(obj, dict):
        return {str(k): make_json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [make_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [make_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def emit(report: VerificationReport, fmt: str, path: str) -> str:
    """
    Writes the report as CSV (fixed header, 17 significant digits) or JSON
    (rows plus the metadata block).
    """
    if fmt not in FORMATS:
        raise ValueError(f"Report format must be one of: {', '.join(FORMATS)}.")
    try:
        if fmt == "csv":
            report.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
        else:
            with open(path, "w") as fh:
                json.dump(report.to_dict(), fh, indent=2)
                fh.write("\n")
    except OSError as e:
        raise IOError(f"Cannot write the {fmt} report to '{path}': {e}") from e
    return path


def read_json_report(path: str) -> VerificationReport:
    with open(path, "r") as fh:
        return VerificationReport.from_dict(json.load(fh))
