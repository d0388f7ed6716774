# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import json

import pandas as pd
import qiime2

from q2_drawdown.harness.report import FLOAT_FORMAT
from q2_drawdown.levy.models import LevyModel

from ..plugin_setup import plugin
from ._format import DrawdownReportFormat, LevyModelFormat


def _read_model_spec(data: LevyModelFormat) -> dict:
    with data.open() as fh:
        return json.load(fh)


@plugin.register_transformer
def _1(data: LevyModelFormat) -> LevyModel:
    return LevyModel.from_dict(_read_model_spec(data))


@plugin.register_transformer
def _2(data: LevyModel) -> LevyModelFormat:
    ff = LevyModelFormat()
    with ff.open() as fh:
        json.dump(data.to_dict(), fh, indent=2)
    return ff


@plugin.register_transformer
def _3(data: LevyModelFormat) -> dict:
    return _read_model_spec(data)


@plugin.register_transformer
def _4(data: DrawdownReportFormat) -> pd.DataFrame:
    return pd.read_csv(str(data))


@plugin.register_transformer
def _5(data: pd.DataFrame) -> DrawdownReportFormat:
    ff = DrawdownReportFormat()
    with ff.open() as fh:
        data.to_csv(fh, index=False, float_format=FLOAT_FORMAT)
    return ff


@plugin.register_transformer
def _6(data: DrawdownReportFormat) -> qiime2.Metadata:
    df = pd.read_csv(str(data))
    df.index = pd.Index([str(i) for i in range(len(df))], name="id")
    for column in df.columns:
        if not pd.api.types.is_numeric_dtype(df[column]) or df[column].dtype == bool:
            df[column] = df[column].astype(str)
    return qiime2.Metadata(df)
