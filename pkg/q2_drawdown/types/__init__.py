# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from ._format import (
    DrawdownReportDirectoryFormat,
    DrawdownReportFormat,
    LevyModelDirectoryFormat,
    LevyModelFormat,
)
from ._type import DrawdownReport, LevyProcess

__all__ = [
    "LevyModelFormat",
    "LevyModelDirectoryFormat",
    "DrawdownReportFormat",
    "DrawdownReportDirectoryFormat",
    "LevyProcess",
    "DrawdownReport",
]
