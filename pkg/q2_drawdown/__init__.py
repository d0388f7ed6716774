# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("q2-drawdown")
except PackageNotFoundError:
    __version__ = "0+unknown"
