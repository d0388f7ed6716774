# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from setuptools import find_packages, setup

setup(
    name="q2-drawdown",
    version="2024.2.0",
    license="BSD-3-Clause",
    packages=find_packages(),
    author="Vinzent Risch",
    author_email="risch.vinzent@gmail.com",
    description="This is a QIIME 2 plugin that computes the laws of future "
    "drawdowns and drawups of Levy processes.",
    url="https://github.com/bokulich-lab/q2-drawdown",
    entry_points={
        "qiime2.plugins": ["q2-drawdown=q2_drawdown.plugin_setup:plugin"],
        "console_scripts": ["q2-drawdown=q2_drawdown.harness.cli:cli"],
    },
    python_requires=">=3.9",
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "mpmath",
        "tqdm",
        "click",
        "tomli; python_version < '3.11'",
    ],
    extras_require={"test": ["pytest", "pytest-cov", "hypothesis"]},
    package_data={
        "q2_drawdown": ["citations.bib"],
        "q2_drawdown.types.tests": ["data/*"],
        "q2_drawdown.harness.tests": ["data/*"],
    },
    zip_safe=False,
)
