"""Python access to the spectrabench core: datasets, metrics and benchmark phases."""

import json

from ._core import (
    Dataset,
    SpectraBenchError,
    __version__,
    cohen_d_paired,
    friedman,
    load_dataset,
    synth_dataset,
    wilson_ci,
)
from . import _core


def evaluate(dataset, model="extra_trees", params=None, balance="original", pca=False, seed=42):
    """Fit both task pipelines on the train split and score the test split."""
    return json.loads(_core._evaluate(dataset, model, json.dumps(params or {}), balance, pca, seed))


def run_phase(phase, config, out, seed=None, models=None, resume=False):
    """Run one benchmark phase, write its report under `out` and return the report."""
    return json.loads(_core._run_phase(phase, str(config), str(out), seed, models, resume))


__all__ = [
    "Dataset",
    "SpectraBenchError",
    "__version__",
    "cohen_d_paired",
    "evaluate",
    "friedman",
    "load_dataset",
    "run_phase",
    "synth_dataset",
    "wilson_ci",
]
