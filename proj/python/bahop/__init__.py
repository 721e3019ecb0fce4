"""PSNR-gated basin hopping over tissue-segmentation hyperparameters."""

import json as _json

from ._bahop import (
    Cohort,
    ConfigError,
    Evaluator,
    InvalidInput,
    InvalidParameter,
    IoError,
    NumericalError,
    ParamSpace,
    PreprocParams,
    __version__,
    compare,
    default_start,
    generate,
    landscape,
    optimize,
    output_root,
    patches,
    psnr,
    segment,
    segment_thumbnail,
    verify,
    verify_ledger,
)
from ._bahop import run_optimize as _run_optimize


def run_optimize(config, root=None):
    """Run an optimisation from a config dict (or JSON text) into a run directory."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _run_optimize(text, output_root(root))


__all__ = [
    "Cohort",
    "ConfigError",
    "Evaluator",
    "InvalidInput",
    "InvalidParameter",
    "IoError",
    "NumericalError",
    "ParamSpace",
    "PreprocParams",
    "compare",
    "default_start",
    "generate",
    "landscape",
    "optimize",
    "output_root",
    "patches",
    "psnr",
    "run_optimize",
    "segment",
    "segment_thumbnail",
    "verify",
    "verify_ledger",
]
