"""Transform-block forecasting networks (C++ core)."""

from ._core import (
    DimensionError,
    IoError,
    Model,
    NumericError,
    ValidationError,
    archs,
    code_version,
    evaluate,
    gradcheck,
    irfft,
    load_model,
    rfft,
    score,
    svd,
    train,
    verify,
)

__all__ = [
    "DimensionError",
    "IoError",
    "Model",
    "NumericError",
    "ValidationError",
    "archs",
    "code_version",
    "evaluate",
    "gradcheck",
    "irfft",
    "load_model",
    "rfft",
    "score",
    "svd",
    "train",
    "verify",
]
