"""Compound-scaled convolutional classifier with snapshot ensembles."""

from ._core import (
    arch_table,
    class_weights,
    cosine_lr,
    ensemble_labels,
    evaluate,
    explain,
    gen_toy,
    predict,
    train,
)

__all__ = [
    "arch_table",
    "class_weights",
    "cosine_lr",
    "ensemble_labels",
    "evaluate",
    "explain",
    "gen_toy",
    "predict",
    "train",
]
