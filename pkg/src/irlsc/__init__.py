"""Incremental regularized least squares classification with class recoding."""

from irlsc.classifier import (
    IncrementalRLSC,
    batch_naive,
    batch_rebalanced,
    batch_recoded,
    decision_scores,
    gamma_matrix,
    predict,
)

__all__ = [
    "IncrementalRLSC",
    "batch_naive",
    "batch_rebalanced",
    "batch_recoded",
    "decision_scores",
    "gamma_matrix",
    "predict",
]

__version__ = "0.1.0"
