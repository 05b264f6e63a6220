"""Histogram gradient-boosted decision trees for weighted binary labels."""

from .boosting import fit, leaf_value, split_gain, train, weighted_log_loss
from .evaluation import (
    GridSearchResult,
    Metrics,
    binary_metrics,
    evaluate,
    f1_from_counts,
    grid_search,
)
from .params import Hyperparams, default_grid
from .tree import Tree, TreeEnsemble, predict_margin, predict_proba

__all__ = [
    "GridSearchResult",
    "Hyperparams",
    "Metrics",
    "Tree",
    "TreeEnsemble",
    "binary_metrics",
    "default_grid",
    "evaluate",
    "f1_from_counts",
    "fit",
    "grid_search",
    "leaf_value",
    "predict_margin",
    "predict_proba",
    "split_gain",
    "train",
    "weighted_log_loss",
]
