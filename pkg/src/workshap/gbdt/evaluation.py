"""Classification metrics and cross-validated hyperparameter search."""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..dataset import SplitSpec, class_balance, kfold_indices
from ..errors import TrainingError
from .boosting import train

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    f1: float
    class_balance: float

    def to_dict(self):
        return {"accuracy": self.accuracy, "f1": self.f1, "class_balance": self.class_balance}


def confusion(y_true, y_pred):
    y_true = np.asarray(y_true).astype(bool)
    y_pred = np.asarray(y_pred).astype(bool)
    tp = int((y_true & y_pred).sum())
    fp = int((~y_true & y_pred).sum())
    fn = int((y_true & ~y_pred).sum())
    tn = int((~y_true & ~y_pred).sum())
    return tp, fp, fn, tn


def f1_from_counts(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def binary_metrics(y_true, y_pred):
    """Unweighted (accuracy, F1) of hard predictions."""
    tp, fp, fn, tn = confusion(y_true, y_pred)
    return (tp + tn) / (tp + fp + fn + tn), f1_from_counts(tp, fp, fn)


def evaluate(model, ds, experiment, threshold=0.5):
    """Accuracy and F1 with positives predicted where P(y=1) > threshold."""
    y = ds.labels(experiment)
    y_hat = model.predict_proba(ds.X) > threshold
    acc, f1 = binary_metrics(y, y_hat)
    return Metrics(float(acc), float(f1), class_balance(ds, experiment))


class CVRow(NamedTuple):
    hyperparams: object
    mean_f1: float  # None when training failed on some fold
    error: str = None


class GridSearchResult(NamedTuple):
    best: object
    cv_table: list
    model: object


def grid_search(train_ds, experiment, grid, spec=SplitSpec(), refit=True):
    """Pick the grid point with the highest mean validation F1.

    All points share one stratified fold assignment. Ties go to the
    earlier grid point. A point whose training fails is recorded with its
    error and skipped. With ``refit`` the winner is retrained on all of
    ``train_ds``.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid is empty")
    fold = kfold_indices(train_ds, experiment, spec)
    y = train_ds.labels(experiment)
    table = []
    best, best_f1 = None, -np.inf
    for hp in grid:
        scores = []
        try:
            for k in range(spec.folds):
                model = train(train_ds.where(fold != k), experiment, hp, spec.seed)
                valid = fold == k
                pred = model.predict_proba(train_ds.X[valid]) > 0.5
                scores.append(binary_metrics(y[valid], pred)[1])
        except TrainingError as exc:
            log.warning("grid point %s failed: %s", hp, exc)
            table.append(CVRow(hp, None, str(exc)))
            continue
        mean_f1 = float(np.mean(scores))
        table.append(CVRow(hp, mean_f1))
        if mean_f1 > best_f1:
            best, best_f1 = hp, mean_f1
    if best is None:
        raise TrainingError("every grid point failed")
    model = train(train_ds, experiment, best, spec.seed) if refit else None
    return GridSearchResult(best, table, model)
