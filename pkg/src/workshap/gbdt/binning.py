"""Feature discretisation for histogram-based split finding."""

import numpy as np

from ..errors import TrainingError
from .tree import MAX_CATEGORIES


class BinMapper:
    """Maps raw feature values to ``uint8`` bin codes.

    Numeric features with at most ``max_bins`` distinct training values get
    one bin per value. Otherwise bin upper bounds are weighted quantiles of
    the training column, so duplicating a row and doubling its weight give
    the same bins. Categorical features use their codes as bins.
    """

    def __init__(self, schema, max_bins=255):
        self.schema = schema
        self.max_bins = max_bins
        self.upper_bounds = None

    def fit(self, X, weights):
        bounds = []
        for j, spec in enumerate(self.schema):
            if spec.is_categorical:
                if spec.n_categories > MAX_CATEGORIES:
                    raise TrainingError(f"{spec.name}: more than {MAX_CATEGORIES} categories")
                bounds.append(None)
                continue
            values, inverse = np.unique(X[:, j], return_inverse=True)
            if len(values) <= self.max_bins:
                bounds.append(values)
                continue
            cum = np.cumsum(np.bincount(inverse, weights=weights))
            targets = cum[-1] * np.arange(1, self.max_bins) / self.max_bins
            pos = np.searchsorted(cum, targets, side="left")
            bounds.append(np.unique(np.append(values[pos], values[-1])))
        self.upper_bounds = bounds
        return self

    @property
    def n_bins(self):
        return np.array(
            [spec.n_categories if ub is None else len(ub) for spec, ub in zip(self.schema, self.upper_bounds)],
            dtype=np.int64,
        )

    def transform(self, X):
        out = np.empty(X.shape, dtype=np.uint8)
        for j, ub in enumerate(self.upper_bounds):
            if ub is None:
                out[:, j] = X[:, j].astype(np.int64)
            else:
                out[:, j] = np.minimum(np.searchsorted(ub, X[:, j], side="left"), len(ub) - 1)
        return np.ascontiguousarray(out)

    def threshold(self, feature, bin_index):
        """Raw threshold equivalent to ``bin <= bin_index``."""
        return float(self.upper_bounds[feature][bin_index])
