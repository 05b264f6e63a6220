"""Weighted survey samples, label construction and sampling primitives.

A :class:`Dataset` stores the feature matrix column-ordered by its
:class:`~workshap.schema.FeatureSchema`, one survey weight per row and a
single occupation code from which the three experiment labels derive:

* ``work``  -- employed at all (occupation is blue or white),
* ``blue``  -- blue-collar type job,
* ``white`` -- white-collar type job.

All sampling operations are pure functions of their inputs and seed.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataValidationError, SampleSizeError, SchemaError, SplitError
from .schema import BINARY, CATEGORICAL

OCCUPATIONS = ("unemployed", "blue", "white")
EXPERIMENTS = ("work", "blue", "white")

UNEMPLOYED, BLUE, WHITE = 0, 1, 2


def check_experiment(experiment):
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    return experiment


def labels_from_occupation(occupation, experiment):
    """Binary label vector for one experiment."""
    check_experiment(experiment)
    occupation = np.asarray(occupation)
    if experiment == "work":
        return (occupation != UNEMPLOYED).astype(np.int8)
    if experiment == "blue":
        return (occupation == BLUE).astype(np.int8)
    return (occupation == WHITE).astype(np.int8)


@dataclass(frozen=True)
class Sample:
    """One respondent, as seen through the schema."""

    sample_id: int
    features: tuple
    weight: float
    work_status: int
    blue_collar: int
    white_collar: int

    @property
    def labels(self):
        return (self.work_status, self.blue_collar, self.white_collar)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.05
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.folds < 1:
            raise ValueError("folds must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


class Dataset:
    """Immutable table of weighted samples conforming to a schema.

    Parameters
    ----------
    schema : FeatureSchema
    X : array-like of shape (n_samples, n_features)
        Feature values; categorical features as integer codes.
    occupation : array-like of shape (n_samples,)
        0 = unemployed, 1 = blue-collar, 2 = white-collar.
    weights : array-like of shape (n_samples,)
        Positive survey sampling weights.
    sample_ids : array-like of shape (n_samples,), optional
        Stable identifiers; defaults to ``0..n-1``.
    provenance : {"ingested", "synthetic"}
    """

    def __init__(self, schema, X, occupation, weights, sample_ids=None, provenance="ingested"):
        X = np.array(X, dtype=np.float64, ndmin=2)
        occupation = np.array(occupation, dtype=np.int8).ravel()
        weights = np.array(weights, dtype=np.float64).ravel()
        n = X.shape[0]
        if sample_ids is None:
            sample_ids = np.arange(n, dtype=np.int64)
        sample_ids = np.array(sample_ids, dtype=np.int64).ravel()
        if n == 0:
            raise DataValidationError("dataset is empty")
        if X.shape[1] != len(schema):
            raise SchemaError(f"expected {len(schema)} feature columns, got {X.shape[1]}")
        if not (len(occupation) == len(weights) == len(sample_ids) == n):
            raise DataValidationError("column lengths disagree")
        if provenance not in ("ingested", "synthetic"):
            raise ValueError(f"bad provenance {provenance!r}")
        _validate(schema, X, occupation, weights)
        for arr in (X, occupation, weights, sample_ids):
            arr.setflags(write=False)
        self.schema = schema
        self.X = X
        self.occupation = occupation
        self.weights = weights
        self.sample_ids = sample_ids
        self.provenance = provenance

    def __len__(self):
        return self.X.shape[0]

    def __getitem__(self, i):
        return Sample(
            sample_id=int(self.sample_ids[i]),
            features=tuple(float(v) for v in self.X[i]),
            weight=float(self.weights[i]),
            work_status=int(self.occupation[i] != UNEMPLOYED),
            blue_collar=int(self.occupation[i] == BLUE),
            white_collar=int(self.occupation[i] == WHITE),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __repr__(self):
        return f"Dataset(n={len(self)}, provenance={self.provenance!r})"

    def labels(self, experiment):
        return labels_from_occupation(self.occupation, experiment)

    def column(self, name):
        return self.X[:, self.schema.index(name)]

    def take(self, indices):
        """Sub-dataset of the given row positions, in the order given."""
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(
            self.schema,
            self.X[indices],
            self.occupation[indices],
            self.weights[indices],
            self.sample_ids[indices],
            self.provenance,
        )

    def where(self, mask):
        return self.take(np.flatnonzero(mask))

    def without_ids(self, ids):
        """Rows whose sample id is not in ``ids``."""
        return self.where(~np.isin(self.sample_ids, np.asarray(ids)))

    def positions_of(self, ids):
        """Row positions for the given sample ids (all must be present)."""
        order = np.argsort(self.sample_ids, kind="stable")
        pos = np.searchsorted(self.sample_ids, ids, sorter=order)
        pos = np.clip(pos, 0, len(self) - 1)
        found = order[pos]
        if not np.array_equal(self.sample_ids[found], np.asarray(ids)):
            raise SchemaError("sample ids not found in dataset")
        return found


def _validate(schema, X, occupation, weights):
    def fail(mask, message):
        row = int(np.flatnonzero(mask)[0])
        raise DataValidationError(message, row=row)

    bad = ~np.isfinite(X).all(axis=1)
    if bad.any():
        fail(bad, "missing or non-finite feature value")
    for j, spec in enumerate(schema):
        col = X[:, j]
        bad = (col < spec.low) | (col > spec.high)
        if spec.kind in (BINARY, CATEGORICAL):
            bad |= col != np.round(col)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataValidationError(
                f"{spec.name}={col[row]!r} outside schema range [{spec.low}, {spec.high}]", row=row
            )
    caste = schema.caste_indices
    if caste is not None:
        bad = X[:, caste].sum(axis=1) != 1
        if bad.any():
            fail(bad, "caste flags must be one-hot (exactly one of the four set)")
    bad = ~((occupation >= 0) & (occupation <= 2))
    if bad.any():
        fail(bad, "occupation code outside {0, 1, 2}")
    bad = ~(weights > 0) | ~np.isfinite(weights)
    if bad.any():
        fail(bad, "survey weight must be positive")


# -- CSV ---------------------------------------------------------------------


def load_csv(path, schema, label_column="occupation", weight_column="weight", id_column="sample_id"):
    """Read a UTF-8 CSV into a :class:`Dataset`.

    The header must name every schema feature plus ``label_column`` (values
    ``unemployed``/``blue``/``white``) and ``weight_column``. An
    ``id_column`` is used when present. Row errors carry the 0-based data
    row index.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        col = {name: i for i, name in enumerate(header)}
        for name in [*schema.names, label_column, weight_column]:
            if name not in col:
                raise SchemaError(f"{path}: missing column {name!r}")
        feat_cols = [col[n] for n in schema.names]
        occ_codes = {name: i for i, name in enumerate(OCCUPATIONS)}
        id_idx = col.get(id_column)
        rows, occ, wts, ids = [], [], [], []
        for r, record in enumerate(reader):
            if not record:
                continue
            if len(record) != len(header):
                raise DataValidationError(f"expected {len(header)} fields, got {len(record)}", row=r)
            try:
                rows.append([float(record[c]) for c in feat_cols])
                wts.append(float(record[col[weight_column]]))
                if id_idx is not None:
                    ids.append(int(record[id_idx]))
            except ValueError as exc:
                raise DataValidationError(f"unparseable value ({exc})", row=r) from None
            label = record[col[label_column]].strip()
            if label not in occ_codes:
                raise DataValidationError(
                    f"{label_column}={label!r} not in {OCCUPATIONS}", row=r
                )
            occ.append(occ_codes[label])
    if not rows:
        raise DataValidationError(f"{path}: no data rows")
    return Dataset(
        schema,
        np.array(rows),
        occ,
        wts,
        sample_ids=ids if id_idx is not None else None,
        provenance="ingested",
    )


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)


def write_csv(ds, path):
    """Write ``ds`` in the format :func:`load_csv` reads."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", *ds.schema.names, "occupation", "weight"])
        for i in range(len(ds)):
            w.writerow(
                [
                    int(ds.sample_ids[i]),
                    *(_fmt(v) for v in ds.X[i]),
                    OCCUPATIONS[ds.occupation[i]],
                    repr(float(ds.weights[i])),
                ]
            )


# -- statistics ----------------------------------------------------------------


def class_balance(ds, experiment):
    """Unweighted fraction of positive samples."""
    return float(ds.labels(experiment).mean())


@dataclass(frozen=True)
class FeatureSummary:
    name: str
    kind: str
    mean: float
    std: float
    frequencies: dict = None


def summary_stats(ds):
    """Per-feature mean and sample standard deviation (ddof=1).

    Categorical features report ``mean``/``std`` as NaN and give code
    frequencies instead.
    """
    out = []
    n = len(ds)
    for j, spec in enumerate(ds.schema):
        col = ds.X[:, j]
        if spec.kind == CATEGORICAL:
            codes, counts = np.unique(col.astype(np.int64), return_counts=True)
            freq = {int(c): int(k) for c, k in zip(codes, counts)}
            out.append(FeatureSummary(spec.name, spec.kind, math.nan, math.nan, freq))
        else:
            std = float(col.std(ddof=1)) if n > 1 else 0.0
            out.append(FeatureSummary(spec.name, spec.kind, float(col.mean()), std))
    return out


# -- sampling ------------------------------------------------------------------


def weighted_order(weights, rng, uniform=False):
    """Positions ordered by exponential keys ``E_i / w_i`` (ascending).

    Any prefix of length k is a weighted draw of k items without
    replacement with probability proportional to weight.
    """
    keys = rng.standard_exponential(len(weights))
    if not uniform:
        keys = keys / np.asarray(weights)
    return np.argsort(keys, kind="stable")


def _floor_fraction(fraction, n):
    return int(math.floor(fraction * n + 1e-9))


def stratified_split(ds, experiment, spec=SplitSpec(), uniform=False):
    """Split off a stratified test set.

    Each class contributes ``floor(test_fraction * n_class)`` test members,
    chosen by weighted sampling without replacement (survey weights), or
    uniformly within class when ``uniform`` is true.

    Returns
    -------
    train, test : Dataset
    """
    y = ds.labels(experiment)
    rng = np.random.default_rng(spec.seed)
    test_parts = []
    for cls in (1, 0):
        idx = np.flatnonzero(y == cls)
        k = _floor_fraction(spec.test_fraction, len(idx))
        if k < 1:
            raise SplitError(
                f"class {cls} of {experiment!r} has {len(idx)} samples; "
                f"too few for a test fraction of {spec.test_fraction}"
            )
        order = weighted_order(ds.weights[idx], rng, uniform=uniform)
        test_parts.append(idx[order[:k]])
    test_idx = np.sort(np.concatenate(test_parts))
    train_mask = np.ones(len(ds), dtype=bool)
    train_mask[test_idx] = False
    return ds.where(train_mask), ds.take(test_idx)


def kfold_indices(ds, experiment, spec=SplitSpec()):
    """Fold number (0..folds-1) for every row, stratified by class."""
    if spec.folds < 2:
        raise SplitError("k-fold needs at least 2 folds")
    y = ds.labels(experiment)
    rng = np.random.default_rng(spec.seed)
    fold = np.empty(len(ds), dtype=np.int64)
    for cls in (1, 0):
        idx = np.flatnonzero(y == cls)
        if len(idx) < spec.folds:
            raise SplitError(
                f"class {cls} of {experiment!r} has {len(idx)} samples, fewer than {spec.folds} folds"
            )
        perm = rng.permutation(idx)
        fold[perm] = np.arange(len(perm)) % spec.folds
    return fold


def kfold(ds, experiment, spec=SplitSpec()):
    """Stratified k-fold partition as a list of ``(fold_train, fold_valid)``."""
    fold = kfold_indices(ds, experiment, spec)
    return [(ds.where(fold != k), ds.where(fold == k)) for k in range(spec.folds)]


def weighted_subsample(ds, k, seed, uniform=False):
    """Draw ``k`` distinct samples with probability proportional to weight.

    Rows are returned in their original order.
    """
    if k > len(ds):
        raise SampleSizeError(f"requested {k} samples from a dataset of {len(ds)}")
    if k < 1:
        raise ValueError("k must be positive")
    rng = np.random.default_rng(seed)
    order = weighted_order(ds.weights, rng, uniform=uniform)
    return ds.take(np.sort(order[:k]))


def subset_seeds(seed, count):
    """Independent child seeds, one per subset index."""
    return [
        int(s.generate_state(1, np.uint64)[0])
        for s in np.random.SeedSequence(seed).spawn(count)
    ]


def bootstrap_subsets(ds, count, fraction, seed):
    """``count`` independent weighted draws of size ``floor(fraction * n)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    k = _floor_fraction(fraction, len(ds))
    return [weighted_subsample(ds, k, s) for s in subset_seeds(seed, count)]
