"""Statistical products built from attribution matrices.

Everything here is a deterministic function of its inputs. Means are
unweighted; survey weights enter only through the model and the samples
that were drawn.
"""

import csv
import itertools
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm, rankdata

from .dataset import Dataset
from .errors import ComparisonError, SchemaError


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _feature_rows(attr, ds):
    """Rows of ``ds.X`` matching ``attr.sample_ids`` in order."""
    if len(ds) == attr.n_samples and np.array_equal(ds.sample_ids, attr.sample_ids):
        return ds.X
    return ds.X[ds.positions_of(attr.sample_ids)]


def _schema_index(ds, name):
    return ds.schema.index(name)


# -- importance ------------------------------------------------------------------


@dataclass
class ImportanceRanking:
    """Features ordered by mean |SHAP|, largest first."""

    rows: list  # (feature, mean_abs)

    def features(self):
        return [f for f, _ in self.rows]

    def rank_of(self, feature):
        return self.features().index(feature) + 1

    def to_csv(self, path):
        _write_csv(path, ["rank", "feature", "mean_abs_shap"],
                   [(i + 1, f, v) for i, (f, v) in enumerate(self.rows)])


def global_importance(shap):
    means = np.abs(shap.values).mean(axis=0)
    order = np.argsort(-means, kind="stable")
    return ImportanceRanking([(shap.feature_names[j], float(means[j])) for j in order])


# -- cohort curves ---------------------------------------------------------------------


@dataclass(frozen=True)
class CohortPoint:
    value: float
    mean: float
    ci_low: float
    ci_high: float
    n: int


@dataclass
class CohortCurve:
    """Mean |SHAP| of ``feature`` per discrete ``cohort_key`` value."""

    feature: str
    cohort_key: str
    points: list
    confidence: float = 0.99

    @property
    def values(self):
        return np.array([p.value for p in self.points])

    @property
    def means(self):
        return np.array([p.mean for p in self.points])

    def to_csv(self, path):
        _write_csv(
            path,
            [self.cohort_key, "mean_abs_shap", "ci_low", "ci_high", "n"],
            [(int(p.value), p.mean, p.ci_low, p.ci_high, p.n) for p in self.points],
        )


def cohort_curve(shap, ds, feature="caste_scst", cohort_feature="age", confidence=0.99):
    """Per-cohort mean |SHAP| with a normal-approximation confidence interval.

    ``mean +/- z * s / sqrt(n)`` with sample standard deviation ``s``;
    single-member cohorts get a zero-width interval. Empty cohorts are
    omitted.
    """
    rows = _feature_rows(shap, ds)
    cohort = rows[:, _schema_index(ds, cohort_feature)]
    if not np.array_equal(cohort, np.round(cohort)):
        raise ValueError(f"cohort feature {cohort_feature!r} must be integer-valued")
    mag = np.abs(shap.column(feature))
    z = float(norm.ppf(0.5 + confidence / 2))
    points = []
    for value in np.unique(cohort):
        grp = mag[cohort == value]
        n = len(grp)
        mean = float(grp.mean())
        half = z * float(grp.std(ddof=1)) / np.sqrt(n) if n > 1 else 0.0
        points.append(CohortPoint(float(value), mean, mean - half, mean + half, n))
    return CohortCurve(feature, cohort_feature, points, confidence)


# -- per-sample extracts ---------------------------------------------------------------


@dataclass
class DependenceExtract:
    """Per-sample (x value, attribution, colour value) rows."""

    x_feature: str
    color_feature: str
    sample_ids: np.ndarray
    x: np.ndarray
    attribution: np.ndarray
    color: np.ndarray

    def __len__(self):
        return len(self.sample_ids)

    def to_csv(self, path):
        _write_csv(
            path,
            ["sample_id", self.x_feature, "attribution", f"color_{self.color_feature}"],
            zip(self.sample_ids.tolist(), self.x, self.attribution, self.color),
        )


def dependence_extract(shap, ds, feature, color_feature):
    rows = _feature_rows(shap, ds)
    return DependenceExtract(
        feature,
        color_feature,
        shap.sample_ids.copy(),
        rows[:, _schema_index(ds, feature)].copy(),
        shap.column(feature).copy(),
        rows[:, _schema_index(ds, color_feature)].copy(),
    )


def main_effect_extract(tensor, ds, feature, color_feature):
    """Dependence-style rows using the main effect (diagonal) of ``feature``."""
    rows = _feature_rows(tensor, ds)
    j = tensor.feature_index(feature)
    return DependenceExtract(
        feature,
        color_feature,
        tensor.sample_ids.copy(),
        rows[:, _schema_index(ds, feature)].copy(),
        tensor.values[:, j, j].copy(),
        rows[:, _schema_index(ds, color_feature)].copy(),
    )


def interaction_pair_extract(tensor, ds, feature_a, feature_b, x_axis="a"):
    """Interaction values of one feature pair, plotted against either feature."""
    if feature_a == feature_b:
        raise ValueError("interaction extract needs two distinct features")
    if x_axis not in ("a", "b"):
        raise ValueError("x_axis must be 'a' or 'b'")
    rows = _feature_rows(tensor, ds)
    ja, jb = tensor.feature_index(feature_a), tensor.feature_index(feature_b)
    x_name, c_name = (feature_a, feature_b) if x_axis == "a" else (feature_b, feature_a)
    return DependenceExtract(
        x_name,
        c_name,
        tensor.sample_ids.copy(),
        rows[:, _schema_index(ds, x_name)].copy(),
        tensor.values[:, ja, jb].copy(),
        rows[:, _schema_index(ds, c_name)].copy(),
    )


# -- heatmap / groups ---------------------------------------------------------------------


@dataclass
class HeatmapMatrix:
    feature_names: list
    values: np.ndarray

    def to_csv(self, path):
        _write_csv(path, ["feature", *self.feature_names],
                   ([n, *row] for n, row in zip(self.feature_names, self.values.tolist())))


def interaction_heatmap(tensor):
    """Mean |interaction| per feature pair over samples."""
    m = len(tensor.feature_names)
    mean_abs = np.abs(tensor.values).mean(axis=0)
    out = np.empty((m, m))
    upper = np.triu_indices(m)
    out[upper] = mean_abs[upper]
    out.T[upper] = mean_abs[upper]
    return HeatmapMatrix(list(tensor.feature_names), out)


@dataclass(frozen=True)
class GroupRow:
    group: int
    mean_abs: float
    n: int


def group_mean_importance(shap, ds, feature, group_feature="state"):
    """Mean |SHAP| of ``feature`` within each category of ``group_feature``."""
    g = _schema_index(ds, group_feature)
    if not ds.schema[g].is_categorical:
        raise SchemaError(f"group feature {group_feature!r} must be categorical")
    groups = _feature_rows(shap, ds)[:, g].astype(np.int64)
    mag = np.abs(shap.column(feature))
    return [
        GroupRow(int(c), float(mag[groups == c].mean()), int((groups == c).sum()))
        for c in np.unique(groups)
    ]


def write_group_csv(rows, path, group_feature="state"):
    _write_csv(path, [group_feature, "mean_abs_shap", "n"], [(r.group, r.mean_abs, r.n) for r in rows])


# -- rank correlation ---------------------------------------------------------------------


@dataclass
class CorrelationMatrix:
    feature_names: list
    values: np.ndarray
    constant: list = field(default_factory=list)  # names of constant columns

    def to_csv(self, path):
        _write_csv(path, ["feature", *self.feature_names],
                   ([n, *row] for n, row in zip(self.feature_names, self.values.tolist())))


def spearman(a, b):
    """Spearman's rho as the Pearson correlation of average ranks; 0 if either is constant."""
    ra = rankdata(a, method="average")
    rb = rankdata(b, method="average")
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt(np.dot(ra, ra) * np.dot(rb, rb))
    if denom == 0:
        return 0.0
    return float(np.clip(np.dot(ra, rb) / denom, -1.0, 1.0))


def spearman_matrix(data, feature_names=None):
    """Pairwise Spearman correlations between columns.

    Constant columns correlate 0 with everything else (diagonal stays 1)
    and are listed in ``constant`` with a warning.
    """
    if isinstance(data, Dataset):
        feature_names = feature_names or data.schema.names
        data = data.X
    X = np.asarray(data, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("rank correlation needs at least 2 samples")
    m = X.shape[1]
    feature_names = list(feature_names or [f"x{j}" for j in range(m)])
    ranks = np.column_stack([rankdata(X[:, j], method="average") for j in range(m)])
    centered = ranks - ranks.mean(axis=0)
    ss = (centered * centered).sum(axis=0)
    constant = [feature_names[j] for j in range(m) if ss[j] == 0]
    if constant:
        warnings.warn(f"constant columns get zero rank correlation: {constant}", RuntimeWarning, stacklevel=2)
    safe = np.where(ss == 0, 1.0, ss)
    out = (centered.T @ centered) / np.sqrt(np.outer(safe, safe))
    out[ss == 0, :] = 0.0
    out[:, ss == 0] = 0.0
    out = np.clip((out + out.T) / 2, -1.0, 1.0)
    np.fill_diagonal(out, 1.0)
    return CorrelationMatrix(feature_names, out, constant)


# -- robustness ------------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveComparison:
    first: int
    second: int
    spearman: float
    max_gap: float
    n_common: int


def robustness_compare(curves):
    """Pairwise similarity of cohort curves over their shared cohort values."""
    curves = list(curves)
    if len(curves) < 2:
        raise ValueError("need at least two curves")
    common = set(curves[0].values.tolist())
    for c in curves[1:]:
        common &= set(c.values.tolist())
    if not common:
        raise ComparisonError("curves share no cohort values")
    grid = np.array(sorted(common))
    series = []
    for c in curves:
        lookup = dict(zip(c.values.tolist(), c.means.tolist()))
        series.append(np.array([lookup[v] for v in grid]))
    out = []
    for i, j in itertools.combinations(range(len(curves)), 2):
        a, b = series[i], series[j]
        gap = float(np.max(np.abs(a - b)))
        flat_a, flat_b = np.ptp(a) == 0, np.ptp(b) == 0
        if len(grid) == 1 or (flat_a and flat_b):
            rho = 1.0  # two flat curves have the same shape
        else:
            rho = spearman(a, b)
        out.append(CurveComparison(i, j, rho, gap, len(grid)))
    return out


def write_comparison_csv(rows, path, labels=None):
    def name(i):
        return labels[i] if labels else i

    _write_csv(path, ["curve_a", "curve_b", "spearman", "max_gap", "n_common"],
               [(name(r.first), name(r.second), r.spearman, r.max_gap, r.n_common) for r in rows])
