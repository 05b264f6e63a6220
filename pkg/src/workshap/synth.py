"""Synthetic survey data with planted logistic effects.

Features are drawn independently from per-feature marginals. Labels come
from two logit models:

* ``work``: whether the woman works at all.
* ``white``: among working women, whether the job is white-collar; the
  rest of the working women are blue-collar.

Each logit is ``b0 + sum_j b_j * xt_j + g_ca * scst * (age - 35) / 14
+ g_we * xt_wealth * xt_education`` where ``xt`` is the standardized
feature for numeric columns (using the configured marginal mean and
standard deviation), the raw 0/1 value for binary columns, and a
per-category offset for categorical columns.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .dataset import Dataset
from .errors import GenerationError
from .schema import BINARY, CATEGORICAL, CASTE_FEATURES, default_schema

LABEL_MODELS = ("work", "white")
AGE_CENTER = 35.0
AGE_SCALE = 14.0
CASTE_PROBS = (0.224, 0.372, 0.398, 0.004)

# Calibration targets (mean, std) for the numeric columns and P(1) for the
# non-caste binary columns.
NUMERIC_TARGETS = {
    "age": (33.765, 8.153),
    "years_of_education": (6.301, 5.401),
    "wealth_index": (2.088, 1.389),
    "household_members": (5.546, 2.553),
    "freq_of_tv": (2.047, 1.256),
    "total_children": (2.426, 1.749),
    "children_below_5": (0.632, 0.907),
}
BINARY_TARGETS = {"residence_type": 0.309, "anemic": 0.520, "obese": 0.234}


def default_marginals(schema=None):
    schema = schema or default_schema()
    out = {}
    for spec in schema:
        if spec.name in CASTE_FEATURES:
            continue
        if spec.kind == CATEGORICAL:
            out[spec.name] = {"kind": "categorical", "probs": None}
        elif spec.kind == BINARY:
            out[spec.name] = {"kind": "bernoulli", "p": BINARY_TARGETS.get(spec.name, 0.5)}
        else:
            mean, std = NUMERIC_TARGETS.get(spec.name, ((spec.low + spec.high) / 2, (spec.high - spec.low) / 4))
            out[spec.name] = {"kind": "integer_normal", "mean": mean, "std": std}
    return out


def default_coefficients():
    """Older Sc/St women work more; younger Sc/St women hold more white-collar jobs."""
    return {
        "work": LogitModel(
            intercept=-1.05,
            linear={"caste_scst": 1.0, "years_of_education": -0.3, "wealth_index": -0.4,
                    "children_below_5": -0.3, "age": 0.2},
            gamma_caste_age=1.0,
        ),
        "white": LogitModel(
            intercept=-1.8,
            linear={"caste_scst": -0.3, "years_of_education": 1.0, "wealth_index": 0.5},
            gamma_caste_age=-1.5,
        ),
    }


@dataclass
class LogitModel:
    intercept: float = 0.0
    linear: dict = field(default_factory=dict)  # feature -> beta (list for categoricals)
    gamma_caste_age: float = 0.0
    gamma_wealth_education: float = 0.0

    def to_dict(self):
        return {
            "intercept": self.intercept,
            "linear": dict(self.linear),
            "gamma_caste_age": self.gamma_caste_age,
            "gamma_wealth_education": self.gamma_wealth_education,
        }

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"intercept", "linear", "gamma_caste_age", "gamma_wealth_education"}
        if unknown:
            raise GenerationError(f"unknown logit model keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class GeneratorSpec:
    """Everything needed to regenerate a synthetic dataset bit for bit.

    ``target_balance`` optionally maps ``work``/``white`` to a desired
    positive rate (for ``white`` the rate among working women); the
    matching intercept is then solved for on the drawn features and
    overrides the configured one.
    """

    n: int = 10_000
    seed: int = 0
    marginals: dict = field(default_factory=default_marginals)
    caste_probs: tuple = CASTE_PROBS
    coefficients: dict = field(default_factory=default_coefficients)
    weight_model: dict = field(default_factory=lambda: {"kind": "lognormal", "sigma": 0.5})
    target_balance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise GenerationError("n must be positive")
        self.coefficients = {
            k: v if isinstance(v, LogitModel) else LogitModel.from_dict(v)
            for k, v in self.coefficients.items()
        }
        bad = set(self.coefficients) - set(LABEL_MODELS)
        if bad:
            raise GenerationError(f"coefficients must be keyed by {LABEL_MODELS}, got {sorted(bad)}")
        for k in LABEL_MODELS:
            self.coefficients.setdefault(k, LogitModel())
        bad = set(self.target_balance) - set(LABEL_MODELS)
        if bad:
            raise GenerationError(f"target_balance keys must be in {LABEL_MODELS}")
        probs = np.asarray(self.caste_probs, dtype=np.float64)
        if probs.shape != (4,) or np.any(probs < 0) or probs.sum() <= 0:
            raise GenerationError("caste_probs must be 4 non-negative numbers")
        self.caste_probs = tuple(float(p) for p in probs / probs.sum())
        if self.weight_model.get("kind") not in ("lognormal", "constant"):
            raise GenerationError(f"unknown weight model {self.weight_model!r}")

    def to_dict(self):
        return {
            "n": self.n,
            "seed": self.seed,
            "marginals": self.marginals,
            "caste_probs": list(self.caste_probs),
            "coefficients": {k: v.to_dict() for k, v in self.coefficients.items()},
            "weight_model": self.weight_model,
            "target_balance": self.target_balance,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        marg = default_marginals()
        marg.update(d.pop("marginals", {}))
        return cls(marginals=marg, **d)

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- marginals ----------------------------------------------------------------------


def _integer_normal_probs(mu, sigma, low, high):
    # normal density on the integer grid, normalized in log space so far-off
    # locations do not underflow
    k = np.arange(low, high + 1, dtype=np.float64)
    logp = -0.5 * ((k - mu) / sigma) ** 2
    p = np.exp(logp - logp.max())
    return k, p / p.sum()


def integer_normal(mean, std, low, high):
    """Integer-valued normal truncated to ``[low, high]`` whose mean equals ``mean``.

    The location parameter is solved for numerically so truncation does
    not shift the mean; ``std`` is the scale before truncation.
    """
    if not low < mean < high:
        raise GenerationError(f"mean {mean} outside ({low}, {high})")

    def gap(mu):
        k, p = _integer_normal_probs(mu, std, low, high)
        return float(np.dot(k, p)) - mean

    span = high - low
    mu = brentq(gap, low - 10 * span, high + 10 * span, xtol=1e-12)
    return _integer_normal_probs(mu, std, low, high)


def _draw_features(spec, schema, rng):
    n = spec.n
    X = np.zeros((n, len(schema)))
    for j, fs in enumerate(schema):
        if fs.name in CASTE_FEATURES:
            continue
        m = spec.marginals.get(fs.name)
        if m is None:
            raise GenerationError(f"no marginal for feature {fs.name!r}")
        kind = m["kind"]
        if kind == "categorical":
            probs = m.get("probs")
            p = None if probs is None else np.asarray(probs, dtype=np.float64) / np.sum(probs)
            X[:, j] = rng.choice(fs.n_categories, size=n, p=p)
        elif kind == "bernoulli":
            X[:, j] = rng.random(n) < m["p"]
        elif kind == "integer_normal":
            values, p = integer_normal(m["mean"], m["std"], fs.low, fs.high)
            X[:, j] = rng.choice(values, size=n, p=p)
        else:
            raise GenerationError(f"unknown marginal kind {kind!r} for {fs.name}")
    caste = rng.choice(4, size=n, p=np.asarray(spec.caste_probs))
    for c, name in enumerate(CASTE_FEATURES):
        X[:, schema.index(name)] = caste == c
    return X


# -- label model ------------------------------------------------------------------------


def _standardize(spec, schema, name, x):
    fs = schema[schema.index(name)]
    if fs.kind != "numeric":
        return x
    m = spec.marginals[name]
    return (x - m["mean"]) / m["std"]


def _term(spec, schema, name, beta, x):
    fs = schema[schema.index(name)]
    if fs.kind == CATEGORICAL:
        beta = np.asarray(beta, dtype=np.float64)
        if beta.shape != (fs.n_categories,):
            raise GenerationError(f"{name}: need one coefficient per category")
        return beta[np.asarray(x, dtype=np.int64)]
    return float(beta) * _standardize(spec, schema, name, x)


def interaction_term(gamma, scst, age):
    """Centered, scaled caste x age product."""
    return gamma * scst * (age - AGE_CENTER) / AGE_SCALE


def logit(spec, X, model_name, schema=None):
    """Planted log-odds of one label model for every row of ``X``."""
    schema = schema or default_schema()
    model = spec.coefficients[model_name]
    eta = np.full(X.shape[0], float(model.intercept))
    for name, beta in model.linear.items():
        eta += _term(spec, schema, name, beta, X[:, schema.index(name)])
    eta += interaction_term(model.gamma_caste_age, X[:, schema.index("caste_scst")],
                            X[:, schema.index("age")])
    if model.gamma_wealth_education:
        eta += (model.gamma_wealth_education
                * _standardize(spec, schema, "wealth_index", X[:, schema.index("wealth_index")])
                * _standardize(spec, schema, "years_of_education", X[:, schema.index("years_of_education")]))
    return eta


def _solve_intercept(eta_wo_intercept, target, name, mask=None):
    """Intercept whose mean probability over the rows in ``mask`` hits ``target``."""
    if not 0.0 < target < 1.0:
        raise GenerationError(f"balance target for {name} must lie in (0, 1), got {target}")
    eta = eta_wo_intercept if mask is None else eta_wo_intercept[mask]
    if len(eta) == 0:
        raise GenerationError(f"no rows available to calibrate {name}")

    def gap(b):
        return float(expit(eta + b).mean()) - target

    lo, hi = -1.0, 1.0
    for _ in range(60):  # bounded bracket expansion
        if gap(lo) < 0 < gap(hi):
            return brentq(gap, lo, hi, xtol=1e-12)
        lo, hi = lo * 2, hi * 2
    raise GenerationError(f"balance target {target} for {name} is infeasible")


def _weights(spec, rng):
    wm = spec.weight_model
    if wm["kind"] == "constant":
        value = float(wm.get("value", 1.0))
        if not value > 0:
            raise GenerationError("constant weight must be positive")
        return np.full(spec.n, value)
    sigma = float(wm.get("sigma", 0.5))
    # mean-one lognormal
    return np.exp(rng.normal(-0.5 * sigma * sigma, sigma, size=spec.n))


def generate(spec, schema=None):
    """Draw a synthetic Dataset from ``spec``; deterministic under ``spec.seed``."""
    schema = schema or default_schema()
    feat_seed, label_seed, weight_seed = np.random.SeedSequence(spec.seed).spawn(3)
    X = _draw_features(spec, schema, np.random.default_rng(feat_seed))

    eta_work = logit(spec, X, "work", schema)
    eta_white = logit(spec, X, "white", schema)
    rng = np.random.default_rng(label_seed)
    u_work, u_white = rng.random(spec.n), rng.random(spec.n)

    if "work" in spec.target_balance:
        b0 = spec.coefficients["work"].intercept
        shift = _solve_intercept(eta_work - b0, spec.target_balance["work"], "work") - b0
        eta_work = eta_work + shift
    work = u_work < expit(eta_work)
    if "white" in spec.target_balance:
        b0 = spec.coefficients["white"].intercept
        shift = _solve_intercept(eta_white - b0, spec.target_balance["white"], "white", work) - b0
        eta_white = eta_white + shift
    white = work & (u_white < expit(eta_white))

    occupation = np.where(white, 2, np.where(work, 1, 0)).astype(np.int64)
    weights = _weights(spec, np.random.default_rng(weight_seed))
    return Dataset(schema, X, occupation, weights, provenance="synthetic")


def ground_truth_effect(spec, feature, cohort_value, experiment="work", value=1.0,
                        interaction_only=False, schema=None):
    """Planted logit contribution of ``feature`` for a woman aged ``cohort_value``.

    ``value`` is the feature's own value (1 for an indicator that is on).
    The caste x age term is credited to ``caste_scst``; the wealth x
    education term to neither, so it is omitted. With
    ``interaction_only`` only the caste x age term is returned.

    Only the ``work`` and ``white`` models are linear in the logit; the
    blue-collar label is derived from both and has no planted effect.
    """
    schema = schema or default_schema()
    if experiment not in LABEL_MODELS:
        raise GenerationError(f"experiment {experiment!r} has no linear-logit model")
    model = spec.coefficients[experiment]
    inter = 0.0
    if feature == "caste_scst":
        inter = float(interaction_term(model.gamma_caste_age, value, float(cohort_value)))
    if interaction_only:
        return inter
    beta = model.linear.get(feature, 0.0)
    if feature == "age":
        value = cohort_value
    main = float(_term(spec, schema, feature, beta, np.array([value]))[0]) if np.ndim(beta) or beta else 0.0
    return main + inter
