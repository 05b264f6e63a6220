"""Feature schema for the survey inputs.

The built-in schema declares the sixteen socio-economic features in a fixed
order; that order indexes every feature matrix, attribution matrix and
interaction tensor in the package.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError

NUMERIC = "numeric"
BINARY = "binary"
CATEGORICAL = "categorical"
KINDS = (NUMERIC, BINARY, CATEGORICAL)

CASTE_FEATURES = ("caste_general", "caste_scst", "caste_obc", "caste_unknown")


@dataclass(frozen=True)
class FeatureSpec:
    """One input feature.

    ``low``/``high`` are inclusive bounds for numeric features. Binary
    features are fixed to {0, 1}. Categorical features carry
    ``n_categories`` and take dense integer codes ``0..n_categories-1``.
    """

    name: str
    kind: str
    low: float = 0.0
    high: float = 1.0
    n_categories: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if self.n_categories < 1:
                raise SchemaError(f"feature {self.name!r}: categorical needs n_categories >= 1")
            object.__setattr__(self, "low", 0.0)
            object.__setattr__(self, "high", float(self.n_categories - 1))
        elif self.kind == BINARY:
            object.__setattr__(self, "low", 0.0)
            object.__setattr__(self, "high", 1.0)
        if self.low > self.high:
            raise SchemaError(f"feature {self.name!r}: low > high")

    @property
    def is_categorical(self):
        return self.kind == CATEGORICAL

    def to_dict(self):
        d = {"name": self.name, "kind": self.kind}
        if self.kind == CATEGORICAL:
            d["n_categories"] = self.n_categories
        elif self.kind == NUMERIC:
            d["low"] = self.low
            d["high"] = self.high
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            kind = d["kind"]
            if kind == CATEGORICAL:
                return cls(d["name"], kind, n_categories=int(d["n_categories"]))
            if kind == BINARY:
                return cls(d["name"], kind)
            return cls(d["name"], kind, float(d["low"]), float(d["high"]))
        except KeyError as exc:
            raise SchemaError(f"feature spec missing field {exc.args[0]!r}: {d}") from None


class FeatureSchema:
    """Ordered, name-unique collection of :class:`FeatureSpec`."""

    def __init__(self, features):
        self.features = tuple(features)
        if not self.features:
            raise SchemaError("schema has no features")
        names = [f.name for f in self.features]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate feature names: {dupes}")
        self._index = {n: i for i, n in enumerate(names)}

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.features[self.index(key)]
        return self.features[key]

    def __eq__(self, other):
        return isinstance(other, FeatureSchema) and self.features == other.features

    def __hash__(self):
        return hash(self.features)

    def __repr__(self):
        return f"FeatureSchema({len(self)} features)"

    @property
    def names(self):
        return [f.name for f in self.features]

    def index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"unknown feature {name!r}") from None

    @property
    def categorical_mask(self):
        return [f.is_categorical for f in self.features]

    @property
    def n_categories(self):
        return [f.n_categories for f in self.features]

    @property
    def caste_indices(self):
        """Indices of the four one-hot caste flags, or None if absent."""
        if all(c in self._index for c in CASTE_FEATURES):
            return [self._index[c] for c in CASTE_FEATURES]
        return None

    def to_dict(self):
        return {"features": [f.to_dict() for f in self.features]}

    @classmethod
    def from_dict(cls, d):
        if "features" not in d:
            raise SchemaError("schema document lacks 'features'")
        return cls(FeatureSpec.from_dict(f) for f in d["features"])

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_schema():
    """The sixteen-feature survey schema."""
    return FeatureSchema(
        [
            FeatureSpec("age", NUMERIC, 21, 49),
            FeatureSpec("years_of_education", NUMERIC, 0, 20),
            FeatureSpec("state", CATEGORICAL, n_categories=36),
            FeatureSpec("residence_type", BINARY),
            FeatureSpec("household_religion", CATEGORICAL, n_categories=10),
            FeatureSpec("wealth_index", NUMERIC, 0, 4),
            FeatureSpec("household_members", NUMERIC, 1, 39),
            FeatureSpec("freq_of_tv", NUMERIC, 0, 3),
            FeatureSpec("total_children", NUMERIC, 0, 15),
            FeatureSpec("children_below_5", NUMERIC, 0, 9),
            FeatureSpec("anemic", BINARY),
            FeatureSpec("obese", BINARY),
            FeatureSpec("caste_general", BINARY),
            FeatureSpec("caste_scst", BINARY),
            FeatureSpec("caste_obc", BINARY),
            FeatureSpec("caste_unknown", BINARY),
        ]
    )
