from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class Hyperparams:
    """Boosting hyperparameters.

    ``min_samples_leaf`` bounds the weighted sample count (sum of survey
    weights) of every leaf.
    """

    num_trees: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 31
    min_samples_leaf: float = 20
    l2_lambda: float = 1.0
    max_bins: int = 255

    def __post_init__(self):
        if self.num_trees < 0:
            raise ValueError("num_trees must be non-negative")
        for name in ("learning_rate", "l2_lambda", "min_samples_leaf"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be at least 2")
        if not 2 <= self.max_bins <= 256:
            raise ValueError("max_bins must lie in [2, 256]")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes):
        return Hyperparams(**{**self.to_dict(), **changes})


def default_grid():
    """Grid used by the replication pipeline: 2 x 3 x 2 x 2 = 24 points."""
    return [
        Hyperparams(num_trees=t, learning_rate=lr, max_leaves=leaves, min_samples_leaf=msl)
        for lr in (0.05, 0.1)
        for leaves in (15, 31, 63)
        for t in (100, 200)
        for msl in (20, 50)
    ]
