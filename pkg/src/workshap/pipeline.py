"""End-to-end pipeline: synth/ingest, split, tune, train, explain, analyze, report.

Every stage reads its inputs from and writes its outputs to one run
directory, so a stage can be re-run on its own and ``run`` is just the
stages in order. All randomness is derived from the configured master
seed and the stage name, never from the clock.
"""

import base64
import copy
import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, analysis, gbdt, svg, synth, treeshap
from .dataset import (
    EXPERIMENTS,
    SplitSpec,
    bootstrap_subsets,
    class_balance,
    load_csv,
    stratified_split,
    weighted_subsample,
    write_csv,
)
from .errors import PipelineError, SchemaError
from .gbdt import Hyperparams, default_grid
from .schema import FeatureSchema, default_schema

log = logging.getLogger(__name__)

STAGES = ("synth", "split", "tune", "train", "explain", "interactions", "analyze", "report")
_STAGE_CODES = {"synth": 0, "split": 1, "tune": 2, "interactions": 3, "bootstrap": 4}
SCOPES = ("full", "test")

_HP_SCHEMA = {
    "type": "object",
    "properties": {
        "num_trees": {"type": "integer", "minimum": 0},
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "max_leaves": {"type": "integer", "minimum": 2},
        "min_samples_leaf": {"type": "number", "exclusiveMinimum": 0},
        "l2_lambda": {"type": "number", "exclusiveMinimum": 0},
        "max_bins": {"type": "integer", "minimum": 2, "maximum": 256},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "workshap run configuration",
    "type": "object",
    "properties": {
        "input": {
            "type": "object",
            "properties": {
                "csv": {"type": "string"},
                "generator": {"type": "object"},
                "schema": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "experiments": {
            "type": "array",
            "items": {"enum": list(EXPERIMENTS)},
            "minItems": 1,
            "uniqueItems": True,
        },
        "split": {
            "type": "object",
            "properties": {
                "test_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "folds": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "grid": {"type": "array", "items": _HP_SCHEMA, "minItems": 1},
        "interaction_subsample": {"type": "integer", "minimum": 1},
        "attribution_scope": {"enum": ["full", "test", "test_only"]},
        "bootstrap": {
            "type": ["object", "null"],
            "properties": {
                "count": {"type": "integer", "minimum": 2},
                "fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
            "required": ["count", "fraction"],
            "additionalProperties": False,
        },
        "focus_feature": {"type": "string"},
        "cohort_feature": {"type": "string"},
        "threads": {"type": ["integer", "null"], "minimum": 1},
        "output_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    },
    "required": ["seed"],
    "additionalProperties": False,
}


@dataclass
class RunConfig:
    seed: int
    input: dict = field(default_factory=lambda: {"generator": {}})
    experiments: list = field(default_factory=lambda: list(EXPERIMENTS))
    split: dict = field(default_factory=lambda: {"test_fraction": 0.05, "folds": 5})
    grid: list = field(default_factory=lambda: [hp.to_dict() for hp in default_grid()])
    interaction_subsample: int = 10_000
    attribution_scope: str = "full"
    bootstrap: dict = None
    focus_feature: str = "caste_scst"
    cohort_feature: str = "age"
    threads: int = None
    output_dir: str = "workshap_run"

    @classmethod
    def from_dict(cls, d):
        d = copy.deepcopy(d)
        if "config" in d and "seed" not in d:  # a run manifest
            d = d["config"]
        if "seed" not in d:
            raise SchemaError("run configuration needs a 'seed' (or pass --seed)")
        unknown = set(d) - set(CONFIG_SCHEMA["properties"])
        if unknown:
            raise SchemaError(f"unknown run configuration keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path):
        path = Path(path)
        if not path.exists():
            raise PipelineError(f"config file not found: {path}", "config")
        return cls.from_dict(json.loads(path.read_text()))

    def to_dict(self):
        return {
            "seed": self.seed,
            "input": self.input,
            "experiments": list(self.experiments),
            "split": self.split,
            "grid": self.grid,
            "interaction_subsample": self.interaction_subsample,
            "attribution_scope": self.attribution_scope,
            "bootstrap": self.bootstrap,
            "focus_feature": self.focus_feature,
            "cohort_feature": self.cohort_feature,
            "threads": self.threads,
            "output_dir": self.output_dir,
        }

    def validate(self):
        try:
            jsonschema.validate(self.to_dict(), CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise SchemaError(f"invalid run configuration at {path}: {exc.message}") from None
        if self.attribution_scope == "test_only":
            self.attribution_scope = "test"
        if bool(self.input.get("csv")) == bool("generator" in self.input):
            raise SchemaError("input needs exactly one of 'csv' or 'generator'")
        self.split_spec(0)
        self.hyperparams_grid()
        names = self.schema().names
        for key in ("focus_feature", "cohort_feature"):
            if getattr(self, key) not in names:
                raise SchemaError(f"{key} {getattr(self, key)!r} is not a schema feature")
        return self

    def schema(self):
        path = self.input.get("schema")
        return FeatureSchema.from_json(path) if path else default_schema()

    def split_spec(self, seed):
        return SplitSpec(test_fraction=self.split.get("test_fraction", 0.05),
                         folds=self.split.get("folds", 5), seed=seed)

    def hyperparams_grid(self):
        return [Hyperparams.from_dict(d) for d in self.grid]

    def stage_seed(self, stage, experiment=None):
        """Seed for one stage (and experiment), derived from the master seed."""
        exp_code = 0 if experiment is None else EXPERIMENTS.index(experiment) + 1
        ss = np.random.SeedSequence(self.seed, spawn_key=(_STAGE_CODES[stage], exp_code))
        return int(ss.generate_state(1, np.uint64)[0])


def config_schema_json():
    return json.dumps(CONFIG_SCHEMA, indent=2) + "\n"


# -- run directory bookkeeping -----------------------------------------------------------


class RunDir:
    """Paths of every artifact inside one run directory."""

    def __init__(self, root):
        self.root = Path(root)

    def path(self, rel):
        return self.root / rel

    def rel(self, path):
        return Path(path).relative_to(self.root).as_posix()

    def ensure(self):
        for sub in ("data", "tables", "charts", "attributions"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    dataset = property(lambda self: self.root / "data" / "dataset.csv")
    generator_spec = property(lambda self: self.root / "data" / "generator_spec.json")
    manifest = property(lambda self: self.root / "manifest.json")
    report = property(lambda self: self.root / "report.md")
    report_json = property(lambda self: self.root / "report.json")

    def train_csv(self, exp):
        return self.root / "data" / f"{exp}_train.csv"

    def test_csv(self, exp):
        return self.root / "data" / f"{exp}_test.csv"

    def tune(self, exp):
        return self.root / f"tune_{exp}.json"

    def model(self, exp):
        return self.root / f"model_{exp}.json"

    def metrics(self, exp):
        return self.root / f"metrics_{exp}.json"

    def shap(self, exp):
        return self.root / "attributions" / f"shap_{exp}"

    def interactions(self, exp):
        return self.root / "attributions" / f"interactions_{exp}"

    def table(self, name):
        return self.root / "tables" / f"{name}.csv"

    def chart(self, name):
        return self.root / "charts" / f"{name}.svg"


def require(path, producer):
    """Fail with a message naming the missing upstream artifact."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing upstream artifact {path} (produced by the '{producer}' stage)")
    return path


class Manifest:
    """Run manifest; persisted after every stage so failures leave a partial record."""

    def __init__(self, rd, cfg):
        self.rd = rd
        if rd.manifest.exists():
            self.data = json.loads(rd.manifest.read_text())
        else:
            self.data = {}
        self.data.update({
            "tool": "workshap",
            "version": __version__,
            "seed": cfg.seed,
            "config": cfg.to_dict(),
        })
        self.data.setdefault("stages", {})
        self.data.setdefault("experiments", {})
        self.data.setdefault("artifacts", [])

    def experiment(self, exp):
        return self.data["experiments"].setdefault(exp, {"artifacts": [], "timings": {}})

    def add(self, path, exp=None):
        rel = self.rd.rel(path)
        bucket = self.data["artifacts"] if exp is None else self.experiment(exp)["artifacts"]
        if rel not in bucket:
            bucket.append(rel)
            bucket.sort()

    def stage(self, name, status, seconds=None, error=None):
        entry = {"status": status}
        if seconds is not None:
            entry["seconds"] = round(seconds, 3)
        if error is not None:
            entry["error"] = error
        self.data["stages"][name] = entry
        if status == "failed":
            self.data["status"] = "failed"
            self.data["failed_stage"] = name
        else:
            if self.data.get("failed_stage") == name:
                del self.data["failed_stage"]
            done = all(self.data["stages"].get(s, {}).get("status") == "ok" for s in STAGES)
            self.data["status"] = "failed" if "failed_stage" in self.data else "ok" if done else "incomplete"

    def save(self):
        self.rd.manifest.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")


# -- stages -------------------------------------------------------------------------------


class Pipeline:
    def __init__(self, cfg, out_dir=None):
        self.cfg = cfg
        self.rd = RunDir(out_dir or cfg.output_dir)
        self.rd.ensure()
        self.schema = cfg.schema()
        self.manifest = Manifest(self.rd, cfg)
        self._source = None

    # data access ----------------------------------------------------------------

    def source_path(self):
        if self.cfg.input.get("csv"):
            return Path(self.cfg.input["csv"])
        return self.rd.dataset

    def source(self):
        if self._source is None:
            path = self.source_path()
            if self.cfg.input.get("csv"):
                if not path.exists():
                    raise FileNotFoundError(f"input CSV not found: {path}")
            else:
                require(path, "synth")
            self._source = load_csv(path, self.schema)
        return self._source

    def load(self, path, producer):
        return load_csv(require(path, producer), self.schema)

    def scope_data(self, exp):
        if self.cfg.attribution_scope == "test":
            return self.load(self.rd.test_csv(exp), "split")
        return self.source()

    def model(self, exp):
        return gbdt.TreeEnsemble.from_json(require(self.rd.model(exp), "train"))

    # stages -----------------------------------------------------------------------

    def synth(self):
        if self.cfg.input.get("csv"):
            log.info("input is a CSV file; nothing to generate")
            return
        spec_dict = dict(self.cfg.input["generator"])
        spec_dict.setdefault("seed", self.cfg.stage_seed("synth"))
        spec = synth.GeneratorSpec.from_dict(spec_dict)
        ds = synth.generate(spec, self.schema)
        write_csv(ds, self.rd.dataset)
        spec.to_json(self.rd.generator_spec)
        self.manifest.add(self.rd.dataset)
        self.manifest.add(self.rd.generator_spec)

    def split(self, exp):
        ds = self.source()
        train, test = stratified_split(ds, exp, self.cfg.split_spec(self.cfg.stage_seed("split", exp)))
        write_csv(train, self.rd.train_csv(exp))
        write_csv(test, self.rd.test_csv(exp))
        info = self.manifest.experiment(exp)
        info["n_train"], info["n_test"] = len(train), len(test)
        self.manifest.add(self.rd.train_csv(exp), exp)
        self.manifest.add(self.rd.test_csv(exp), exp)

    def tune(self, exp):
        train = self.load(self.rd.train_csv(exp), "split")
        spec = self.cfg.split_spec(self.cfg.stage_seed("tune", exp))
        result = gbdt.grid_search(train, exp, self.cfg.hyperparams_grid(), spec, refit=False)
        doc = {
            "experiment": exp,
            "best": result.best.to_dict(),
            "cv": [{"hyperparams": r.hyperparams.to_dict(), "mean_f1": r.mean_f1, "error": r.error}
                   for r in result.cv_table],
        }
        self.rd.tune(exp).write_text(json.dumps(doc, indent=2) + "\n")
        rows = [(*r.hyperparams.to_dict().values(), "" if r.mean_f1 is None else float(r.mean_f1),
                 r.error or "") for r in result.cv_table]
        analysis._write_csv(self.rd.table(f"cv_{exp}"), [*Hyperparams().to_dict(), "mean_f1", "error"], rows)
        self.manifest.experiment(exp)["hyperparams"] = result.best.to_dict()
        self.manifest.add(self.rd.tune(exp), exp)
        self.manifest.add(self.rd.table(f"cv_{exp}"), exp)

    def train(self, exp):
        tuned = json.loads(require(self.rd.tune(exp), "tune").read_text())
        hp = Hyperparams.from_dict(tuned["best"])
        train = self.load(self.rd.train_csv(exp), "split")
        test = self.load(self.rd.test_csv(exp), "split")
        model = gbdt.train(train, exp, hp)
        model.to_json(self.rd.model(exp))
        metrics = {
            "experiment": exp,
            "class_balance": class_balance(self.source(), exp),
            "train": gbdt.evaluate(model, train, exp).to_dict(),
            "test": gbdt.evaluate(model, test, exp).to_dict(),
        }
        self.rd.metrics(exp).write_text(json.dumps(metrics, indent=2) + "\n")
        info = self.manifest.experiment(exp)
        info["hyperparams"] = hp.to_dict()
        info["metrics"] = {"train": metrics["train"], "test": metrics["test"]}
        self.manifest.add(self.rd.model(exp), exp)
        self.manifest.add(self.rd.metrics(exp), exp)

    def explain(self, exp):
        model = self.model(exp)
        data = self.scope_data(exp)
        sv = treeshap.shap_values(model, data, self.cfg.threads)
        err = sv.local_accuracy_error(model.predict_margin(data.X))
        sv.save(self.rd.shap(exp))
        self.manifest.experiment(exp)["local_accuracy_max_rel_error"] = err
        for suffix in (".json", ".values.npy", ".ids.npy"):
            self.manifest.add(self.rd.root / "attributions" / f"shap_{exp}{suffix}", exp)

    def interactions(self, exp):
        model = self.model(exp)
        data = self.scope_data(exp)
        k = min(self.cfg.interaction_subsample, len(data))
        if k < self.cfg.interaction_subsample:
            log.warning("%s: interaction subsample clamped to %d rows", exp, k)
        sub = weighted_subsample(data, k, self.cfg.stage_seed("interactions", exp))
        tensor = treeshap.interaction_values(model, sub, self.cfg.threads)
        tensor.save(self.rd.interactions(exp))
        for suffix in (".json", ".values.npy", ".ids.npy"):
            self.manifest.add(self.rd.root / "attributions" / f"interactions_{exp}{suffix}", exp)

    def analyze(self, exp):
        rd, cfg = self.rd, self.cfg
        focus, cohort = cfg.focus_feature, cfg.cohort_feature
        data = self.scope_data(exp)
        require(rd.root / "attributions" / f"shap_{exp}.json", "explain")
        require(rd.root / "attributions" / f"interactions_{exp}.json", "interactions")
        sv = treeshap.ShapMatrix.load(rd.shap(exp))
        tensor = treeshap.InteractionTensor.load(rd.interactions(exp))
        written = []

        def table(name, obj, *args):
            path = rd.table(name)
            if hasattr(obj, "to_csv"):
                obj.to_csv(path)
            else:  # writer(rows, path, *extra)
                obj(args[0], path, *args[1:])
            written.append(path)

        def chart(name, text):
            svg.write(rd.chart(name), text)
            written.append(rd.chart(name))

        ranking = analysis.global_importance(sv)
        table(f"importance_{exp}", ranking)
        chart(f"importance_{exp}", svg.bar(ranking.features(), [v for _, v in ranking.rows],
                                           title=f"{exp}: mean |SHAP|", xlabel="mean |SHAP| (log-odds)"))

        curve = analysis.cohort_curve(sv, data, focus, cohort)
        table(f"cohort_curve_{exp}", curve)
        chart(f"cohort_curve_{exp}", svg.line_band(
            curve.values, curve.means, [p.ci_low for p in curve.points], [p.ci_high for p in curve.points],
            title=f"{exp}: mean |SHAP| of {focus} by {cohort} (99% CI)", xlabel=cohort, ylabel="mean |SHAP|"))

        extracts = {
            f"dependence_{focus}_{exp}": analysis.dependence_extract(sv, data, focus, cohort),
            f"dependence_wealth_index_{exp}": analysis.dependence_extract(sv, data, "wealth_index", cohort)
            if "wealth_index" in self.schema.names else None,
            f"main_effect_{focus}_{exp}": analysis.main_effect_extract(tensor, data, focus, cohort),
            f"interaction_{focus}_{cohort}_{exp}": analysis.interaction_pair_extract(tensor, data, focus, cohort, "a"),
            f"interaction_{cohort}_{focus}_{exp}": analysis.interaction_pair_extract(tensor, data, focus, cohort, "b"),
        }
        for name, ex in extracts.items():
            if ex is None:
                continue
            table(name, ex)
            chart(name, svg.scatter(ex.x, ex.attribution, ex.color, title=name, xlabel=ex.x_feature,
                                    ylabel="attribution (log-odds)", color_label=ex.color_feature))

        heat = analysis.interaction_heatmap(tensor)
        table(f"heatmap_{exp}", heat)
        chart(f"heatmap_{exp}", svg.heatmap(heat.feature_names, heat.values,
                                            title=f"{exp}: mean |SHAP interaction|"))

        if "state" in self.schema.names:
            rows = analysis.group_mean_importance(sv, data, focus, "state")
            table(f"state_importance_{exp}", analysis.write_group_csv, rows)
            chart(f"state_importance_{exp}", svg.bar([f"state {r.group}" for r in rows], [r.mean_abs for r in rows],
                                                     title=f"{exp}: mean |SHAP| of {focus} by state"))

        if cfg.bootstrap:
            table(f"robustness_{exp}", analysis.write_comparison_csv, *self._robustness(exp, data, curve))

        for path in written:
            self.manifest.add(path, exp)

    def _robustness(self, exp, data, curve):
        """Cohort curves from bootstrap-trained models, compared pairwise."""
        boot = self.cfg.bootstrap
        hp = Hyperparams.from_dict(json.loads(require(self.rd.tune(exp), "tune").read_text())["best"])
        train = self.load(self.rd.train_csv(exp), "split")
        test = self.load(self.rd.test_csv(exp), "split")
        model = self.model(exp)
        curves = [curve]
        labels = ["model"]
        test_sv = treeshap.shap_values(model, test, self.cfg.threads)
        curves.append(analysis.cohort_curve(test_sv, test, self.cfg.focus_feature, self.cfg.cohort_feature))
        labels.append("test_only")
        subsets = bootstrap_subsets(train, boot["count"], boot["fraction"], self.cfg.stage_seed("bootstrap", exp))
        for i, sub in enumerate(subsets):
            m = gbdt.train(sub, exp, hp)
            sv = treeshap.shap_values(m, data, self.cfg.threads)
            curves.append(analysis.cohort_curve(sv, data, self.cfg.focus_feature, self.cfg.cohort_feature))
            labels.append(f"boot{i}")
        return analysis.robustness_compare(curves), labels

    def global_tables(self):
        """Tables spanning all experiments: metrics (Table-3 layout) and feature rank correlations."""
        rows = []
        for exp in self.cfg.experiments:
            m = json.loads(require(self.rd.metrics(exp), "train").read_text())
            rows.append((exp, m["class_balance"], m["train"]["accuracy"], m["train"]["f1"],
                         m["test"]["accuracy"], m["test"]["f1"]))
        analysis._write_csv(self.rd.table("metrics"),
                            ["experiment", "class_balance", "train_accuracy", "train_f1", "test_accuracy", "test_f1"],
                            rows)
        self.manifest.add(self.rd.table("metrics"))
        corr = analysis.spearman_matrix(self.source())
        corr.to_csv(self.rd.table("spearman"))
        svg.write(self.rd.chart("spearman"), svg.heatmap(corr.feature_names, corr.values,
                                                         title="Spearman rank correlation of features"))
        self.manifest.add(self.rd.table("spearman"))
        self.manifest.add(self.rd.chart("spearman"))

    def report(self):
        rd, cfg = self.rd, self.cfg
        lines = ["# workshap run report", ""]
        lines += [f"- tool version: {__version__}", f"- seed: {cfg.seed}",
                  f"- experiments: {', '.join(cfg.experiments)}",
                  f"- attribution scope: {cfg.attribution_scope}",
                  f"- interaction subsample: {cfg.interaction_subsample}",
                  f"- hyperparameter grid: {len(cfg.grid)} points, {cfg.split.get('folds', 5)}-fold CV on F1", ""]
        metrics_csv = require(rd.table("metrics"), "analyze")
        lines += ["## Model performance", ""]
        lines += _markdown_table(metrics_csv)
        for exp in cfg.experiments:
            info = self.manifest.experiment(exp)
            lines += ["", f"## Experiment: {exp}", ""]
            if "hyperparams" in info:
                hp = ", ".join(f"{k}={v}" for k, v in info["hyperparams"].items())
                lines += [f"Chosen hyperparameters: {hp}", ""]
            imp = require(rd.table(f"importance_{exp}"), "analyze")
            lines += ["### Global importance", ""] + _markdown_table(imp, limit=16)
            for name in sorted(p.stem for p in rd.root.joinpath("charts").glob(f"*_{exp}.svg")):
                lines += ["", f"### {name}", "", _embed(rd.chart(name)),
                          "", f"Data: `tables/{name}.csv`"]
            rob = rd.table(f"robustness_{exp}")
            if rob.exists():
                lines += ["", "### Robustness", ""] + _markdown_table(rob)
        if rd.chart("spearman").exists():
            lines += ["", "## Feature rank correlations", "", _embed(rd.chart("spearman"))]
        rd.report.write_text("\n".join(lines) + "\n")
        self.manifest.add(rd.report)
        self._report_json()

    def _report_json(self):
        """The report's numbers in machine-readable form."""
        rd = self.rd
        doc = {"tool": "workshap", "version": __version__, "seed": self.cfg.seed,
               "metrics": _read_table(rd.table("metrics")), "experiments": {}}
        for exp in self.cfg.experiments:
            info = self.manifest.experiment(exp)
            entry = {"hyperparams": info.get("hyperparams")}
            for key in ("importance", "cohort_curve", "robustness"):
                path = rd.table(f"{key}_{exp}")
                if path.exists():
                    entry[key] = _read_table(path)
            doc["experiments"][exp] = entry
        rd.report_json.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        self.manifest.add(rd.report_json)


def _parse(v):
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def _read_table(csv_path):
    with open(require(csv_path, "analyze"), newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def _markdown_table(csv_path, limit=None):
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    if limit:
        body = body[:limit]

    def cell(v):
        try:
            f = float(v)
        except ValueError:
            return v
        return v if v.lstrip("-").isdigit() else f"{f:.4f}"

    out = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    out += ["| " + " | ".join(cell(v) for v in r) + " |" for r in body]
    return out


def _embed(svg_path):
    data = base64.b64encode(Path(svg_path).read_bytes()).decode("ascii")
    return f"![{Path(svg_path).stem}](data:image/svg+xml;base64,{data})"


# -- orchestration ----------------------------------------------------------------------

_PER_EXPERIMENT = ("split", "tune", "train", "explain", "interactions", "analyze")


def run_stage(pipe, stage, experiments=None):
    """Run one stage (for every configured experiment where applicable)."""
    experiments = list(experiments or pipe.cfg.experiments)
    t0 = time.perf_counter()
    try:
        if stage in _PER_EXPERIMENT:
            for exp in experiments:
                t1 = time.perf_counter()
                getattr(pipe, stage)(exp)
                pipe.manifest.experiment(exp)["timings"][stage] = round(time.perf_counter() - t1, 3)
            if stage == "analyze":
                pipe.global_tables()
        else:
            getattr(pipe, stage)()
    except Exception as exc:
        pipe.manifest.stage(stage, "failed", time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")
        pipe.manifest.save()
        raise PipelineError(f"stage '{stage}' failed: {exc}", stage) from exc
    pipe.manifest.stage(stage, "ok", time.perf_counter() - t0)
    pipe.manifest.save()


def run(cfg, out_dir=None):
    """Every stage in order; returns the manifest dictionary."""
    pipe = Pipeline(cfg, out_dir)
    for stage in STAGES:
        run_stage(pipe, stage)
    pipe.manifest.data["status"] = "ok"
    pipe.manifest.save()
    return pipe.manifest.data

