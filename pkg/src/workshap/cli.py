"""Command-line entry point: ``workshap <stage> [options]``.

Each stage reads the run configuration (``--config``, with flags taking
precedence) and works inside the run directory given by ``--out``.
``run`` executes all stages in order.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import PipelineError, WorkshapError
from .pipeline import STAGES, Pipeline, RunConfig, config_schema_json, run, run_stage

_GENERATOR_KEYS = {"n", "marginals", "caste_probs", "coefficients", "weight_model", "target_balance"}


def _common(p):
    p.add_argument("--config", help="run configuration JSON (a run manifest also works)")
    p.add_argument("--experiment", action="append", choices=("work", "blue", "white"),
                   help="restrict to this experiment (repeatable)")
    p.add_argument("--input", help="input survey CSV (replaces the configured input)")
    p.add_argument("--out", help="run directory")
    p.add_argument("--seed", type=int, help="master seed (required unless set in the config)")
    p.add_argument("--scope", choices=("full", "test"), help="rows to attribute")
    p.add_argument("--subsample", type=int, help="rows drawn for interaction values")
    p.add_argument("--threads", type=int, help="worker threads for attribution")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="workshap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"workshap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "generate a synthetic survey CSV",
        "split": "stratified weighted train/test split",
        "tune": "cross-validated grid search",
        "train": "train and evaluate the chosen model",
        "explain": "SHAP values",
        "interactions": "SHAP interaction values on a weighted subsample",
        "analyze": "tables and charts",
        "report": "Markdown report with embedded charts",
        "run": "all stages in order",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "synth":
            p.add_argument("--n", type=int, help="number of synthetic rows")
    sub.add_parser("config-schema", help="print the JSON schema of run configurations")
    return parser


def load_config(args):
    d = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise PipelineError(f"config file not found: {path}", "config")
        d = json.loads(path.read_text())
        if "config" in d and "tool" in d:  # a run manifest
            d = d["config"]
        elif _GENERATOR_KEYS & set(d) and "input" not in d:  # a bare generator spec
            d = {"input": {"generator": d}, **({"seed": d["seed"]} if "seed" in d else {})}
    if args.seed is not None:
        d["seed"] = args.seed
    if args.input:
        schema = d.get("input", {}).get("schema")
        d["input"] = {"csv": args.input, **({"schema": schema} if schema else {})}
    if getattr(args, "n", None) is not None:
        gen = d.setdefault("input", {"generator": {}}).setdefault("generator", {})
        gen["n"] = args.n
    if args.experiment:
        d["experiments"] = list(dict.fromkeys(args.experiment))
    if args.out:
        d["output_dir"] = args.out
    if args.scope:
        d["attribution_scope"] = args.scope
    if args.subsample is not None:
        d["interaction_subsample"] = args.subsample
    if args.threads is not None:
        d["threads"] = args.threads
    return RunConfig.from_dict(d)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "config-schema":
        sys.stdout.write(config_schema_json())
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except (WorkshapError, ValueError) as exc:
        print(f"workshap: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "run":
            manifest = run(cfg)
            print(f"run complete: {len(manifest['artifacts'])} shared artifacts, manifest at "
                  f"{Path(cfg.output_dir) / 'manifest.json'}")
        else:
            assert args.command in STAGES
            pipe = Pipeline(cfg)
            run_stage(pipe, args.command)
    except PipelineError as exc:
        print(f"workshap: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
