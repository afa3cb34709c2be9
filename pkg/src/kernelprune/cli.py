"""Command-line interface.

Subcommands map one-to-one onto pipeline stages (ingest, synth, pca-report,
select, train, evaluate, codegen) plus `run` for the whole experiment grid.
Single-stage commands read and write the same CSV formats the pipeline
emits, so a full run can be replayed or extended piecewise.

Exit codes: 0 success, 1 usage, 2 bad data or environment, 3 internal.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

from .classify import (CLASSIFIER_SPECS, TREE_PRESETS, label_best_in_subset,
                       problem_features, train_classifier, train_tree)
from .codegen import emit_nested_if, export_model, import_model
from .dataset import (SplitSpec, SynthModel, enumerate_configs,
                      parse_benchmark_csv, serialize_benchmark_csv, split,
                      synth_generate, synth_problems)
from .errors import DataError, PipelineStageError
from .evaluate import (ORACLE_SPEC, classifier_score, eval_report_csv,
                       oracle_predictor)
from .normalize import SCHEME_KINDS, NormScheme, normalize
from .pipeline import PipelineConfig, run_pipeline, subsets_csv, variance_csv
from .selection import METHODS, select_subset

SEED_ENV = "KP_SEED"
TREE_SPECS = ("treeA", "treeB", "treeC")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this project reserves 2 for
    data problems, so usage failures are remapped to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _resolve_seed(flag_value, file_value=None) -> int:
    if flag_value is not None:
        return flag_value
    if file_value is not None:
        return int(file_value)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}")
    return 0


def _load_matrix(path: str):
    return parse_benchmark_csv(Path(path).read_text(encoding="utf-8"))


def _write_or_print(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.parent / (target.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, target)


def _list_type(valid, what):
    def parse(text: str):
        items = tuple(s.strip() for s in text.split(",") if s.strip())
        if not items:
            raise argparse.ArgumentTypeError(f"empty {what} list")
        for item in items:
            if item not in valid:
                raise argparse.ArgumentTypeError(f"unknown {what} {item!r}")
        return items
    return parse


def _int_list(text: str):
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def cmd_ingest(args) -> int:
    pm = _load_matrix(args.input)
    print(f"problems={pm.n_problems} configs={pm.n_configs}")
    return 0


def cmd_synth(args) -> int:
    seed = _resolve_seed(args.seed)
    problems = synth_problems(args.problems, seed)
    pm = synth_generate(SynthModel(noise_sigma=args.noise, seed=seed),
                        problems, enumerate_configs())
    _write_or_print(serialize_benchmark_csv(pm), args.output)
    if args.output:
        print(f"wrote {args.output}: {pm.n_problems} problems x {pm.n_configs} configs")
    return 0


def cmd_pca_report(args) -> int:
    pm = _load_matrix(args.input)
    _write_or_print(variance_csv(pm, NormScheme(kind=args.scheme)), args.output)
    return 0


def cmd_select(args) -> int:
    seed = _resolve_seed(args.seed)
    pm = _load_matrix(args.input)
    nm = normalize(pm, NormScheme(kind=args.scheme))
    subset = select_subset(args.method, nm, args.k, seed, problems=pm.problems)
    _write_or_print(subsets_csv([(args.method, args.k, subset)]), args.output)
    return 0


def cmd_train(args) -> int:
    seed = _resolve_seed(args.seed)
    pm = _load_matrix(args.input)
    nm = normalize(pm, NormScheme(kind=args.scheme))
    subset = select_subset(args.method, nm, args.k, seed, problems=pm.problems)
    labels = label_best_in_subset(nm, subset)
    feats = problem_features(pm.problems)
    predict = train_classifier(args.classifier, feats, labels, subset.k_actual, seed)
    hits = sum(1 for i in range(len(labels)) if predict(feats[i]) == labels[i])
    print(f"classifier={args.classifier} classes={subset.k_actual} "
          f"train_accuracy={hits / len(labels):.6f}")
    if args.model_out:
        if args.classifier not in TREE_SPECS:
            raise ValueError("--model-out requires a tree classifier (treeA/B/C)")
        tree = train_tree(feats, labels, TREE_PRESETS[args.classifier[-1]],
                          seed, n_classes=subset.k_actual)
        _write_or_print(export_model(tree, subset, pm.configs), args.model_out)
    return 0


def cmd_evaluate(args) -> int:
    seed = _resolve_seed(args.seed)
    if args.input and (args.train or args.test):
        raise ValueError("pass either --input or --train/--test, not both")
    if args.train and args.test:
        train, test = _load_matrix(args.train), _load_matrix(args.test)
    elif args.input:
        pm = _load_matrix(args.input)
        train, test = split(pm, SplitSpec(test_fraction=args.test_fraction,
                                          seed=seed))
    elif args.train or args.test:
        raise ValueError("--train and --test must be given together")
    else:
        raise ValueError("need either --train and --test, or --input")
    nm = normalize(train, NormScheme(kind=args.scheme))
    subset = select_subset(args.method, nm, args.k, seed, problems=train.problems)
    if args.classifier == ORACLE_SPEC:
        predict = oracle_predictor(test, subset)
    else:
        labels = label_best_in_subset(nm, subset)
        predict = train_classifier(args.classifier, problem_features(train.problems),
                                   labels, subset.k_actual, seed)
    report = classifier_score(test, subset, predict, method=args.method,
                              k=args.k, scheme=args.scheme,
                              classifier=args.classifier)
    _write_or_print(eval_report_csv([report]), args.output)
    return 0


def cmd_codegen(args) -> int:
    tree, subset, configs = import_model(Path(args.model).read_text(encoding="utf-8"))
    _write_or_print(emit_nested_if(tree, subset, configs), args.output)
    return 0


def cmd_run(args) -> int:
    file_cfg = {}
    if args.config:
        file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(file_cfg, dict):
            raise ValueError("config file must hold a JSON object")
        known = {f.name for f in fields(PipelineConfig)}
        for key in file_cfg:
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
    merged = dict(file_cfg)
    overrides = {
        "input": args.input,
        "output_dir": args.output_dir,
        "schemes": args.scheme,
        "methods": args.method,
        "k_values": args.k,
        "classifiers": args.classifier,
        "test_fraction": args.test_fraction,
        "jobs": args.jobs,
        "synth_problems": args.problems,
        "synth_noise": args.noise,
    }
    merged.update({k: v for k, v in overrides.items() if v is not None})
    merged["seed"] = _resolve_seed(args.seed, file_cfg.get("seed"))
    cfg = PipelineConfig(**merged)
    written = run_pipeline(cfg)
    print(f"wrote {len(written)} files under {cfg.output_dir}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="kernelprune",
                     description="Prune benchmarked kernel configs and train "
                                 "runtime selectors.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def common_seed(p):
        p.add_argument("--seed", type=int, default=None,
                       help=f"RNG seed (default: ${SEED_ENV} or 0)")

    p = sub.add_parser("ingest", help="validate a benchmark CSV and summarize it")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic benchmark CSV")
    p.add_argument("--output", default=None)
    p.add_argument("--problems", type=int, default=40)
    p.add_argument("--noise", type=float, default=0.05)
    common_seed(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pca-report", help="explained-variance table for a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--scheme", choices=SCHEME_KINDS, default="scaled")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_pca_report)

    p = sub.add_parser("select", help="pick a config subset from training data")
    p.add_argument("--input", required=True)
    p.add_argument("--scheme", choices=SCHEME_KINDS, default="scaled")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--output", default=None)
    common_seed(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train one classifier over a training CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--scheme", choices=SCHEME_KINDS, default="scaled")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--classifier", choices=CLASSIFIER_SPECS, required=True)
    p.add_argument("--model-out", default=None)
    common_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score one selection/classifier cell")
    p.add_argument("--input", default=None, help="dataset CSV to split")
    p.add_argument("--train", default=None)
    p.add_argument("--test", default=None)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--scheme", choices=SCHEME_KINDS, default="scaled")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--classifier", choices=CLASSIFIER_SPECS + (ORACLE_SPEC,),
                   required=True)
    p.add_argument("--output", default=None)
    common_seed(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("codegen", help="emit nested-if source from a model doc")
    p.add_argument("--model", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_codegen)

    p = sub.add_parser("run", help="run the whole pipeline")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--input", default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--scheme", type=_list_type(SCHEME_KINDS, "scheme"),
                   default=None, help="comma-separated scheme list")
    p.add_argument("--method", type=_list_type(METHODS, "method"),
                   default=None, help="comma-separated method list")
    p.add_argument("--k", type=_int_list, default=None,
                   help="comma-separated k list")
    p.add_argument("--classifier",
                   type=_list_type(CLASSIFIER_SPECS + (ORACLE_SPEC,), "classifier"),
                   default=None, help="comma-separated classifier list")
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--problems", type=int, default=None,
                   help="synthetic problem count (no --input)")
    p.add_argument("--noise", type=float, default=None,
                   help="synthetic noise sigma (no --input)")
    common_seed(p)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        data_like = isinstance(exc.cause, (DataError, OSError, ValueError))
        return 2 if data_like else 3
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything else is a bug in this package
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
