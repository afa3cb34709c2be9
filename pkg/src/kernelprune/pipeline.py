"""End-to-end orchestration: benchmark data in, reports and selectors out.

A run is driven by a PipelineConfig and leaves behind everything needed to
reproduce or resume it: the resolved config (defaults included), the train
and test splits, variance reports per scheme, chosen subsets, evaluation
CSVs, and for each scheme the best-scoring tree selector as a portable
model document plus emitted source.

All files are written atomically (temp then rename) and every byte is a
pure function of config plus inputs, so identical runs produce identical
trees of output files. On failure a FAILED marker names the stage.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from .classify import (CLASSIFIER_SPECS, TREE_PRESETS, label_best_in_subset,
                       problem_features, train_classifier, train_tree)
from .codegen import emit_nested_if, export_model
from .dataset import (PerfMatrix, SplitSpec, SynthModel, enumerate_configs,
                      parse_benchmark_csv, serialize_benchmark_csv, split,
                      synth_generate, synth_problems)
from .errors import PipelineStageError
from .evaluate import (ORACLE_SPEC, classifier_score, eval_report_csv,
                       oracle_predictor, per_row_csv)
from .normalize import SCHEME_KINDS, NormScheme, normalize
from .pca import fit_pca, variance_report
from .selection import METHODS, select_subset

DEFAULT_K_VALUES = tuple(range(4, 16))

_TREE_SPECS = ("treeA", "treeB", "treeC")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs; defaults mirror the full experiment grid."""

    input: str | None = None  # benchmark CSV; None generates synthetic data
    output_dir: str = "out"
    schemes: tuple = SCHEME_KINDS
    methods: tuple = METHODS
    k_values: tuple = DEFAULT_K_VALUES
    classifiers: tuple = CLASSIFIER_SPECS
    test_fraction: float = 0.2
    seed: int = 0
    jobs: int = 1
    synth_problems: int = 40
    synth_noise: float = 0.05

    def __post_init__(self):
        for name in ("schemes", "methods", "k_values", "classifiers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.schemes or not self.methods or not self.k_values \
                or not self.classifiers:
            raise ValueError("schemes, methods, k_values, classifiers must be non-empty")
        for s in self.schemes:
            if s not in SCHEME_KINDS:
                raise ValueError(f"unknown scheme {s!r}")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        for c in self.classifiers:
            if c not in CLASSIFIER_SPECS and c != ORACLE_SPEC:
                raise ValueError(f"unknown classifier {c!r}")
        if any(k < 1 for k in self.k_values):
            raise ValueError("k values must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.synth_problems < 4:
            raise ValueError("synth_problems must be >= 4")


def _write_text(path: Path, text: str) -> None:
    tmp = path.parent / (path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def variance_csv(train: PerfMatrix, scheme: NormScheme) -> str:
    """Cumulative explained-variance table, scheme recorded in the header."""
    model = fit_pca(normalize(train, scheme))
    rep = variance_report(model)
    lines = [f"# scheme={scheme.kind}", "component,explained,cumulative"]
    lines += [f"{i},{e:.6f},{c:.6f}"
              for i, (e, c) in enumerate(zip(model.explained_ratio,
                                             rep.cumulative), start=1)]
    return "\n".join(lines) + "\n"


def subsets_csv(cells) -> str:
    """cells: iterable of (method, k, ConfigSubset)."""
    lines = ["method,k_requested,k_actual,config_indices"]
    for method, _, subset in cells:
        joined = ";".join(str(c) for c in subset.config_indices)
        lines.append(f"{method},{subset.k_requested},{subset.k_actual},{joined}")
    return "\n".join(lines) + "\n"


def _run_cell(train, test, scheme_kind, method, k, classifiers, seed):
    """One (scheme, method, k) cell: select, then score every classifier."""
    scheme = NormScheme(kind=scheme_kind)
    nm = normalize(train, scheme)
    subset = select_subset(method, nm, k, seed, problems=train.problems)
    labels = label_best_in_subset(nm, subset)
    feats = problem_features(train.problems)
    reports = []
    for spec in classifiers:
        if spec == ORACLE_SPEC:
            predict = oracle_predictor(test, subset)
        else:
            predict = train_classifier(spec, feats, labels, subset.k_actual, seed)
        reports.append(classifier_score(test, subset, predict, method=method,
                                        k=k, scheme=scheme_kind, classifier=spec))
    return subset, reports


def _cell_worker(args):
    return _run_cell(*args)


def run_pipeline(cfg: PipelineConfig) -> list[Path]:
    """Execute every stage; returns the files written, in write order."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "FAILED"
    if marker.exists():
        marker.unlink()
    written: list[Path] = []

    def emit(name: str, text: str) -> None:
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        _write_text(path, text)
        written.append(path)

    stage = "config"
    try:
        emit("resolved_config.json",
             json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n")

        if cfg.input is None:
            stage = "synth"
            problems = synth_problems(cfg.synth_problems, cfg.seed)
            pm = synth_generate(SynthModel(noise_sigma=cfg.synth_noise,
                                           seed=cfg.seed),
                                problems, enumerate_configs())
            emit("dataset.csv", serialize_benchmark_csv(pm))
        else:
            stage = "ingest"
            pm = parse_benchmark_csv(Path(cfg.input).read_text(encoding="utf-8"))

        stage = "split"
        train, test = split(pm, SplitSpec(test_fraction=cfg.test_fraction,
                                          seed=cfg.seed))
        emit("train.csv", serialize_benchmark_csv(train))
        emit("test.csv", serialize_benchmark_csv(test))

        stage = "pca-report"
        for kind in cfg.schemes:
            emit(f"variance_{kind}.csv", variance_csv(train, NormScheme(kind=kind)))

        stage = "evaluate"
        cell_args = [(train, test, kind, method, k, cfg.classifiers, cfg.seed)
                     for kind in cfg.schemes
                     for method in cfg.methods
                     for k in cfg.k_values]
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                results = list(pool.map(_cell_worker, cell_args))
        else:
            results = [_run_cell(*args) for args in cell_args]

        all_reports = []
        cells_by_scheme = {kind: [] for kind in cfg.schemes}
        reports_by_scheme = {kind: [] for kind in cfg.schemes}
        subset_by_cell = {}
        for (_, _, kind, method, k, _, _), (subset, reports) in zip(cell_args, results):
            cells_by_scheme[kind].append((method, k, subset))
            reports_by_scheme[kind].extend(reports)
            subset_by_cell[(kind, method, k)] = subset
            all_reports.extend(reports)
        for kind in cfg.schemes:
            emit(f"subsets_{kind}.csv", subsets_csv(cells_by_scheme[kind]))
            emit(f"per_row_{kind}.csv", per_row_csv(reports_by_scheme[kind]))
        emit("eval_report.csv", eval_report_csv(all_reports))

        stage = "codegen"
        wanted = [s for s in cfg.classifiers if s in _TREE_SPECS]
        if wanted:
            feats = problem_features(train.problems)
            for kind in cfg.schemes:
                # Best tree-classifier cell per scheme; first in grid order wins ties.
                best = None
                for r in reports_by_scheme[kind]:
                    if r.classifier in wanted and (best is None
                                                   or r.achieved > best.achieved):
                        best = r
                subset = subset_by_cell[(kind, best.method, best.k)]
                labels = label_best_in_subset(
                    normalize(train, NormScheme(kind=kind)), subset)
                tree = train_tree(feats, labels, TREE_PRESETS[best.classifier[-1]],
                                  cfg.seed, n_classes=subset.k_actual)
                stem = f"{kind}_{best.method}_k{best.k}_{best.classifier}"
                emit(f"models/{stem}.kptree", export_model(tree, subset, pm.configs))
                emit(f"selectors/{stem}.inc", emit_nested_if(tree, subset, pm.configs))
    except Exception as exc:
        _write_text(marker, f"stage '{stage}' failed: {exc}\n")
        raise PipelineStageError(stage, exc) from exc
    return written
