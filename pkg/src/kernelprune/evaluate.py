"""Score subsets and classifiers on held-out rows.

Everything is a geometric-mean fraction of optimal: per row, a chosen
config's raw Gflops/s over the best raw Gflops/s across all benchmarked
configs. The denominator always spans every column, pruned or not, and
ratios always use raw values, never normalized ones, so they stay positive
and the geometric mean is defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classify import label_best_in_subset, problem_features, train_classifier
from .dataset import PerfMatrix
from .errors import ContractError
from .normalize import NormScheme, normalize
from .selection import ConfigSubset, select_subset

EVAL_CSV_HEADER = "method,k,scheme,classifier,ceiling,achieved"
PER_ROW_CSV_HEADER = "method,k,classifier,m,k_dim,n,batch,chosen_config,ratio"

ORACLE_SPEC = "oracle"


@dataclass(frozen=True)
class EvalReport:
    """One grid cell's outcome. per_row holds (problem, chosen global
    config index, fraction of optimal) for attribution."""

    method: str
    k: int
    scheme: str
    classifier: str
    ceiling: float
    achieved: float
    per_row: tuple

    def __post_init__(self):
        if not 0.0 < self.achieved <= self.ceiling <= 1.0:
            raise ContractError(
                f"achieved={self.achieved} ceiling={self.ceiling} out of order")


def _geomean(ratios: np.ndarray) -> float:
    return float(np.exp(np.log(ratios).mean()))


def subset_ceiling(test: PerfMatrix, subset: ConfigSubset) -> float:
    """Best attainable fraction of optimal when restricted to the subset."""
    vals = test.values
    ratios = vals[:, list(subset.config_indices)].max(axis=1) / vals.max(axis=1)
    return _geomean(ratios)


def oracle_predictor(test: PerfMatrix, subset: ConfigSubset):
    """Predictor that always names the best subset column, judged on raw
    test values. Used to pin achieved == ceiling in reports."""
    best = np.argmax(test.values[:, list(subset.config_indices)], axis=1)
    table = {tuple(row): int(b)
             for row, b in zip(problem_features(test.problems), best)}

    def predict(x):
        return table[tuple(np.asarray(x, dtype=np.float64))]

    return predict


def classifier_score(test: PerfMatrix, subset: ConfigSubset, predict,
                     method: str | None = None, k: int | None = None,
                     scheme: str = "", classifier: str = "") -> EvalReport:
    """Score one predictor over the test rows.

    predict maps a log2 feature vector to a subset-local class; anything
    out of range is a contract violation, not a scoring miss.
    """
    cols = list(subset.config_indices)
    vals = test.values
    row_max = vals.max(axis=1)
    feats = problem_features(test.problems)
    chosen = np.empty(test.n_problems, dtype=np.int64)
    for i in range(test.n_problems):
        c = int(predict(feats[i]))
        if not 0 <= c < subset.k_actual:
            raise ContractError(
                f"predictor returned class {c} for a subset of {subset.k_actual}")
        chosen[i] = cols[c]
    ratios = vals[np.arange(test.n_problems), chosen] / row_max
    per_row = tuple((test.problems[i], int(chosen[i]), float(ratios[i]))
                    for i in range(test.n_problems))
    return EvalReport(
        method=subset.method if method is None else method,
        k=subset.k_requested if k is None else k,
        scheme=scheme,
        classifier=classifier,
        ceiling=subset_ceiling(test, subset),
        achieved=_geomean(ratios),
        per_row=per_row,
    )


def grid_report(train: PerfMatrix, test: PerfMatrix, methods, k_values,
                scheme: NormScheme, classifier_specs, seed: int = 0) -> list[EvalReport]:
    """Full selection-method x k x classifier sweep for one scheme.

    Selection and training see only train rows; scoring sees only test
    rows. The classifier id "oracle" short-circuits training and replays
    the best-in-subset choice. Report order is grid order.
    """
    if not methods or not k_values or not classifier_specs:
        raise ValueError("empty grid")
    nm = normalize(train, scheme)
    feats = problem_features(train.problems)
    reports = []
    for method in methods:
        for k in k_values:
            subset = select_subset(method, nm, k, seed, problems=train.problems)
            labels = label_best_in_subset(nm, subset)
            for spec in classifier_specs:
                if spec == ORACLE_SPEC:
                    predict = oracle_predictor(test, subset)
                else:
                    predict = train_classifier(spec, feats, labels,
                                               subset.k_actual, seed)
                reports.append(classifier_score(test, subset, predict,
                                                method=method, k=k,
                                                scheme=scheme.kind,
                                                classifier=spec))
    return reports


def eval_report_csv(reports) -> str:
    lines = [EVAL_CSV_HEADER]
    lines += [f"{r.method},{r.k},{r.scheme},{r.classifier},"
              f"{r.ceiling:.6f},{r.achieved:.6f}" for r in reports]
    return "\n".join(lines) + "\n"


def per_row_csv(reports) -> str:
    lines = [PER_ROW_CSV_HEADER]
    for r in reports:
        for problem, config_idx, ratio in r.per_row:
            lines.append(f"{r.method},{r.k},{r.classifier},{problem.m},"
                         f"{problem.k},{problem.n},{problem.batch},"
                         f"{config_idx},{ratio:.6f}")
    return "\n".join(lines) + "\n"
