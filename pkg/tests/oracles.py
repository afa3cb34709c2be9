"""Independent reference implementations used by the test suite.

Everything here is deliberately written with different algorithms/data
structures than the library (covariance eigendecomposition instead of SVD,
exact rational arithmetic instead of float sweeps, a text interpreter instead
of the tree walker) so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import re
from fractions import Fraction

import numpy as np

from kernelprune.dataset import KernelConfig, PerfMatrix, ProblemSize


def pca_cov_oracle(rows):
    """PCA via eigendecomposition of the sample covariance matrix.

    Returns (mean, components, explained_ratio) with components sorted by
    descending eigenvalue and sign-fixed the same way as the library: the
    entry of largest magnitude is made positive.
    """
    X = np.asarray(rows, dtype=np.float64)
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (X.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order].T.copy()
    for i in range(comps.shape[0]):
        j = np.argmax(np.abs(comps[i]))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    total = evals.sum()
    ratios = evals / total if total > 0 else np.zeros_like(evals)
    return mean, comps, ratios


def geomean_oracle(values):
    # plain product**(1/n), safe for the short vectors used in tests
    vals = [float(v) for v in values]
    prod = 1.0
    for v in vals:
        prod *= v
    return prod ** (1.0 / len(vals))


def best_split_exact(X, y, n_classes, msl, feat_ids):
    """Exhaustive split search in exact rational arithmetic.

    Returns the set of (feature, threshold) pairs attaining the maximum
    weighted-Gini decrease, plus that decrease as a Fraction. Thresholds are
    midpoints of adjacent distinct sorted values, so they are exact floats and
    comparable with ==. Empty set means no strict improvement exists.
    """
    n = len(y)
    total = [0] * n_classes
    for c in y:
        total[int(c)] += 1

    def impurity_numer(counts, size):
        # sum over classes of count*(size-count), over denominator size
        return sum(c * (size - c) for c in counts), size

    pn, pd = impurity_numer(total, n)
    parent = Fraction(pn, pd * pd)  # Gini = sum c*(size-c) / size**2
    best_dec = Fraction(0)
    winners = set()
    for f in feat_ids:
        col = [float(v) for v in X[:, f]]
        order = sorted(range(n), key=lambda i: col[i])
        left = [0] * n_classes
        right = total[:]
        for p in range(1, n):
            c = int(y[order[p - 1]])
            left[c] += 1
            right[c] -= 1
            lo, hi = col[order[p - 1]], col[order[p]]
            if lo == hi or p < msl or n - p < msl:
                continue
            ln, ld = impurity_numer(left, p)
            rn, rd = impurity_numer(right, n - p)
            weighted = (Fraction(ln, ld) + Fraction(rn, rd)) / n
            dec = parent - weighted
            if dec > best_dec:
                best_dec = dec
                winners = {(f, (lo + hi) / 2.0)}
            elif dec == best_dec and dec > 0:
                winners.add((f, (lo + hi) / 2.0))
    return winners, best_dec


# --- planted-regime dataset -------------------------------------------------

PLANTED_CONFIGS = (
    KernelConfig(1, 1, 1, 8, 8),
    KernelConfig(2, 2, 2, 8, 16),
    KernelConfig(4, 2, 4, 16, 8),
    KernelConfig(8, 4, 8, 16, 16),
)
DECOY_CONFIGS = (
    KernelConfig(1, 2, 1, 1, 64),
    KernelConfig(2, 4, 8, 8, 32),
    KernelConfig(4, 8, 2, 32, 8),
)

_TRAIN_NS = (64, 96, 128, 160, 192)
_TEST_NS = (256, 320)


def build_planted(n_regimes, train_per_regime=5, test_per_regime=2):
    """Construct train/test PerfMatrix pairs with noise-free planted regimes.

    Regime r is identified by m = 2**(4 + 2r); every row of a regime carries
    the identical gflops pattern: 100 on the regime's planted config, 40 on
    the other planted configs, and 20/25/30 on three decoy configs that are
    never optimal anywhere. Rows within a regime differ only in problem shape
    (n, batch), so the per-regime winner is unambiguous and any sane
    clustering of the row patterns recovers the regimes exactly.

    Returns (train, test, planted_cols) where planted_cols[r] is the column
    index of regime r's winning config.
    """
    if not 2 <= n_regimes <= len(PLANTED_CONFIGS):
        raise ValueError("n_regimes out of range")
    # decoys interleaved so planted columns are not a contiguous prefix
    configs = [DECOY_CONFIGS[0], PLANTED_CONFIGS[0], DECOY_CONFIGS[1]]
    configs += list(PLANTED_CONFIGS[1:n_regimes]) + [DECOY_CONFIGS[2]]
    planted_cols = [1] + [3 + i for i in range(n_regimes - 1)]
    decoy_cols = [0, 2, len(configs) - 1]
    decoy_gflops = {0: 25.0, 2: 30.0, len(configs) - 1: 20.0}

    def regime_row(r):
        row = np.full(len(configs), 40.0)
        for c, g in decoy_gflops.items():
            row[c] = g
        row[planted_cols[r]] = 100.0
        return row

    def build(ns, batches):
        problems, rows = [], []
        for r in range(n_regimes):
            m = 2 ** (4 + 2 * r)
            for n, batch in zip(ns, batches):
                problems.append(ProblemSize(m, 32, n, batch))
                rows.append(regime_row(r))
        return PerfMatrix(tuple(problems), tuple(configs), np.array(rows))

    train = build(_TRAIN_NS[:train_per_regime], (1, 2, 4, 8, 16))
    test = build(_TEST_NS[:test_per_regime], (1, 4))
    # sanity: planted column strictly dominates its regime's rows
    for r in range(n_regimes):
        for split in (train, test):
            block = split.values[[i for i, p in enumerate(split.problems)
                                 if p.m == 2 ** (4 + 2 * r)]]
            assert block.shape[0] > 0
            best = np.argmax(block, axis=1)
            assert (best == planted_cols[r]).all()
            others = np.delete(block, planted_cols[r], axis=1)
            assert (block[:, planted_cols[r]][:, None] > others).all()
    return train, test, planted_cols


# --- emitted-source interpreter ---------------------------------------------

_HEADER_RE = re.compile(
    r"static inline KernelChoice select_kernel\((.+)\) \{$")
_IF_RE = re.compile(r"if \((\w+) < (\S+)\) \{$")
_RET_RE = re.compile(
    r"return \(KernelChoice\)\{ (\d+), (\d+), (\d+), (\d+), (\d+) \};$")


def parse_selector(source):
    """Parse emitted selector text into (arg_names, tree).

    Tree nodes are ("if", feature_name, threshold, left, right) or
    ("ret", (tr, ta, tc, wr, wc)). Raises AssertionError on any text that
    does not match the expected shape, including bad brace structure.
    """
    lines = source.splitlines()
    m = _HEADER_RE.match(lines[0])
    assert m, lines[0]
    args = [part.split()[-1] for part in m.group(1).split(",")]
    pos = 1

    def node():
        nonlocal pos
        line = lines[pos].strip()
        pos += 1
        m = _IF_RE.match(line)
        if m:
            left = node()
            assert lines[pos].strip() == "} else {"
            pos += 1
            right = node()
            assert lines[pos].strip() == "}"
            pos += 1
            return ("if", m.group(1), float(m.group(2)), left, right)
        m = _RET_RE.match(line)
        assert m, line
        return ("ret", tuple(int(g) for g in m.groups()))

    tree = node()
    assert lines[pos].strip() == "}"
    assert pos == len(lines) - 1
    return args, tree


def run_selector(args, tree, feature_values):
    env = dict(zip(args, [float(v) for v in feature_values]))
    node = tree
    while node[0] == "if":
        node = node[3] if env[node[1]] < node[2] else node[4]
    return node[1]
