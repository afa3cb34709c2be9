"""Runtime selectors: map problem-size features to a config in a subset.

Features are the log2 of (m, k, n, batch), matching the multiplicative
structure of tile sizes. Three CART presets (A unlimited, B depth 6 / leaf 3,
C depth 3 / leaf 4), a bootstrap forest, and kNN over standardized features.

Tie rules are fixed everywhere (lowest feature, lowest threshold, lowest
class) so training is deterministic and emitted code agrees with the
in-process predictor bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .normalize import NormMatrix
from .selection import ConfigSubset

FEATURE_NAMES = ("log2_m", "log2_k", "log2_n", "log2_batch")

CLASSIFIER_SPECS = ("treeA", "treeB", "treeC", "knn1", "knn3", "knn7", "forest")


def problem_features(problems) -> np.ndarray:
    """log2-transformed (m, k, n, batch) rows."""
    return np.log2([[p.m, p.k, p.n, p.batch] for p in problems])


def label_best_in_subset(nm: NormMatrix, subset: ConfigSubset) -> np.ndarray:
    """Per row, the subset-local index of the best column (ties go low)."""
    return np.argmax(nm.values[:, list(subset.config_indices)], axis=1)


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


TREE_PRESETS = {
    "A": TreeParams(max_depth=None, min_samples_leaf=1),
    "B": TreeParams(max_depth=6, min_samples_leaf=3),
    "C": TreeParams(max_depth=3, min_samples_leaf=4),
}


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Decision tree as parallel arrays in preorder; node 0 is the root.

    Internal nodes carry (feature, threshold, left, right) and leaf_class -1;
    leaves carry leaf_class >= 0 and -1 elsewhere. Descent goes left on
    strictly-less, right on greater-or-equal.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.leaf_class >= 0).sum())


# Below this node size the plain-Python sweep wins; above it the array
# sweep does. Ensemble nodes are almost all tiny, so this is the hot path.
_SMALL_NODE = 64


def _best_split_small(X, y, n_classes, msl, feat_ids):
    # Weighted Gini minimization == maximizing sum-of-squared-class-counts
    # score S_l/n_l + S_r/n_r, which updates in O(1) per sweep position.
    n = len(y)
    yl = y.tolist()
    total = [0] * n_classes
    for c in yl:
        total[c] += 1
    s_tot = 0
    for v in total:
        s_tot += v * v
    if s_tot == n * n:  # pure node
        return None
    floor = s_tot / n  # score of not splitting; must be strictly beaten
    best_score = floor
    best = None
    for f in feat_ids:
        col = X[:, f].tolist()
        order = sorted(range(n), key=col.__getitem__)
        xs = [col[i] for i in order]
        count_l = [0] * n_classes
        count_r = total[:]
        s_l = 0
        s_r = s_tot
        for p in range(1, n):
            c = yl[order[p - 1]]
            v = count_l[c]
            count_l[c] = v + 1
            s_l += 2 * v + 1
            v = count_r[c]
            count_r[c] = v - 1
            s_r -= 2 * v - 1
            if xs[p - 1] < xs[p] and p >= msl and n - p >= msl:
                score = s_l / p + s_r / (n - p)
                if score > best_score:
                    best_score = score
                    best = (f, (xs[p - 1] + xs[p]) / 2.0)
    if best is None:
        return None
    return (best_score - floor) / n, int(best[0]), float(best[1])


def _best_split(X: np.ndarray, y: np.ndarray, n_classes: int, msl: int, feat_ids):
    """Exhaustive Gini sweep; thresholds are midpoints of adjacent distinct
    sorted values.

    Returns (decrease, feature, threshold) or None. Candidates are scanned
    feature-major and only a strict improvement displaces the incumbent, so
    equal-scoring ties resolve to the lowest feature index, then the lowest
    threshold.
    """
    n = len(y)
    if n <= _SMALL_NODE:
        return _best_split_small(X, y, n_classes, msl, feat_ids)
    feat_ids = np.asarray(list(feat_ids), dtype=np.int64)
    counts = np.bincount(y, minlength=n_classes)
    parent_gini = 1.0 - ((counts / n) ** 2).sum()
    xs = X[:, feat_ids]
    orders = np.argsort(xs, axis=0, kind="stable")
    xs = np.take_along_axis(xs, orders, axis=0)
    onehot = y[orders][:, :, None] == np.arange(n_classes)  # (n, F, C)
    left = np.cumsum(onehot, axis=0)[:-1]
    right = counts[None, None, :] - left
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    gini_l = 1.0 - ((left / nl[..., None]) ** 2).sum(axis=2)
    gini_r = 1.0 - ((right / nr[..., None]) ** 2).sum(axis=2)
    weighted = (nl * gini_l + nr * gini_r) / n  # (n-1, F)
    usable = (xs[1:] > xs[:-1]) & (nl >= msl) & (nr >= msl)
    if not usable.any():
        return None
    weighted = np.where(usable, weighted, np.inf)
    f_local, pos = divmod(int(np.argmin(weighted.T)), n - 1)
    decrease = parent_gini - float(weighted[pos, f_local])
    if decrease <= 0.0:
        return None
    thr = float((xs[pos, f_local] + xs[pos + 1, f_local]) / 2.0)
    return decrease, int(feat_ids[f_local]), thr


def _grow_tree(X, y, n_classes, max_depth, msl, rng, n_feats) -> TreeModel:
    n_all_feats = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    leaf_class: list[int] = []

    def build(idx: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        leaf_class.append(-1)
        ys = y[idx]
        counts = np.bincount(ys, minlength=n_classes)
        majority = int(np.argmax(counts))
        found = None
        can_split = (counts[majority] < len(ys) and len(ys) >= 2 * msl
                     and (max_depth is None or depth < max_depth))
        if can_split:
            if rng is not None and n_feats < n_all_feats:
                feat_ids = np.sort(rng.choice(n_all_feats, size=n_feats, replace=False))
            else:
                feat_ids = range(n_all_feats)
            found = _best_split(X[idx], ys, n_classes, msl, feat_ids)
        if found is None:
            leaf_class[node] = majority
            return node
        _, f, thr = found
        goes_left = X[idx, f] < thr
        feature[node] = f
        threshold[node] = thr
        left[node] = build(idx[goes_left], depth + 1)
        right[node] = build(idx[~goes_left], depth + 1)
        return node

    build(np.arange(len(y)), 0)
    return TreeModel(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        leaf_class=np.array(leaf_class, dtype=np.int64),
    )


def train_tree(features, labels, params: TreeParams, seed: int = 0,
               n_classes: int | None = None) -> TreeModel:
    """CART with Gini impurity. seed is accepted for signature parity but
    inert: feature ties always break to the lowest index."""
    del seed
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("no training rows")
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("features and labels disagree")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    return _grow_tree(X, y, n_classes, params.max_depth,
                      params.min_samples_leaf, None, X.shape[1])


def predict_tree(model: TreeModel, x) -> int:
    node = 0
    while model.leaf_class[node] < 0:
        if x[model.feature[node]] < model.threshold[node]:
            node = int(model.left[node])
        else:
            node = int(model.right[node])
    return int(model.leaf_class[node])


def predict_tree_batch(model: TreeModel, X) -> np.ndarray:
    """Same routing as predict_tree, vectorized per node for big probe sets."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(len(X), dtype=np.int64)
    stack = [(0, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        c = int(model.leaf_class[node])
        if c >= 0:
            out[idx] = c
        else:
            goes_left = X[idx, model.feature[node]] < model.threshold[node]
            stack.append((int(model.left[node]), idx[goes_left]))
            stack.append((int(model.right[node]), idx[~goes_left]))
    return out


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[TreeModel, ...]
    n_classes: int
    seed: int

    def __post_init__(self):
        if not self.trees:
            raise ValueError("forest needs at least one tree")

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def train_forest(features, labels, n_trees: int = 100, seed: int = 0,
                 n_classes: int | None = None, bootstrap: bool = True,
                 n_features_per_split: int = 2) -> ForestModel:
    """Bagged CART ensemble, unlimited depth, 2-of-4 features per node.

    Tree t draws from default_rng(seed + t), so parallel and serial builds
    agree. bootstrap=False and n_features_per_split=4 are test hooks that
    collapse the ensemble onto plain CART.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("no training rows")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    n = len(y)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(seed + t)
        idx = rng.integers(0, n, n) if bootstrap else np.arange(n)
        trees.append(_grow_tree(X[idx], y[idx], n_classes, None, 1,
                                rng, n_features_per_split))
    return ForestModel(trees=tuple(trees), n_classes=n_classes, seed=seed)


def forest_predict(model: ForestModel, x) -> int:
    votes = np.bincount([predict_tree(t, x) for t in model.trees],
                        minlength=model.n_classes)
    return int(np.argmax(votes))


def forest_predict_batch(model: ForestModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    votes = np.zeros((len(X), model.n_classes), dtype=np.int64)
    for t in model.trees:
        votes[np.arange(len(X)), predict_tree_batch(t, X)] += 1
    return np.argmax(votes, axis=1)


def knn_predict(train_features, train_labels, x, k: int) -> int:
    """Majority vote of the k nearest training rows, k in {1, 3, 7}.

    Features are standardized by training mean/std; a zero-variance feature
    is dropped from the distance. Equal distances rank by row order, and
    vote ties go to the lowest class.
    """
    if k not in (1, 3, 7):
        raise ValueError("k must be one of 1, 3, 7")
    X = np.asarray(train_features, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.int64)
    if k > len(y):
        raise ValueError("k exceeds training size")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.divide(1.0, std, out=np.zeros_like(std), where=std > 0.0)
    z = (X - mean) * scale
    zx = (np.asarray(x, dtype=np.float64) - mean) * scale
    d2 = ((z - zx) ** 2).sum(axis=1)
    nearest = np.argsort(d2, kind="stable")[:k]
    return int(np.argmax(np.bincount(y[nearest])))


def train_classifier(spec: str, features, labels, n_classes: int,
                     seed: int = 0) -> Callable:
    """Build a predictor (feature vector -> subset-local class) by spec name."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if spec in ("treeA", "treeB", "treeC"):
        model = train_tree(X, y, TREE_PRESETS[spec[-1]], seed, n_classes=n_classes)
        return lambda x: predict_tree(model, x)
    if spec in ("knn1", "knn3", "knn7"):
        k = int(spec[3:])
        return lambda x: knn_predict(X, y, x, k)
    if spec == "forest":
        model = train_forest(X, y, seed=seed, n_classes=n_classes)
        return lambda x: forest_predict(model, x)
    raise ValueError(f"unknown classifier spec {spec!r}")
