"""Subset selection: pick K deployable configs from benchmarked training rows.

Six routes to a ConfigSubset: win-count ranking (top_n), k-means and
PCA+k-means over the normalized rows, spectral clustering, HDBSCAN behind a
hyperparameter sweep, and a best-first multi-output regression tree. The
clustering routes share subset_from_clusters for the cluster-to-config
extraction step.

Everything here is self-contained numpy. Determinism is part of the
contract (fixed seeds, explicit tie rules), so pipeline runs reproduce
bit for bit.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, EmptySelectionError
from .normalize import NormMatrix
from .pca import fit_pca, transform, variance_report

NOISE = -1

METHODS = ("topn", "kmeans", "pca_kmeans", "spectral", "hdbscan", "tree")

# Stand-in for zeros under cutoff schemes so the geometric mean stays finite.
GEOMEAN_EPS = 1e-6

DEFAULT_MCS_RANGE = range(2, 11)


@dataclass(frozen=True, eq=False)
class ClusterLabels:
    """Per-row cluster assignment; NOISE (-1) marks rows no cluster claimed."""

    labels: np.ndarray
    n_clusters: int

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int64)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        if lab.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if self.n_clusters < 0:
            raise ValueError("n_clusters must be >= 0")
        bad = (lab != NOISE) & ((lab < 0) | (lab >= self.n_clusters))
        if bad.any():
            raise ValueError("cluster label out of range")
        for j in range(self.n_clusters):
            if not (lab == j).any():
                raise ValueError(f"cluster {j} is empty")


@dataclass(frozen=True)
class ConfigSubset:
    """Ordered distinct PerfMatrix column indices chosen for deployment."""

    config_indices: tuple[int, ...]
    method: str
    k_requested: int
    k_actual: int

    def __post_init__(self):
        if self.k_requested < 1:
            raise ValueError("k_requested must be >= 1")
        if not self.config_indices:
            raise ValueError("empty subset")
        if any(c < 0 for c in self.config_indices):
            raise ValueError("config index must be >= 0")
        if len(set(self.config_indices)) != len(self.config_indices):
            raise ValueError("duplicate config index")
        if self.k_actual != len(self.config_indices):
            raise ValueError("k_actual must equal len(config_indices)")
        if self.k_actual > self.k_requested:
            raise ValueError("k_actual exceeds k_requested")


def top_n(nm: NormMatrix, k: int) -> ConfigSubset:
    """The k columns that win (row argmax) most often.

    Ties break to the lower column index, both per row and in the ranking.
    Columns that never win are not candidates, so k_actual can fall short
    of k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    winners = np.argmax(nm.values, axis=1)
    counts = np.bincount(winners, minlength=nm.n_configs)
    order = np.argsort(-counts, kind="stable")
    ranked = order[counts[order] > 0]
    chosen = tuple(int(c) for c in ranked[:k])
    return ConfigSubset(chosen, method="topn", k_requested=k, k_actual=len(chosen))


def _plus_plus_init(pts: np.ndarray, k: int, rng) -> np.ndarray:
    n = pts.shape[0]
    centroids = np.empty((k, pts.shape[1]))
    centroids[0] = pts[rng.integers(n)]
    d2 = ((pts - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            # D^2 sampling; zero-weight points sit on flat cumsum steps and
            # are never hit because u < total strictly.
            u = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), u, side="right"))
        else:
            idx = int(np.argmax(d2))  # every point already coincides with a centroid
        centroids[i] = pts[idx]
        np.minimum(d2, ((pts - centroids[i]) ** 2).sum(axis=1), out=d2)
    return centroids


def kmeans(points, k: int, seed: int, max_iter: int = 300,
           cost_trace: list | None = None):
    """Lloyd's algorithm with k-means++ seeding.

    Runs to an assignment fixpoint or max_iter. Clusters that empty out are
    re-seeded to the point farthest from its assigned centroid. Returned
    centroids are the means of the final assignment; if duplicates in the
    data make fewer than k clusters survive, labels are compacted and only
    the surviving centroids are returned.

    cost_trace, when given a list, receives the clustering objective after
    every assignment pass (a test hook for the monotonicity property).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n} rows, got k={k}")

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(pts, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        if cost_trace is not None:
            cost_trace.append(float(d2[np.arange(n), new].sum()))
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = pts[members].mean(axis=0)
        empty = np.flatnonzero(np.bincount(labels, minlength=k) == 0)
        if empty.size:
            far = np.argsort(-d2[np.arange(n), labels], kind="stable")
            for j, p in zip(empty, far):
                centroids[j] = pts[p]

    for j in range(k):
        members = labels == j
        if members.any():
            centroids[j] = pts[members].mean(axis=0)
    present = np.unique(labels)
    if present.size < k:
        lut = np.zeros(k, dtype=np.int64)
        lut[present] = np.arange(present.size)
        labels = lut[labels]
        centroids = centroids[present]
    return centroids, ClusterLabels(labels=labels, n_clusters=len(present))


def spectral_cluster(points, k: int, seed: int) -> ClusterLabels:
    """Normalized-Laplacian spectral clustering with a Gaussian affinity.

    The kernel width is the median pairwise distance; the embedding is the
    k smallest eigenvectors of I - D^(-1/2) A D^(-1/2), row-normalized,
    clustered with k-means.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= {n} rows, got k={k}")
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    dist = np.sqrt(d2)
    sigma = float(np.median(dist[np.triu_indices(n, 1)]))
    if sigma == 0.0:
        raise DegenerateInputError("median pairwise distance is zero")
    aff = np.exp(-d2 / (2.0 * sigma * sigma))
    np.fill_diagonal(aff, 0.0)
    deg = aff.sum(axis=1)
    inv = np.where(deg > 0.0, 1.0 / np.sqrt(np.where(deg > 0.0, deg, 1.0)), 0.0)
    lap = np.eye(n) - inv[:, None] * aff * inv[None, :]
    _, vecs = np.linalg.eigh(lap)
    emb = vecs[:, :k]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = np.divide(emb, norms, out=np.zeros_like(emb), where=norms > 0.0)
    _, cl = kmeans(emb, k, seed)
    return cl


def _mst_edges(mreach: np.ndarray) -> np.ndarray:
    """Prim's algorithm, dense O(n^2); rows (a, b, weight)."""
    n = mreach.shape[0]
    best = mreach[0].copy()
    best[0] = np.inf
    src = np.zeros(n, dtype=np.int64)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    edges = np.empty((n - 1, 3))
    for t in range(n - 1):
        v = int(np.argmin(best))
        edges[t] = (src[v], v, best[v])
        in_tree[v] = True
        closer = (mreach[v] < best) & ~in_tree
        best[closer] = mreach[v][closer]
        src[closer] = v
        best[v] = np.inf
    return edges


def hdbscan(points, min_cluster_size: int, min_samples: int) -> ClusterLabels:
    """Density-based hierarchical clustering; unclaimed rows become NOISE.

    Core distance of a point is the distance to its min_samples-th nearest
    other point. The single-linkage tree over mutual reachability distances
    is condensed at min_cluster_size, and clusters are chosen by the
    excess-of-mass rule on stability (the root is eligible, so a dataset
    that never splits cleanly yields one all-inclusive cluster rather than
    all noise). Fully deterministic.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    mcs = min_cluster_size
    if mcs < 2:
        raise ValueError("min_cluster_size must be >= 2")
    if n < 2 * mcs:
        raise ValueError(f"need at least {2 * mcs} rows, got {n}")
    if not 1 <= min_samples < n:
        raise ValueError("min_samples must be in [1, rows)")

    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    core = np.sort(dist, axis=1)[:, min_samples]  # sorted row starts with self at 0
    mreach = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mreach, 0.0)
    edges = _mst_edges(mreach)

    # Single-linkage merge tree; merged components get ids n .. 2n-2.
    order = np.argsort(edges[:, 2], kind="stable")
    uf = np.arange(2 * n - 1)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while uf[root] != root:
            root = uf[root]
        while uf[x] != root:
            uf[x], x = root, uf[x]
        return root

    merges = np.empty((n - 1, 3))
    for t, e in enumerate(order):
        a, b, d = edges[e]
        ra, rb = find(int(a)), find(int(b))
        m = n + t
        uf[ra] = uf[rb] = m
        size[m] = size[ra] + size[rb]
        merges[t] = (ra, rb, d)

    def points_under(v: int) -> list[int]:
        out, stack = [], [v]
        while stack:
            u = stack.pop()
            if u < n:
                out.append(u)
            else:
                left, right, _ = merges[u - n]
                stack += [int(left), int(right)]
        return out

    # Condense: walk top-down; a side smaller than mcs sheds its points at
    # the current lambda, a true split births two new condensed clusters.
    root = 2 * n - 2
    rows: list[tuple[int, int, float, int]] = []  # (parent, child, lambda, size)
    relabel = {root: n}
    next_id = n + 1
    queue = deque([root])
    while queue:
        node = queue.popleft()
        left, right, d = merges[node - n]
        left, right = int(left), int(right)
        lam = 1.0 / max(float(d), 1e-12)
        cid = relabel[node]
        counts = [1 if c < n else int(size[c]) for c in (left, right)]
        if counts[0] >= mcs and counts[1] >= mcs:
            for child, cnt in zip((left, right), counts):
                relabel[child] = next_id
                rows.append((cid, next_id, lam, cnt))
                next_id += 1
                queue.append(child)
        else:
            for child, cnt in zip((left, right), counts):
                if cnt >= mcs:
                    relabel[child] = cid
                    queue.append(child)
                else:
                    rows.extend((cid, p, lam, 1) for p in points_under(child))

    # Stability per condensed cluster; the root is born at lambda 0.
    births = {n: 0.0}
    for _, child, lam, _ in rows:
        if child >= n:
            births[child] = lam
    stability = {c: 0.0 for c in range(n, next_id)}
    children_of: dict[int, list[int]] = {c: [] for c in range(n, next_id)}
    for parent_c, child, lam, sz in rows:
        stability[parent_c] += (lam - births[parent_c]) * sz
        if child >= n:
            children_of[parent_c].append(child)

    # Excess of mass, children first (BFS ids grow downward).
    selected: dict[int, bool] = {}
    score = dict(stability)
    for c in range(next_id - 1, n - 1, -1):
        kids = children_of[c]
        kid_total = sum(score[x] for x in kids)
        if kids and kid_total > score[c]:
            selected[c] = False
            score[c] = kid_total
        else:
            selected[c] = True
            stack = list(kids)
            while stack:
                dsc = stack.pop()
                selected[dsc] = False
                stack.extend(children_of[dsc])

    parent_cluster: dict[int, int] = {}
    fall_parent: dict[int, int] = {}
    for parent_c, child, _, _ in rows:
        if child >= n:
            parent_cluster[child] = parent_c
        else:
            fall_parent[child] = parent_c
    chosen = sorted(c for c in range(n, next_id) if selected[c])
    rank = {c: i for i, c in enumerate(chosen)}
    labels = np.full(n, NOISE, dtype=np.int64)
    for p in range(n):
        c: int | None = fall_parent[p]
        while c is not None:
            if selected[c]:
                labels[p] = rank[c]
                break
            c = parent_cluster.get(c)
    return ClusterLabels(labels=labels, n_clusters=len(chosen))


def hdbscan_sweep(points, k_target: int, mcs_range=DEFAULT_MCS_RANGE) -> ClusterLabels:
    """Run hdbscan across min_cluster_size values and keep the labeling
    whose cluster count lands closest to k_target.

    min_samples rides along as min_cluster_size. Sweep values too large for
    the row count are skipped; ties go to the smaller value.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    best: tuple[int, ClusterLabels] | None = None
    for mcs in mcs_range:
        if mcs < 2 or n < 2 * mcs:
            continue
        cl = hdbscan(pts, mcs, mcs)
        gap = abs(cl.n_clusters - k_target)
        if best is None or gap < best[0]:
            best = (gap, cl)
    if best is None:
        raise ValueError("no usable min_cluster_size in sweep range")
    return best[1]


def tree_select(problems, nm: NormMatrix, k: int) -> ConfigSubset:
    """Grow a best-first multi-output regression tree to at most k leaves;
    each leaf's mean performance vector nominates one config.

    Features are log2 problem dimensions. The leaf whose best axis-aligned
    split removes the most summed squared error is split first; growth
    stops at k leaves or when no split helps. Leaf nominations are
    deduplicated in leaf creation order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = nm.n_problems
    if len(problems) != n:
        raise ValueError("problems and matrix rows disagree")
    if n < k:
        raise ValueError(f"need at least k={k} rows, got {n}")
    feats = np.log2([[p.m, p.k, p.n, p.batch] for p in problems])
    values = nm.values

    def best_split(rows_idx: np.ndarray):
        sub = values[rows_idx]
        nrows = len(rows_idx)
        total_sse = float(((sub - sub.mean(axis=0)) ** 2).sum())
        best = None  # (reduction, feature, threshold)
        for f in range(4):
            order = np.argsort(feats[rows_idx, f], kind="stable")
            xs = feats[rows_idx[order], f]
            ys = sub[order]
            cs = np.cumsum(ys, axis=0)
            cs2 = np.cumsum(ys * ys, axis=0)
            nl = np.arange(1, nrows)[:, None]
            nr = nrows - nl
            sse_l = (cs2[:-1] - cs[:-1] ** 2 / nl).sum(axis=1)
            sse_r = ((cs2[-1] - cs2[:-1]) - (cs[-1] - cs[:-1]) ** 2 / nr).sum(axis=1)
            split_ok = xs[1:] > xs[:-1]
            if not split_ok.any():
                continue
            combined = np.where(split_ok, sse_l + sse_r, np.inf)
            i = int(np.argmin(combined))
            reduction = total_sse - float(combined[i])
            if reduction > 0.0 and (best is None or reduction > best[0]):
                best = (reduction, f, float((xs[i] + xs[i + 1]) / 2.0))
        return best

    heap: list[tuple[float, int, int, float]] = []
    leaves: dict[int, np.ndarray] = {}
    counter = 0

    def add_leaf(rows_idx: np.ndarray) -> None:
        nonlocal counter
        idx = counter
        counter += 1
        leaves[idx] = rows_idx
        if len(rows_idx) >= 2:
            found = best_split(rows_idx)
            if found is not None:
                heapq.heappush(heap, (-found[0], idx, found[1], found[2]))

    add_leaf(np.arange(n))
    n_leaves = 1
    while n_leaves < k and heap:
        _, idx, f, thr = heapq.heappop(heap)
        rows_idx = leaves.pop(idx)
        going_left = feats[rows_idx, f] < thr
        add_leaf(rows_idx[going_left])
        add_leaf(rows_idx[~going_left])
        n_leaves += 1

    picks = []
    for idx in sorted(leaves):
        c = int(np.argmax(values[leaves[idx]].mean(axis=0)))
        if c not in picks:
            picks.append(c)
    return ConfigSubset(tuple(picks), method="tree", k_requested=k, k_actual=len(picks))


def subset_from_clusters(nm: NormMatrix, labels: ClusterLabels,
                         centroids=None, method: str = "clusters",
                         k_requested: int | None = None) -> ConfigSubset:
    """Extract one config per cluster and deduplicate.

    With centroids the pick is the centroid's argmax column. Without, it is
    the argmax of the per-column geometric mean over member rows, zeros
    first replaced by GEOMEAN_EPS so cutoff schemes cannot annihilate a
    column. NOISE rows take no part. If more clusters than k_requested
    survive deduplication, the pick list is truncated in cluster order.
    """
    if labels.n_clusters == 0:
        raise EmptySelectionError("every row is noise; nothing to select from")
    if centroids is not None and len(centroids) != labels.n_clusters:
        raise ValueError("one centroid per cluster required")
    picks = []
    for j in range(labels.n_clusters):
        if centroids is not None:
            picks.append(int(np.argmax(centroids[j])))
        else:
            members = nm.values[labels.labels == j]
            safe = np.where(members == 0.0, GEOMEAN_EPS, members)
            gmean = np.exp(np.log(safe).mean(axis=0))
            picks.append(int(np.argmax(gmean)))
    distinct = []
    for c in picks:
        if c not in distinct:
            distinct.append(c)
    if k_requested is None:
        k_requested = labels.n_clusters
    distinct = distinct[:k_requested]
    return ConfigSubset(tuple(distinct), method=method,
                        k_requested=k_requested, k_actual=len(distinct))


def select_subset(method: str, nm: NormMatrix, k: int, seed: int,
                  problems=None, mcs_range=DEFAULT_MCS_RANGE) -> ConfigSubset:
    """Dispatch one named selection method over normalized training rows."""
    if method == "topn":
        return top_n(nm, k)
    if method == "kmeans":
        centroids, labels = kmeans(nm.values, k, seed)
        return subset_from_clusters(nm, labels, centroids,
                                    method="kmeans", k_requested=k)
    if method == "pca_kmeans":
        model = fit_pca(nm)
        keep = variance_report(model).components_90 or model.n_components
        coords = transform(model, nm, keep)
        _, labels = kmeans(coords, k, seed)
        # Centroids live in PCA coordinates; config picks need cluster
        # representatives back in config space.
        reps = np.stack([nm.values[labels.labels == j].mean(axis=0)
                         for j in range(labels.n_clusters)])
        return subset_from_clusters(nm, labels, reps,
                                    method="pca_kmeans", k_requested=k)
    if method == "spectral":
        labels = spectral_cluster(nm.values, k, seed)
        return subset_from_clusters(nm, labels, method="spectral", k_requested=k)
    if method == "hdbscan":
        labels = hdbscan_sweep(nm.values, k, mcs_range)
        return subset_from_clusters(nm, labels, method="hdbscan", k_requested=k)
    if method == "tree":
        if problems is None:
            raise ValueError("tree method needs the problem sizes")
        return tree_select(problems, nm, k)
    raise ValueError(f"unknown selection method {method!r}")
