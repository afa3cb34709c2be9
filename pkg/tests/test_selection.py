import numpy as np
import pytest

from kernelprune.dataset import KernelConfig, PerfMatrix, ProblemSize
from kernelprune.errors import DegenerateInputError, EmptySelectionError
from kernelprune.normalize import NormScheme, normalize
from kernelprune.selection import (
    METHODS,
    NOISE,
    ClusterLabels,
    ConfigSubset,
    hdbscan,
    hdbscan_sweep,
    kmeans,
    select_subset,
    spectral_cluster,
    subset_from_clusters,
    top_n,
    tree_select,
)
from oracles import build_planted

SCALED = NormScheme("scaled")


def nm_from_values(values, ms=None):
    """Wrap a raw gflops array as a scaled NormMatrix with distinct problems."""
    values = np.asarray(values, dtype=np.float64)
    n, c = values.shape
    ms = ms if ms is not None else [16 + 8 * i for i in range(n)]
    problems = tuple(ProblemSize(int(m), 32, 64 + i, 1) for i, m in enumerate(ms))
    configs = tuple(KernelConfig(1, 1, 1 + j, 8, 8) for j in range(c))
    return normalize(PerfMatrix(problems, configs, values), SCALED)


def blobs(centers, per=6, spread=0.5, seed=0):
    rng = np.random.default_rng(seed)
    pts = [rng.normal(c, spread, size=(per, len(c))) for c in centers]
    return np.concatenate(pts)


def as_partition(labels):
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(i)
    return {frozenset(v) for v in groups.values()}


# --- ClusterLabels / ConfigSubset invariants ---------------------------------

def test_cluster_labels_validate():
    ClusterLabels(np.array([0, 1, NOISE]), 2)
    with pytest.raises(ValueError):
        ClusterLabels(np.array([0, 2]), 2)  # label out of range
    with pytest.raises(ValueError):
        ClusterLabels(np.array([0, 0]), 2)  # cluster 1 empty


def test_config_subset_validates():
    ConfigSubset((0, 2), method="topn", k_requested=3, k_actual=2)
    with pytest.raises(ValueError):
        ConfigSubset((0, 0), method="topn", k_requested=2, k_actual=2)
    with pytest.raises(ValueError):
        ConfigSubset((0, 1, 2), method="topn", k_requested=2, k_actual=3)


# --- Top-N --------------------------------------------------------------------

def winners_matrix():
    # argmax columns per row: 2, 2, 5
    v = np.full((3, 6), 50.0)
    v[0, 2] = v[1, 2] = 100.0
    v[2, 5] = 100.0
    return nm_from_values(v)


def test_top_n_majority():
    sub = top_n(winners_matrix(), 1)
    assert list(sub.config_indices) == [2]
    assert sub.k_actual == 1 and sub.k_requested == 1


def test_top_n_k2_takes_both_winners():
    sub = top_n(winners_matrix(), 2)
    assert list(sub.config_indices) == [2, 5]


def test_top_n_tie_prefers_lower_index():
    v = np.full((4, 6), 50.0)
    v[0, 3] = v[1, 3] = 100.0
    v[2, 1] = v[3, 1] = 100.0
    sub = top_n(nm_from_values(v), 1)
    assert list(sub.config_indices) == [1]


def test_top_n_caps_at_distinct_winners():
    v = np.full((3, 4), 50.0)
    v[:, 0] = 100.0
    sub = top_n(nm_from_values(v), 3)
    assert list(sub.config_indices) == [0]
    assert sub.k_actual == 1 and sub.k_requested == 3


def test_top_n_subsets_are_nested():
    rng = np.random.default_rng(11)
    nm = nm_from_values(rng.uniform(10, 100, size=(30, 8)))
    prev = []
    for k in range(1, 9):
        cur = list(top_n(nm, k).config_indices)
        assert cur[: len(prev)] == prev
        prev = cur


# --- k-means -------------------------------------------------------------------

def test_kmeans_k1_is_mean():
    pts = np.random.default_rng(0).normal(size=(7, 3))
    centroids, labels = kmeans(pts, 1, seed=0)
    assert np.allclose(centroids[0], pts.mean(axis=0))
    assert (labels.labels == 0).all() and labels.n_clusters == 1


def test_kmeans_separates_far_blobs():
    pts = blobs([(0.0, 0.0), (100.0, 100.0)], per=8, seed=1)
    for seed in range(5):
        _, labels = kmeans(pts, 2, seed=seed)
        part = as_partition(labels.labels)
        assert part == {frozenset(range(8)), frozenset(range(8, 16))}


def test_kmeans_deterministic_per_seed():
    pts = blobs([(0, 0), (5, 5), (10, 0)], per=5, seed=2)
    c1, l1 = kmeans(pts, 3, seed=9)
    c2, l2 = kmeans(pts, 3, seed=9)
    assert np.array_equal(c1, c2)
    assert np.array_equal(l1.labels, l2.labels)


def test_kmeans_cost_trace_non_increasing():
    pts = np.random.default_rng(4).uniform(size=(40, 4))
    trace = []
    kmeans(pts, 5, seed=3, cost_trace=trace)
    assert len(trace) >= 1
    diffs = np.diff(trace)
    assert (diffs <= 1e-9 * max(1.0, trace[0])).all()


def test_kmeans_rejects_k_above_rows():
    with pytest.raises(ValueError):
        kmeans(np.ones((2, 2)), 3, seed=0)
    with pytest.raises(ValueError):
        kmeans(np.ones((2, 2)), 0, seed=0)


def test_kmeans_labels_compact():
    # labels must be 0..k-1 with no gaps even when clusters collapse
    pts = np.concatenate([np.zeros((6, 2)), np.ones((6, 2))])
    _, labels = kmeans(pts, 2, seed=0)
    assert set(labels.labels.tolist()) == {0, 1}


# --- spectral -------------------------------------------------------------------

def test_spectral_separates_far_blobs():
    pts = blobs([(0.0, 0.0), (100.0, 100.0)], per=7, seed=5)
    labels = spectral_cluster(pts, 2, seed=0)
    assert as_partition(labels.labels) == {
        frozenset(range(7)), frozenset(range(7, 14))}


def test_spectral_k_equals_rows_gives_singletons():
    pts = np.array([[float(i), 0.0] for i in range(6)])
    labels = spectral_cluster(pts, 6, seed=0)
    assert labels.n_clusters == 6
    assert sorted(labels.labels.tolist()) == list(range(6))


def test_spectral_permutation_invariant_partition():
    pts = blobs([(0, 0), (50, 0), (0, 50)], per=5, seed=6)
    base = as_partition(spectral_cluster(pts, 3, seed=0).labels)
    rng = np.random.default_rng(7)
    perm = rng.permutation(len(pts))
    permuted = spectral_cluster(pts[perm], 3, seed=0).labels
    unshuffled = np.empty(len(pts), dtype=int)
    unshuffled[perm] = permuted
    assert as_partition(unshuffled) == base


def test_spectral_identical_points_degenerate():
    with pytest.raises(DegenerateInputError):
        spectral_cluster(np.ones((5, 2)), 2, seed=0)


def test_spectral_preconditions():
    pts = np.random.default_rng(0).normal(size=(4, 2))
    with pytest.raises(ValueError):
        spectral_cluster(pts, 1, seed=0)
    with pytest.raises(ValueError):
        spectral_cluster(pts, 5, seed=0)


# --- HDBSCAN ---------------------------------------------------------------------

def test_hdbscan_blobs_and_outlier():
    pts = np.concatenate([
        blobs([(0.0, 0.0)], per=8, spread=0.3, seed=8),
        blobs([(30.0, 30.0)], per=8, spread=0.3, seed=9),
        [[300.0, -300.0]],
    ])
    labels = hdbscan(pts, min_cluster_size=3, min_samples=3)
    assert labels.n_clusters == 2
    assert labels.labels[-1] == NOISE
    part = as_partition(labels.labels[:-1])
    assert part == {frozenset(range(8)), frozenset(range(8, 16))}


def test_hdbscan_uniform_blob_is_one_cluster():
    pts = np.random.default_rng(10).uniform(size=(12, 2))
    labels = hdbscan(pts, min_cluster_size=6, min_samples=6)
    assert labels.n_clusters == 1
    assert (labels.labels == 0).all()


def test_hdbscan_deterministic():
    pts = blobs([(0, 0), (20, 20)], per=6, seed=11)
    a = hdbscan(pts, 3, 3)
    b = hdbscan(pts, 3, 3)
    assert np.array_equal(a.labels, b.labels)
    assert a.n_clusters == b.n_clusters


def test_hdbscan_preconditions():
    pts = np.random.default_rng(1).normal(size=(10, 2))
    with pytest.raises(ValueError):
        hdbscan(pts, min_cluster_size=6, min_samples=3)  # rows < 2*mcs
    with pytest.raises(ValueError):
        hdbscan(pts, min_cluster_size=1, min_samples=1)
    with pytest.raises(ValueError):
        hdbscan(pts, min_cluster_size=3, min_samples=0)


def test_hdbscan_sweep_finds_planted_count():
    pts = blobs([(0, 0), (40, 0), (0, 40), (40, 40)], per=6, spread=0.4,
                seed=12)
    labels = hdbscan_sweep(pts, k_target=4, mcs_range=range(2, 11))
    assert labels.n_clusters == 4


def test_hdbscan_sweep_reports_closest_achievable():
    pts = blobs([(0.0, 0.0), (60.0, 0.0)], per=8, spread=0.4, seed=13)
    labels = hdbscan_sweep(pts, k_target=3, mcs_range=range(2, 8))
    assert labels.n_clusters == 2


def test_hdbscan_sweep_single_value_matches_plain():
    pts = blobs([(0, 0), (25, 25)], per=7, seed=14)
    swept = hdbscan_sweep(pts, k_target=2, mcs_range=range(3, 4))
    plain = hdbscan(pts, 3, 3)
    assert np.array_equal(swept.labels, plain.labels)


def test_hdbscan_sweep_empty_usable_range():
    pts = np.random.default_rng(2).normal(size=(4, 2))
    with pytest.raises(ValueError):
        hdbscan_sweep(pts, k_target=2, mcs_range=range(5, 9))


# --- tree selection -----------------------------------------------------------

def test_tree_select_k1_global_mean_argmax():
    v = np.array([
        [90.0, 100.0, 10.0],
        [80.0, 100.0, 20.0],
        [100.0, 95.0, 30.0],
    ])
    nm = nm_from_values(v)
    sub = tree_select(nm.problems, nm, 1)
    col_means = nm.values.mean(axis=0)
    assert list(sub.config_indices) == [int(col_means.argmax())]


def test_tree_select_two_regimes():
    v = np.full((6, 8), 50.0)
    v[:3, 1] = 100.0  # m < 100 favors config 1
    v[:3, 7] = 90.0
    v[3:, 7] = 100.0  # m >= 100 favors config 7
    v[3:, 1] = 90.0
    nm = nm_from_values(v, ms=[16, 32, 64, 128, 256, 512])
    sub = tree_select(nm.problems, nm, 2)
    assert sorted(sub.config_indices) == [1, 7]


def test_tree_select_k_equals_rows():
    rng = np.random.default_rng(15)
    v = rng.uniform(10, 100, size=(5, 6))
    nm = nm_from_values(v)
    sub = tree_select(nm.problems, nm, 5)
    expect = sorted(set(int(r.argmax()) for r in nm.values))
    assert sorted(sub.config_indices) == expect


def test_tree_select_preconditions():
    nm = nm_from_values(np.random.default_rng(3).uniform(10, 99, (4, 3)))
    with pytest.raises(ValueError):
        tree_select(nm.problems, nm, 0)
    with pytest.raises(ValueError):
        tree_select(nm.problems, nm, 5)  # k > rows


# --- cluster → subset extraction ------------------------------------------------

def test_subset_single_cluster_geomean_argmax():
    v = np.array([[40.0, 100.0, 60.0], [90.0, 100.0, 50.0]])
    nm = nm_from_values(v)
    labels = ClusterLabels(np.zeros(2, dtype=int), 1)
    sub = subset_from_clusters(nm, labels)
    gm = np.exp(np.log(nm.values).mean(axis=0))
    assert list(sub.config_indices) == [int(gm.argmax())]


def test_subset_centroid_argmax():
    nm = nm_from_values(np.array([[50.0, 90.0, 40.0], [60.0, 100.0, 45.0]]))
    labels = ClusterLabels(np.zeros(2, dtype=int), 1)
    sub = subset_from_clusters(nm, labels,
                               centroids=np.array([[0.1, 0.9, 0.4]]))
    assert list(sub.config_indices) == [1]


def test_subset_dedupes_cluster_winners():
    v = np.array([[50.0, 100.0], [55.0, 100.0], [60.0, 100.0], [65.0, 100.0]])
    nm = nm_from_values(v)
    labels = ClusterLabels(np.array([0, 0, 1, 1]), 2)
    sub = subset_from_clusters(nm, labels)
    assert list(sub.config_indices) == [1]
    assert sub.k_actual == 1


def test_subset_geomean_zero_floor():
    # a zeroed-out cell must sink the column, not be skipped
    values = np.array([
        [1.0, 0.95],
        [0.0, 0.95],
    ])
    nm = nm_from_values(np.array([[100.0, 95.0], [50.0, 95.0]]))
    nm = type(nm)(nm.problems, nm.configs, values,
                  NormScheme("raw_cutoff"), nm.best_gflops)
    labels = ClusterLabels(np.zeros(2, dtype=int), 1)
    sub = subset_from_clusters(nm, labels)
    assert list(sub.config_indices) == [1]


def test_subset_excludes_noise_rows():
    v = np.array([[100.0, 50.0], [100.0, 55.0], [10.0, 100.0]])
    nm = nm_from_values(v)
    labels = ClusterLabels(np.array([0, 0, NOISE]), 1)
    sub = subset_from_clusters(nm, labels)
    assert list(sub.config_indices) == [0]


def test_subset_all_noise_is_error():
    nm = nm_from_values(np.array([[100.0, 50.0]]))
    labels = ClusterLabels(np.array([NOISE]), 0)
    with pytest.raises(EmptySelectionError):
        subset_from_clusters(nm, labels)


def test_subset_centroid_count_mismatch():
    nm = nm_from_values(np.array([[100.0, 50.0], [90.0, 100.0]]))
    labels = ClusterLabels(np.array([0, 1]), 2)
    with pytest.raises(ValueError):
        subset_from_clusters(nm, labels, centroids=np.array([[1.0, 0.5]]))


# --- unified front door ---------------------------------------------------------

def test_select_subset_every_method_valid():
    train, _, planted = build_planted(3)
    nm = normalize(train, SCALED)
    for method in METHODS:
        sub = select_subset(method, nm, 3, seed=0, problems=train.problems)
        assert sub.method == method
        assert sub.k_requested == 3
        assert 1 <= sub.k_actual <= 3
        assert len(set(sub.config_indices)) == sub.k_actual
        assert all(0 <= c < nm.values.shape[1] for c in sub.config_indices)
        again = select_subset(method, nm, 3, seed=0, problems=train.problems)
        assert tuple(again.config_indices) == tuple(sub.config_indices)


def test_select_subset_recovers_planted_columns():
    train, _, planted = build_planted(3)
    nm = normalize(train, SCALED)
    for method in METHODS:
        sub = select_subset(method, nm, 3, seed=0, problems=train.problems)
        assert sorted(sub.config_indices) == sorted(planted), method


def test_select_subset_tree_requires_problems():
    nm = nm_from_values(np.random.default_rng(5).uniform(10, 99, (4, 3)))
    with pytest.raises(ValueError):
        select_subset("tree", nm, 2, seed=0)


def test_select_subset_unknown_method():
    nm = nm_from_values(np.random.default_rng(5).uniform(10, 99, (4, 3)))
    with pytest.raises(ValueError):
        select_subset("dbscan", nm, 2, seed=0)
