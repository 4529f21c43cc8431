import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import pdist, squareform

from oracles import kruskal, naive_hdbscan, naive_single_linkage, partition
from topicctl.cluster import (
    ClusterConfig,
    build_hierarchy,
    cluster,
    condense_tree,
    core_distances,
    euclidean_distances,
    minimum_spanning_tree,
    mutual_reachability,
    mutual_reachability_matrix,
    renumber_by_size,
    select_clusters,
)
from topicctl.errors import ConfigError


def _blobs(rng, sizes, centers, scale=0.3):
    X = np.vstack([rng.normal(c, scale, size=(s, len(c))) for s, c in zip(sizes, centers)])
    return X


# -- core distances ----------------------------------------------------------


def test_core_distance_collinear():
    X = np.array([[0.0], [1.0], [3.0]])
    assert core_distances(X, 1).tolist() == [1.0, 1.0, 2.0]


def test_core_distance_duplicates_zero():
    X = np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]])
    assert core_distances(X, 1)[:2].tolist() == [0.0, 0.0]


def test_core_distance_full_sort_oracle():
    X = np.random.default_rng(2).normal(size=(100, 3))
    D = squareform(pdist(X))
    for ms in (1, 4, 9):
        expected = [sorted(D[i][j] for j in range(100) if j != i)[ms - 1] for i in range(100)]
        np.testing.assert_allclose(core_distances(X, ms), expected, rtol=0, atol=1e-12)


def test_core_distance_bad_min_samples():
    with pytest.raises(ConfigError):
        core_distances(np.zeros((3, 1)), 3)


@pytest.mark.parametrize("args, expected", [((1, 2, 3), 3), ((5, 1, 1), 5), ((0.5, 0.1, 0.2), 0.5)])
def test_mutual_reachability(args, expected):
    assert mutual_reachability(*args) == expected


def test_mutual_reachability_symmetric():
    X = np.random.default_rng(5).normal(size=(30, 2))
    D = euclidean_distances(X)
    M = mutual_reachability_matrix(D, core_distances(X, 4, D))
    assert np.array_equal(M, M.T)
    assert np.all(M >= D - 1e-15)


# -- MST and hierarchy -------------------------------------------------------


def test_mst_triangle():
    M = np.array([[0, 1, 3], [1, 0, 2], [3, 2, 0]], dtype=float)
    mst = minimum_spanning_tree(M)
    assert sorted(mst[:, 2].tolist()) == [1.0, 2.0]


def test_mst_path_graph():
    pts = np.array([[0.0], [1.0], [2.5], [4.5]])
    mst = minimum_spanning_tree(euclidean_distances(pts))
    assert {(int(u), int(v)) for u, v, _ in mst} == {(0, 1), (1, 2), (2, 3)}


def test_mst_weight_matches_kruskal():
    X = np.random.default_rng(11).normal(size=(60, 4))
    M = euclidean_distances(X)
    ours = minimum_spanning_tree(M)[:, 2].sum()
    theirs = sum(w for _, _, w in kruskal(M.tolist()))
    assert abs(ours - theirs) < 1e-9


def test_hierarchy_two_points():
    link = build_hierarchy(minimum_spanning_tree(np.array([[0.0, 2.0], [2.0, 0.0]])))
    assert link.tolist() == [[0.0, 1.0, 2.0, 2.0]]


def test_hierarchy_heights_ascending():
    X = np.random.default_rng(3).normal(size=(40, 2))
    link = build_hierarchy(minimum_spanning_tree(euclidean_distances(X)))
    assert np.all(np.diff(link[:, 2]) >= 0)
    assert link[-1, 3] == 40


def _members(link, n):
    sets = [frozenset([i]) for i in range(n)]
    out = []
    for a, b, d, _ in link:
        s = sets[int(a)] | sets[int(b)]
        sets.append(s)
        out.append((d, s))
    return out


@pytest.mark.parametrize("seed", range(5))
def test_hierarchy_matches_naive_single_linkage(seed):
    X = np.random.default_rng(seed).normal(size=(45, 3))
    D = euclidean_distances(X)
    ours = _members(build_hierarchy(minimum_spanning_tree(D)), 45)
    naive = naive_single_linkage(D.tolist())
    assert [round(d, 12) for d, _ in ours] == [round(d, 12) for d, _ in naive]
    assert {s for _, s in ours} == {s for _, s in naive}


# -- condensation and selection ---------------------------------------------


def _tree(X, mcs, ms=None):
    D = euclidean_distances(X)
    M = mutual_reachability_matrix(D, core_distances(X, ms or mcs, D))
    return condense_tree(build_hierarchy(minimum_spanning_tree(M)), mcs)


def test_condense_small_n_root_only():
    X = np.random.default_rng(0).normal(size=(4, 2))
    tree = condense_tree(build_hierarchy(minimum_spanning_tree(euclidean_distances(X))), 5)
    assert tree.cluster_ids() == [tree.root]
    assert sorted(tree.child.tolist()) == [0, 1, 2, 3]


def test_condense_one_blob_single_node():
    X = np.random.default_rng(1).normal(size=(30, 2))
    tree = _tree(X, 20, 5)
    assert tree.cluster_ids() == [tree.root]


def test_condense_two_blobs_two_children():
    rng = np.random.default_rng(4)
    X = _blobs(rng, [20, 20], [[0, 0], [10, 10]])
    tree = _tree(X, 5)
    kids = tree.child_clusters(tree.root)
    assert len(kids) == 2
    assert all(tree.stability[k] > 0 for k in kids)
    assert sorted(tree.child_size[np.isin(tree.child, kids)].tolist()) == [20, 20]


def test_single_cluster_tree_allowed():
    X = np.random.default_rng(1).normal(size=(30, 2))
    labels = cluster(X, ClusterConfig(min_cluster_size=20, min_samples=5, allow_single_cluster=True))
    assert set(labels.tolist()) == {0}


def test_single_cluster_tree_default_is_noise():
    X = np.random.default_rng(1).normal(size=(30, 2))
    labels = cluster(X, ClusterConfig(min_cluster_size=20, min_samples=5))
    assert set(labels.tolist()) == {-1}


def test_two_blobs_two_clusters():
    rng = np.random.default_rng(8)
    X = _blobs(rng, [20, 20], [[0, 0], [6, 6]])
    labels = cluster(X, ClusterConfig(min_cluster_size=5))
    assert set(labels.tolist()) - {-1} == {0, 1}
    assert np.mean(labels == -1) <= 0.10
    assert partition(labels) == naive_hdbscan(X, 5)


def test_uniform_noise_mostly_noise():
    X = np.random.default_rng(6).uniform(size=(30, 2))
    labels = cluster(X, ClusterConfig(min_cluster_size=15))
    assert np.mean(labels == -1) >= 0.5
    assert partition(labels) == naive_hdbscan(X, 15)


def test_fewer_points_than_min_cluster_size(caplog):
    labels = cluster(np.zeros((3, 2)), ClusterConfig(min_cluster_size=5))
    assert labels.tolist() == [-1, -1, -1]
    assert "noise" in caplog.text


def test_leaf_selection_picks_leaves():
    rng = np.random.default_rng(9)
    X = _blobs(rng, [15, 15, 15], [[0, 0], [1.6, 0], [20, 20]], scale=0.2)
    tree = _tree(X, 5)
    leaf = select_clusters(tree, "leaf")
    eom = select_clusters(tree, "eom")
    assert len(set(leaf.tolist()) - {-1}) >= len(set(eom.tolist()) - {-1})


def test_labels_sorted_by_size():
    rng = np.random.default_rng(10)
    X = _blobs(rng, [12, 30], [[0, 0], [10, 10]])
    labels = cluster(X, ClusterConfig(min_cluster_size=5))
    assert np.sum(labels == 0) >= np.sum(labels == 1)


def test_renumber_ties_by_first_member():
    assert renumber_by_size(np.array([7, 3, 7, 3, -1])).tolist() == [0, 1, 0, 1, -1]


def test_deterministic():
    X = np.random.default_rng(12).normal(size=(80, 3))
    cfg = ClusterConfig(min_cluster_size=6)
    assert np.array_equal(cluster(X, cfg), cluster(X, cfg))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.permutations(list(range(60))))
def test_permutation_equivariant(seed, perm):
    rng = np.random.default_rng(seed)
    X = _blobs(rng, [20, 25, 15], [[0, 0], [4, 0], [0, 5]], scale=0.6)
    cfg = ClusterConfig(min_cluster_size=6)
    base = cluster(X, cfg)
    shuffled = cluster(X[perm], cfg)
    inverse = np.empty(60, dtype=int)
    inverse[perm] = np.arange(60)
    assert partition(shuffled[inverse]) == partition(base)


@pytest.mark.parametrize("seed", range(12))
def test_matches_naive_reference(seed):
    rng = np.random.default_rng(100 + seed)
    d = int(rng.integers(2, 6))
    k = int(rng.integers(1, 4))
    centers = rng.uniform(-8, 8, size=(k, d))
    X = np.vstack([_blobs(rng, [int(rng.integers(10, 30))], [c], scale=1.0) for c in centers]
                  + [rng.uniform(-10, 10, size=(int(rng.integers(0, 20)), d))])
    mcs = int(rng.integers(4, 10))
    ms = int(rng.integers(2, 8))
    labels = cluster(X, ClusterConfig(min_cluster_size=mcs, min_samples=ms))
    assert partition(labels) == naive_hdbscan(X, mcs, ms)


def test_ties_from_duplicated_points_match_reference():
    rng = np.random.default_rng(21)
    X = np.round(rng.normal(size=(50, 2)) * 2) / 2
    for mcs in (4, 6):
        labels = cluster(X, ClusterConfig(min_cluster_size=mcs))
        assert partition(labels) == naive_hdbscan(X, mcs)


def test_tree_csv_header():
    X = np.random.default_rng(0).normal(size=(20, 2))
    _, tree = cluster(X, ClusterConfig(min_cluster_size=5), return_tree=True)
    lines = tree.to_csv().splitlines()
    assert lines[0] == "parent,child,lambda,size"
    assert len(lines) == len(tree.parent) + 1


@pytest.mark.parametrize("kw", [{"min_cluster_size": 1}, {"min_samples": 0}, {"selection": "best"}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ClusterConfig(**kw).validate()
