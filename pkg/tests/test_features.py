import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import random_tree
from test_tree import all_pairs_tree_metric
from twdlasso.data import PointCloud
from twdlasso.features import (
    PairSample,
    _decode_pairs,
    feature_matrix,
    path_feature,
    sample_index_pairs,
    sample_pairs,
)
from twdlasso.tree import TreeError, tree_distance


class TestPathFeature:
    def test_figure_one(self, fig1_tree, backend):
        z = np.zeros(fig1_tree.n_nodes)
        z[path_feature(fig1_tree, 0, 2)] = 1
        np.testing.assert_array_equal(z, [0, 1, 1, 1, 0])
        w = fig1_tree.weight
        assert z @ w == pytest.approx(w[1] + w[2] + w[3])

    def test_same_point(self, fig1_tree, backend):
        assert path_feature(fig1_tree, 1, 1).size == 0

    def test_symmetric_and_sorted(self, fig1_tree, backend):
        a = path_feature(fig1_tree, 0, 1)
        np.testing.assert_array_equal(a, path_feature(fig1_tree, 1, 0))
        np.testing.assert_array_equal(a, [3, 4])

    def test_unmapped(self, fig1_tree):
        with pytest.raises(TreeError):
            path_feature(fig1_tree, 0, 9)

    def test_matches_graph_shortest_path(self, backend):
        rng = np.random.default_rng(17)
        for _ in range(10):
            t = random_tree(rng, max_leaves=40)
            i, j = np.triu_indices(t.n_points, 1)
            Z = feature_matrix(t, i, j)
            D = all_pairs_tree_metric(t)
            np.testing.assert_allclose(Z @ t.weight, D[i, j], atol=1e-9, rtol=0)
            assert Z[:, 0].nnz == 0
            assert Z.getnnz(axis=1).max(initial=0) <= 2 * t.height


def test_backends_agree():
    from twdlasso import _kernels

    rng = np.random.default_rng(4)
    t = random_tree(rng, max_leaves=64)
    i, j = np.triu_indices(t.n_points, 1)
    a, b = t.node_of_point[i], t.node_of_point[j]
    p_nb, x_nb = _kernels.path_features_nb(t.parent, t.depth, a, b)
    p_np, x_np = _kernels.path_features_np(t.ancestors, a, b)
    np.testing.assert_array_equal(p_nb, p_np)
    np.testing.assert_array_equal(x_nb, x_np)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.data())
def test_feature_dot_is_tree_distance(seed, data):
    rng = np.random.default_rng(seed)
    t = random_tree(rng, max_leaves=30)
    i = data.draw(st.integers(0, t.n_points - 1))
    j = data.draw(st.integers(0, t.n_points - 1))
    w = rng.exponential(size=t.n_nodes)
    tw = t.with_weights(w)
    z = path_feature(t, i, j)
    assert w[z].sum() == pytest.approx(tree_distance(tw, i, j), abs=1e-12)
    assert 0 not in z


class TestPairSampling:
    def test_exhaustive(self):
        i, j = sample_index_pairs(3, 10, seed=0)
        assert list(zip(i, j)) == [(0, 1), (0, 2), (1, 2)]

    def test_deterministic(self):
        cloud = PointCloud(np.random.default_rng(0).normal(size=(50, 2)))
        a = sample_pairs(cloud, "euclidean", 100, seed=3)
        b = sample_pairs(cloud, "euclidean", 100, seed=3)
        np.testing.assert_array_equal(a.pairs, b.pairs)
        np.testing.assert_array_equal(a.targets, b.targets)

    def test_targets(self):
        X = np.random.default_rng(0).normal(size=(20, 3))
        s = sample_pairs(PointCloud(X), "manhattan", 30, seed=1)
        np.testing.assert_allclose(s.targets, np.abs(X[s.i] - X[s.j]).sum(axis=1))

    def test_decode_is_bijective(self):
        n = 37
        i, j = _decode_pairs(np.arange(n * (n - 1) // 2), n)
        ei, ej = np.triu_indices(n, 1)
        np.testing.assert_array_equal(i, ei)
        np.testing.assert_array_equal(j, ej)

    def test_uniform_marginals(self):
        n, m = 1000, 100_000
        i, j = sample_index_pairs(n, m, seed=2024)
        assert i.size == m
        assert np.unique(i * n + j).size == m
        assert np.all(i < j)
        counts = np.bincount(np.concatenate([i, j]), minlength=n)
        _, p = stats.chisquare(counts)
        assert p > 0.01

    def test_single_point(self):
        i, j = sample_index_pairs(1, 5, seed=0)
        assert i.size == 0

    def test_rejects(self):
        with pytest.raises(ValueError):
            sample_index_pairs(0, 5, 0)
        with pytest.raises(ValueError):
            sample_index_pairs(5, 0, 0)
        with pytest.raises(ValueError):
            PairSample([1], [0], [1.0])
        with pytest.raises(ValueError):
            PairSample([0], [1], [np.nan])
