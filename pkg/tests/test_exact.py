import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from twdlasso.data import Measure, PointCloud, pairwise_distances
from twdlasso.exact import (
    CyclicPlanError,
    TransportPlan,
    exact_w1,
    tree_from_plan,
    w1,
)
from twdlasso.tree import twd


def brute_force_ot(a, b, C):
    """Minimum cost over every basic solution of the transportation polytope.

    Enumerates all sets of ``n + m - 1`` cells whose bipartite graph is a
    spanning tree, solves the (square, nonsingular) marginal system for
    the flows on that tree and keeps the feasible ones.
    """
    n, m = C.shape
    cells = [(i, j) for i in range(n) for j in range(m)]
    best = np.inf
    for basis in itertools.combinations(cells, n + m - 1):
        A = np.zeros((n + m, n + m - 1))
        for k, (i, j) in enumerate(basis):
            A[i, k] = 1
            A[n + j, k] = 1
        if np.linalg.matrix_rank(A) < n + m - 1:
            continue  # contains a cycle, so not a spanning tree
        rhs = np.concatenate([a, b])
        x, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        if np.min(x) < -1e-12 or np.abs(A @ x - rhs).max() > 1e-10:
            continue
        best = min(best, sum(x[k] * C[i, j] for k, (i, j) in enumerate(basis)))
    return best


def linprog_ot(a, b, C):
    n, m = C.shape
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        A[n + j, j::m] = 1
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def simplex(rng, k):
    x = rng.uniform(0.1, 1.0, size=k)
    return x / x.sum()


def check_plan(res, a, b, C):
    P = res.plan.dense()
    np.testing.assert_allclose(P.sum(axis=1), a, atol=1e-12)
    np.testing.assert_allclose(P.sum(axis=0), b, atol=1e-12)
    assert np.all(P >= 0)
    assert len(res.plan) <= a.size + b.size - 1
    assert res.value == pytest.approx((P * C).sum(), abs=1e-12)


class TestExactW1:
    def test_diracs(self):
        res = exact_w1([1.0], [1.0], [[2.5]])
        assert res.value == 2.5
        assert res.plan.entries == [(0, 0, 1.0)]

    def test_identical_support(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(5, 2))
        a = simplex(rng, 5)
        assert exact_w1(a, a, pairwise_distances("euclidean", X, X)).value == pytest.approx(0, abs=1e-15)

    def test_small_hand_case(self):
        # move 0.5 from each source to the nearer target
        C = np.array([[0.0, 1.0], [1.0, 0.0]])
        res = exact_w1([0.5, 0.5], [0.25, 0.75], C)
        assert res.value == pytest.approx(0.25)

    @pytest.mark.parametrize("seed", range(25))
    def test_brute_force_small(self, seed):
        rng = np.random.default_rng(seed)
        n, m = rng.integers(1, 5, size=2)
        a, b = simplex(rng, n), simplex(rng, m)
        C = rng.uniform(0, 3, size=(n, m))
        if seed % 5 == 0:
            C = np.round(C)  # ties in the reduced costs
        res = exact_w1(a, b, C)
        check_plan(res, a, b, C)
        assert abs(res.value - brute_force_ot(a, b, C)) <= 1e-10

    def test_degenerate_masses(self):
        # equal partial sums make the north-west corner degenerate
        a = np.array([0.25, 0.25, 0.25, 0.25])
        b = np.array([0.5, 0.25, 0.25])
        C = np.array([[3, 1, 2], [1, 3, 2], [2, 2, 0], [0, 1, 1]], dtype=float)
        res = exact_w1(a, b, C)
        check_plan(res, a, b, C)
        assert abs(res.value - brute_force_ot(a, b, C)) <= 1e-10

    @pytest.mark.parametrize("seed", range(20))
    def test_linprog_up_to_eight(self, seed):
        rng = np.random.default_rng(100 + seed)
        n, m = rng.integers(1, 9, size=2)
        a, b = simplex(rng, n), simplex(rng, m)
        X, Y = rng.normal(size=(n, 3)), rng.normal(size=(m, 3))
        C = pairwise_distances("euclidean", X, Y)
        res = exact_w1(a, b, C)
        check_plan(res, a, b, C)
        assert abs(res.value - linprog_ot(a, b, C)) <= 1e-10

    def test_larger_against_linprog(self):
        rng = np.random.default_rng(3)
        a, b = simplex(rng, 40), simplex(rng, 35)
        C = pairwise_distances("manhattan", rng.normal(size=(40, 5)), rng.normal(size=(35, 5)))
        res = exact_w1(a, b, C)
        check_plan(res, a, b, C)
        assert res.value == pytest.approx(linprog_ot(a, b, C), abs=1e-9)

    def test_errors(self):
        with pytest.raises(ValueError):
            exact_w1([1.0], [0.5], [[1.0]])
        with pytest.raises(ValueError):
            exact_w1([1.0], [1.0], [[1.0, 2.0]])
        with pytest.raises(ValueError):
            exact_w1([1.0], [1.0], [[np.nan]])
        with pytest.raises(ValueError):
            exact_w1(np.full(3, 1 / 3), np.full(3, 1 / 3), np.zeros((3, 3)), max_support=5)

    def test_measure_interface(self):
        cloud = PointCloud([[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]])
        assert w1(cloud, Measure.point_mass(0), Measure.point_mass(1)) == 5.0
        assert w1(cloud, Measure.point_mass(0), Measure.point_mass(2), "manhattan") == 14.0


class TestTreeFromPlan:
    def test_two_points(self):
        plan = TransportPlan(np.array([0]), np.array([0]), np.array([1.0]), (1, 1))
        t = tree_from_plan(plan, [[2.0]])
        np.testing.assert_array_equal(t.parent, [-1, 0])
        assert t.weight[1] == 2.0
        assert twd(t, Measure.point_mass(0), Measure.point_mass(1)) == 2.0

    def test_cyclic_plan_rejected(self):
        plan = TransportPlan(np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1]),
                             np.full(4, 0.25), (2, 2))
        with pytest.raises(CyclicPlanError):
            tree_from_plan(plan, np.ones((2, 2)))

    def test_disconnected_plan_gets_artificial_root(self):
        C = np.array([[1.0, 5.0], [5.0, 2.0]])
        res = exact_w1([0.5, 0.5], [0.5, 0.5], C)
        t = tree_from_plan(res.plan, C)
        assert t.weight[0] == 0 and np.count_nonzero(t.parent == 0) == 2
        mu = Measure([0, 1], [0.5, 0.5])
        nu = Measure([2, 3], [0.5, 0.5])
        assert twd(t, mu, nu) == pytest.approx(res.value, abs=1e-12)

    def test_merge_cycle_is_cancelled(self):
        # rows are points (0, 1), columns points (1, 0): after merging, the two
        # plan edges join the same pair of nodes
        plan = TransportPlan(np.array([0, 1]), np.array([0, 1]), np.array([0.5, 0.5]), (2, 2))
        C = np.array([[3.0, 0.0], [0.0, 3.0]])
        t = tree_from_plan(plan, C, row_points=[0, 1], col_points=[1, 0])
        assert t.n_nodes == 2
        assert t.weight[1] == 3.0
        mu = Measure([0, 1], [0.5, 0.5])
        assert twd(t, mu, mu) == 0.0

    @pytest.mark.parametrize("seed", range(10))
    def test_reproduces_optimal_cost(self, seed):
        rng = np.random.default_rng(seed)
        n, m = rng.integers(1, 12, size=2)
        a, b = simplex(rng, n), simplex(rng, m)
        C = pairwise_distances("euclidean", rng.normal(size=(n, 4)), rng.normal(size=(m, 4)))
        res = exact_w1(a, b, C)
        t = tree_from_plan(res.plan, C)
        mu = Measure(np.arange(n), a)
        nu = Measure(n + np.arange(m), b)
        assert abs(twd(t, mu, nu) - res.value) <= 1e-10

    @pytest.mark.parametrize("seed", range(10))
    def test_shared_points_are_merged(self, seed):
        rng = np.random.default_rng(50 + seed)
        X = rng.normal(size=(10, 3))
        cloud = PointCloud(X)
        mu = Measure(np.sort(rng.choice(10, 6, replace=False)), simplex(rng, 6))
        nu = Measure(np.sort(rng.choice(10, 6, replace=False)), simplex(rng, 6))
        C = pairwise_distances("euclidean", X[mu.indices], X[nu.indices])
        res = exact_w1(mu, nu, C)
        t = tree_from_plan(res.plan, C, mu.indices, nu.indices)
        support = np.union1d(mu.indices, nu.indices)
        assert np.all(t.node_of_point[support] >= 0)
        # one node per distinct support point (plus a possible artificial root)
        assert t.n_nodes - support.size in (0, 1)
        assert abs(twd(t, mu, nu) - w1(cloud, mu, nu)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_exact_matches_linprog_property(n, m, seed):
    rng = np.random.default_rng(seed)
    a, b = simplex(rng, n), simplex(rng, m)
    C = rng.integers(0, 4, size=(n, m)).astype(float)
    res = exact_w1(a, b, C)
    check_plan(res, a, b, C)
    assert abs(res.value - linprog_ot(a, b, C)) <= 1e-10
    t = tree_from_plan(res.plan, C)
    assert abs(twd(t, Measure(np.arange(n), a), Measure(n + np.arange(m), b)) - res.value) <= 1e-10
