"""Shared fixtures and random-instance generators."""
import numpy as np
import pytest

from twdlasso import _accel
from twdlasso.data import Measure
from twdlasso.tree import Tree


@pytest.fixture
def fig1_tree():
    """Five-node example tree: root -> {n1, n2}, n1 -> {n3, n4}.

    Points: x_1 on n3, x_2 on n4, x_3 on n2 (point ids 0, 1, 2).
    Weights w_v = v + 0.5 so that every path sum is distinguishable.
    """
    parent = np.array([-1, 0, 0, 1, 1])
    weight = np.array([0.0, 1.5, 2.5, 3.5, 4.5])
    return Tree(parent, weight, np.array([3, 4, 2]))


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setattr(_accel, "USE_NUMBA", request.param == "numba")
    return request.param


def random_tree(rng, max_leaves=64, max_children=4, positive=True):
    """Random rooted tree with one point per leaf, ``parent[v] < v``.

    Grown by attaching each new node to a uniformly chosen existing node,
    which yields a mix of deep and bushy shapes.
    """
    n_nodes = int(rng.integers(2, 2 * max_leaves + 1))
    parent = [-1]
    n_children = [0]
    for v in range(1, n_nodes):
        while True:
            p = int(rng.integers(0, v))
            if n_children[p] < max_children:
                break
        parent.append(p)
        n_children[p] += 1
        n_children.append(0)
        if sum(1 for c in n_children if c == 0) >= max_leaves:
            break
    parent = np.array(parent)
    leaves = np.flatnonzero(np.bincount(parent[1:], minlength=parent.size) == 0)
    low = 0.05 if positive else 0.0
    weight = rng.uniform(low, 2.0, size=parent.size)
    nop = rng.permutation(leaves)
    return Tree(parent, weight, nop)


def random_measure(rng, n_points, support):
    support = min(support, n_points)
    idx = np.sort(rng.choice(n_points, size=support, replace=False))
    mass = rng.uniform(0.1, 1.0, size=support)
    return Measure(idx, mass / mass.sum())


def quadtree_with_nodes(seed, n_nodes=50, dim=2, max_tries=10_000):
    """A QuadTree on a random cloud that has exactly ``n_nodes`` nodes."""
    from twdlasso.build import build_tree
    from twdlasso.data import PointCloud

    for k in range(max_tries):
        rng = np.random.default_rng([seed, k])
        cloud = PointCloud(rng.uniform(size=(int(rng.integers(18, 34)), dim)))
        tree = build_tree(cloud, "quadtree", seed=int(rng.integers(2**31)))
        if tree.n_nodes == n_nodes:
            return cloud, tree
    raise RuntimeError("no tree of the requested size found")


def projected_gradient(Z, targets, lam, iters=1_000_000):
    """Oracle for the non-negative Lasso: projected gradient on the Gram form.

    Minimises ``||t - Z w||^2 + lam * sum(w)`` over ``w >= 0`` with the
    fixed step ``1 / L``, ``L = 2 * lambda_max(Z^T Z)``.
    """
    Zd = np.asarray(Z.todense() if hasattr(Z, "todense") else Z, dtype=np.float64)
    G = Zd.T @ Zd
    c = Zd.T @ np.asarray(targets, dtype=np.float64)
    L = 2.0 * np.linalg.eigvalsh(G).max()
    w = _pg_loop(G, c, float(lam), 1.0 / L, iters)
    r = targets - Zd @ w
    return w, float(r @ r + lam * w.sum())


try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(f):
        return f


@njit(cache=True)
def _pg_loop(G, c, lam, step, iters):
    n = c.size
    w = np.zeros(n)
    g = np.empty(n)
    for _ in range(iters):
        for k in range(n):
            s = 0.0
            for l in range(n):
                s += G[k, l] * w[l]
            g[k] = 2.0 * (s - c[k]) + lam
        for k in range(n):
            v = w[k] - step * g[k]
            w[k] = v if v > 0.0 else 0.0
    return w


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
