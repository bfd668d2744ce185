"""
Shortest-path features and training pairs.

For points i, j sitting on nodes a, b the feature ``z_ij`` is the 0/1
indicator of the nodes strictly below the lowest common ancestor on the
a-b path, i.e. the symmetric difference of their ancestor sets.  For any
weight vector ``w``, ``w @ z_ij`` is the tree distance between i and j.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _accel, _kernels
from .data import PointCloud, check_metric, paired_distances
from .tree import Tree


@dataclass(frozen=True)
class PairSample:
    """Unordered point pairs (``i < j``) with their ground distances."""

    i: np.ndarray
    j: np.ndarray
    targets: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.int64)
        j = np.asarray(self.j, dtype=np.int64)
        t = np.asarray(self.targets, dtype=np.float64)
        if not (i.shape == j.shape == t.shape) or i.ndim != 1:
            raise ValueError("i, j and targets must be 1-D arrays of equal length")
        if np.any(i >= j):
            raise ValueError("pairs must satisfy i < j")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValueError("targets must be finite and non-negative")
        for name, a in (("i", i), ("j", j), ("targets", t)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.i.size

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.i, self.j])


def _decode_pairs(k, n):
    """Linear index over ``{(i, j): 0 <= i < j < n}`` in row-major order -> (i, j)."""
    rows = np.arange(n - 1, dtype=np.int64)
    offsets = rows * (2 * n - rows - 1) // 2
    i = np.searchsorted(offsets, k, side="right") - 1
    j = k - offsets[i] + i + 1
    return i, j


def sample_index_pairs(n: int, m: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """``min(m, n(n-1)/2)`` distinct unordered pairs, uniform, sorted."""
    if n < 1:
        raise ValueError("need at least one point")
    if m < 1:
        raise ValueError("need m >= 1")
    total = n * (n - 1) // 2
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    if m >= total:
        k = np.arange(total, dtype=np.int64)
    else:
        rng = np.random.default_rng(seed)
        k = np.sort(rng.choice(total, size=m, replace=False))
    return _decode_pairs(k, n)


def sample_pairs(cloud: PointCloud, metric: str, m: int, seed) -> PairSample:
    check_metric(metric)
    i, j = sample_index_pairs(cloud.n_points, m, seed)
    return PairSample(i, j, paired_distances(metric, cloud.coords, i, j), seed)


def path_feature(tree: Tree, i: int, j: int) -> np.ndarray:
    """Sorted node ids with ``z_ij = 1``; empty when i and j share a node."""
    a, b = tree.nodes_of([i, j])
    indptr, indices = _path_arrays(tree, np.array([a]), np.array([b]))
    return indices


def _path_arrays(tree, node_a, node_b):
    if _accel.USE_NUMBA:
        return _kernels.path_features_nb(tree.parent, tree.depth, node_a, node_b)
    return _kernels.path_features_np(tree.ancestors, node_a, node_b)


def feature_matrix(tree: Tree, i, j) -> sp.csr_matrix:
    """Row k is ``z_{i[k], j[k]}`` as a 0/1 CSR matrix with ``tree.n_nodes`` columns."""
    node_a = tree.nodes_of(i)
    node_b = tree.nodes_of(j)
    indptr, indices = _path_arrays(tree, node_a, node_b)
    data = np.ones(indices.size, dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(node_a.size, tree.n_nodes))
