"""
Rooted weighted trees and the tree-Wasserstein distance.

A tree is stored as three flat arrays.  Node ids are topologically ordered
(``parent[v] < v``, node 0 is the root).  ``weight[v]`` is the length of the
edge from ``v`` to its parent; the root entry is pinned to zero and never
read.  ``node_of_point[p]`` is the node carrying point ``p`` (``-1`` if the
point is not in the tree).  Builders always attach points to leaves; after
:func:`prune_zero_weights` a point may sit on an internal node, which the
distance formulas handle unchanged.

Tree file::

    N M
    node_id parent_id weight      (N lines, root parent_id = -1)
    node_id point_index           (M lines, one per mapped point)
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _accel, _kernels
from .data import FormatError, Measure, fmt


class TreeError(ValueError):
    pass


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).ravel()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Tree:
    """Immutable rooted tree with per-node edge weights and a point map."""

    parent: np.ndarray
    weight: np.ndarray
    node_of_point: np.ndarray

    def __post_init__(self):
        parent = _frozen(self.parent, np.int64)
        weight = np.array(self.weight, dtype=np.float64, copy=True).ravel()
        nop = _frozen(self.node_of_point, np.int64)
        n = parent.size
        if n == 0:
            raise TreeError("tree has no nodes")
        if weight.size != n:
            raise TreeError(f"{weight.size} weights for {n} nodes")
        if parent[0] != -1:
            raise TreeError("node 0 must be the root (parent -1)")
        if n > 1:
            rest = parent[1:]
            if np.any(rest == -1):
                raise TreeError("multiple roots")
            if np.any(rest < 0) or np.any(rest >= np.arange(1, n)):
                raise TreeError("parent links must satisfy 0 <= parent[v] < v")
        if not np.all(np.isfinite(weight)) or np.any(weight < 0):
            raise TreeError("weights must be finite and non-negative")
        weight[0] = 0.0
        weight.setflags(write=False)
        if nop.size and (nop.max() >= n or np.any(nop < -1)):
            raise TreeError("point map references a missing node")
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "node_of_point", nop)
        object.__setattr__(self, "_local", threading.local())

    # -- structure ------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.parent.size

    @property
    def n_points(self) -> int:
        return self.node_of_point.size

    @cached_property
    def depth(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        p = self.parent
        for v in range(1, self.n_nodes):
            d[v] = d[p[v]] + 1
        d.setflags(write=False)
        return d

    @property
    def height(self) -> int:
        return int(self.depth.max())

    @cached_property
    def n_children(self) -> np.ndarray:
        return np.bincount(self.parent[1:], minlength=self.n_nodes)

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.n_children == 0)

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.n_children == 0))

    @cached_property
    def ancestors(self) -> np.ndarray:
        """``ancestors[v, l]``: ancestor of ``v`` at depth ``l`` (-1 below ``v``)."""
        a = _kernels.ancestor_table(self.parent, self.depth)
        a.setflags(write=False)
        return a

    @property
    def n_nonzero(self) -> int:
        """Non-root nodes with a strictly positive weight."""
        return int(np.count_nonzero(self.weight[1:] > 0))

    def with_weights(self, weight) -> "Tree":
        return Tree(self.parent, weight, self.node_of_point)

    def nodes_of(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.int64)
        if points.size and (points.min() < 0 or points.max() >= self.n_points):
            raise TreeError("point has no node in this tree")
        nodes = self.node_of_point[points]
        if np.any(nodes < 0):
            raise TreeError("point has no node in this tree")
        return nodes

    def same_as(self, other: "Tree") -> bool:
        return (
            np.array_equal(self.parent, other.parent)
            and np.array_equal(self.weight, other.weight)
            and np.array_equal(self.node_of_point, other.node_of_point)
        )

    def accumulator(self) -> "SubtreeMassAccumulator":
        """Scratch buffers owned by the calling thread."""
        acc = getattr(self._local, "acc", None)
        if acc is None:
            acc = SubtreeMassAccumulator(self.n_nodes)
            self._local.acc = acc
        return acc


class SubtreeMassAccumulator:
    """Per-thread scratch for the numba TWD kernel.

    The kernel re-zeroes only the nodes it touched, so a query costs
    O(sum of support path lengths) regardless of the tree size.
    """

    def __init__(self, n_nodes):
        self.buf = np.zeros(n_nodes, dtype=np.float64)
        self.mark = np.zeros(n_nodes, dtype=np.uint8)
        self.touched = np.empty(n_nodes, dtype=np.int64)


# ----------------------------------------------------------------------------
# queries
# ----------------------------------------------------------------------------


def ancestor_set(tree: Tree, point: int) -> list[int]:
    """Node ids from the point's node up to and including the root."""
    v = int(tree.nodes_of([point])[0])
    path = []
    while v >= 0:
        path.append(v)
        v = int(tree.parent[v])
    return path


def tree_distance(tree: Tree, i: int, j: int) -> float:
    """Length of the tree path between the nodes carrying points i and j."""
    a, b = (int(v) for v in tree.nodes_of([i, j]))
    p, d, w = tree.parent, tree.depth, tree.weight
    total = 0.0
    while a != b:
        if d[a] >= d[b]:
            total += w[a]
            a = p[a]
        else:
            total += w[b]
            b = p[b]
    return float(total)


def _signed(tree, mu, nu):
    if mu is nu or (np.array_equal(mu.indices, nu.indices) and np.array_equal(mu.masses, nu.masses)):
        # exact zero instead of cancellation round-off (points are still checked)
        tree.nodes_of(mu.indices)
        return np.empty(0, dtype=np.int64), np.empty(0)
    nodes = np.concatenate([tree.nodes_of(mu.indices), tree.nodes_of(nu.indices)])
    mass = np.concatenate([mu.masses, -nu.masses])
    return nodes, mass


def twd(tree: Tree, mu: Measure, nu: Measure, acc: SubtreeMassAccumulator | None = None) -> float:
    r"""Tree-Wasserstein distance between two measures.

    .. math::
        W_T(\mu, \nu) = \sum_{v \neq root} w_v |\mu(\Gamma(v)) - \nu(\Gamma(v))|

    Only ancestors of support nodes are visited.
    """
    nodes, mass = _signed(tree, mu, nu)
    if _accel.USE_NUMBA:
        acc = acc or tree.accumulator()
        return float(
            _kernels.twd_nb(tree.parent, tree.weight, nodes, mass, acc.buf, acc.mark, acc.touched)
        )
    return _kernels.twd_np(tree.ancestors, tree.weight, nodes, mass)


def twd_many(tree: Tree, pairs: Sequence[tuple[Measure, Measure]]) -> np.ndarray:
    """TWD for a batch of measure pairs (one kernel call on the numba path)."""
    chunks_n, chunks_m = [], []
    ptr = np.zeros(len(pairs) + 1, dtype=np.int64)
    for q, (mu, nu) in enumerate(pairs):
        nodes, mass = _signed(tree, mu, nu)
        chunks_n.append(nodes)
        chunks_m.append(mass)
        ptr[q + 1] = ptr[q] + nodes.size
    if not pairs:
        return np.empty(0)
    q_nodes = np.concatenate(chunks_n)
    q_mass = np.concatenate(chunks_m)
    if _accel.USE_NUMBA:
        acc = tree.accumulator()
        return _kernels.twd_batch_nb(
            tree.parent, tree.weight, ptr, q_nodes, q_mass, acc.buf, acc.mark, acc.touched
        )
    return _kernels.twd_batch_np(tree.ancestors, tree.weight, ptr, q_nodes, q_mass)


# ----------------------------------------------------------------------------
# pruning
# ----------------------------------------------------------------------------


def prune_zero_weights(tree: Tree) -> Tree:
    """Contract every non-root edge of weight zero into its parent.

    Tree distances between all mapped points are unchanged.  The result has
    ``tree.n_nonzero + 1`` nodes.
    """
    keep = tree.weight > 0
    keep[0] = True
    if keep.all():
        return tree
    n = tree.n_nodes
    rep = np.empty(n, dtype=np.int64)
    parent = tree.parent
    for v in range(n):
        rep[v] = v if keep[v] else rep[parent[v]]
    new_id = np.full(n, -1, dtype=np.int64)
    kept = np.flatnonzero(keep)
    new_id[kept] = np.arange(kept.size)
    new_parent = np.full(kept.size, -1, dtype=np.int64)
    new_parent[1:] = new_id[rep[parent[kept[1:]]]]
    nop = tree.node_of_point
    new_nop = np.where(nop >= 0, new_id[rep[np.maximum(nop, 0)]], -1)
    return Tree(new_parent, tree.weight[kept], new_nop)


# ----------------------------------------------------------------------------
# serialisation
# ----------------------------------------------------------------------------


def format_tree(tree: Tree) -> str:
    mapped = np.flatnonzero(tree.node_of_point >= 0)
    out = [f"{tree.n_nodes} {mapped.size}"]
    for v, (p, w) in enumerate(zip(tree.parent.tolist(), tree.weight.tolist())):
        out.append(f"{v} {p} {fmt(w)}")
    for pt in mapped.tolist():
        out.append(f"{int(tree.node_of_point[pt])} {pt}")
    return "\n".join(out) + "\n"


def save_tree(path, tree: Tree):
    Path(path).write_text(format_tree(tree))


def parse_tree(text: str, path=None) -> Tree:
    lines = [ln for ln in text.splitlines()]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise FormatError("empty tree file", path, None)
    head = lines[0].split()
    if len(head) != 2:
        raise FormatError("header must be 'N M'", path, 1)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise FormatError("header must be two integers", path, 1) from None
    if n < 1 or m < 0:
        raise FormatError("need N >= 1 and M >= 0", path, 1)
    if len(lines) != 1 + n + m:
        raise FormatError(f"expected {1 + n + m} lines, found {len(lines)}", path, None)

    parent = np.full(n, -2, dtype=np.int64)
    weight = np.zeros(n, dtype=np.float64)
    for k in range(n):
        lineno = k + 2
        toks = lines[k + 1].split()
        if len(toks) != 3:
            raise FormatError("node line must be 'node_id parent_id weight'", path, lineno)
        try:
            v, p, w = int(toks[0]), int(toks[1]), float(toks[2])
        except ValueError:
            raise FormatError("malformed node line", path, lineno) from None
        if not 0 <= v < n:
            raise FormatError(f"node id {v} out of range", path, lineno)
        if parent[v] != -2:
            raise FormatError(f"node {v} listed twice", path, lineno)
        if not -1 <= p < n:
            raise FormatError(f"parent id {p} out of range", path, lineno)
        if not np.isfinite(w) or w < 0:
            raise FormatError("weight must be finite and non-negative", path, lineno)
        parent[v], weight[v] = p, w
    roots = np.flatnonzero(parent == -1)
    if roots.size != 1:
        raise FormatError(f"expected exactly one root, found {roots.size}", path, None)
    if _has_cycle(parent):
        raise FormatError("parent links contain a cycle", path, None)
    if roots[0] != 0 or np.any(parent[1:] >= np.arange(1, n)):
        raise FormatError("nodes are not topologically ordered", path, None)

    pts = []
    for k in range(m):
        lineno = n + k + 2
        toks = lines[n + k + 1].split()
        if len(toks) != 2:
            raise FormatError("map line must be 'node_id point_index'", path, lineno)
        try:
            v, pt = int(toks[0]), int(toks[1])
        except ValueError:
            raise FormatError("malformed map line", path, lineno) from None
        if not 0 <= v < n or pt < 0:
            raise FormatError("map line out of range", path, lineno)
        pts.append((pt, v, lineno))
    size = max((pt for pt, _, _ in pts), default=-1) + 1
    nop = np.full(size, -1, dtype=np.int64)
    for pt, v, lineno in pts:
        if nop[pt] != -1:
            raise FormatError(f"point {pt} mapped twice", path, lineno)
        nop[pt] = v
    try:
        return Tree(parent, weight, nop)
    except TreeError as exc:
        raise FormatError(str(exc), path, None) from None


def _has_cycle(parent):
    n = parent.size
    state = np.zeros(n, dtype=np.int8)  # 0 new, 1 on stack, 2 done
    for start in range(n):
        v = start
        trail = []
        while v >= 0 and state[v] == 0:
            state[v] = 1
            trail.append(v)
            v = parent[v]
        if v >= 0 and state[v] == 1:
            return True
        for u in trail:
            state[u] = 2
    return False


def load_tree(path) -> Tree:
    path = Path(path)
    return parse_tree(path.read_text(), path)
