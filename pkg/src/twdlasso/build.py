"""
Tree embeddings of a point cloud.

* :func:`build_quadtree` - randomly shifted hypercube subdivision; only
  occupied cells become nodes, so the node count stays below
  ``n_points * max_depth + 1`` even in hundreds of dimensions.
* :func:`build_clustertree` - recursive farthest-point clustering.

Both are deterministic functions of ``(cloud, config)``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .data import PointCloud, check_metric, pairwise_distances
from .tree import Tree

DEFAULT_DEPTH = 6
DEFAULT_BRANCHING = 4


@dataclass(frozen=True)
class QuadTreeConfig:
    max_depth: int = DEFAULT_DEPTH
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass(frozen=True)
class ClusterTreeConfig:
    branching: int = DEFAULT_BRANCHING
    max_depth: int = DEFAULT_DEPTH
    seed: int = 0
    metric: str = "euclidean"

    def __post_init__(self):
        if self.branching < 2:
            raise ValueError("branching must be >= 2")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        check_metric(self.metric)


def random_shift(seed: int, lo, hi) -> np.ndarray:
    """Per-dimension offsets uniform in ``[0, side)``, ``side`` the box's longest edge."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    side = float(np.max(hi - lo)) if lo.size else 0.0
    if side <= 0:
        return np.zeros(lo.shape)
    return np.random.default_rng(seed).uniform(0.0, side, size=lo.shape)


def _distinct_ids(coords):
    _, inv = np.unique(coords, axis=0, return_inverse=True)
    return inv.ravel()


def build_quadtree(cloud: PointCloud, cfg: QuadTreeConfig = QuadTreeConfig(), shift=None) -> Tree:
    """Randomly shifted QuadTree with default weights ``2**-depth``.

    The root cell is a cube of side ``2 * s`` (``s`` the longest edge of the
    bounding box) whose corner sits at ``min(X) - shift``; every point then
    lies inside it for any shift in ``[0, s)``.  A cell is split at its
    midpoint along every dimension while it holds more than one distinct
    point and is shallower than ``max_depth``.  The root is always split so
    that even a single point gets its own leaf at depth 1.

    ``shift`` overrides the seeded offsets (mainly for hand-checked cases).
    """
    X = cloud.coords
    n = cloud.n_points
    lo, hi = X.min(axis=0), X.max(axis=0)
    if shift is None:
        shift = random_shift(cfg.seed, lo, hi)
    shift = np.broadcast_to(np.asarray(shift, dtype=np.float64), lo.shape)
    side = float(np.max(hi - lo))
    span = 2.0 * side if side > 0 else 1.0
    rel = (X - (lo - shift)) / span  # in [0, 1)
    distinct = _distinct_ids(X)

    parent = [-1]
    depth = [0]
    node = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    for level in range(1, cfg.max_depth + 1):
        if active.size == 0:
            break
        cells = 1 << level
        coords = np.floor(rel[active] * cells).astype(np.int64)
        np.clip(coords, 0, cells - 1, out=coords)
        keys = np.column_stack([node[active], coords])
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        first = len(parent)
        parent.extend(uniq[:, 0].tolist())
        depth.extend([level] * uniq.shape[0])
        node[active] = first + inv
        if level == cfg.max_depth:
            break
        # keep splitting cells that still hold two or more distinct points
        pairs = np.unique(np.column_stack([inv, distinct[active]]), axis=0)
        n_distinct = np.bincount(pairs[:, 0], minlength=uniq.shape[0])
        active = active[n_distinct[inv] > 1]

    depth = np.asarray(depth)
    tree = Tree(np.asarray(parent), np.exp2(-depth.astype(np.float64)), node)
    _check_builder_output(tree)
    return tree


def build_clustertree(cloud: PointCloud, cfg: ClusterTreeConfig = ClusterTreeConfig()) -> Tree:
    """Hierarchical farthest-point clustering.

    At each node: the first center is a seeded uniform pick among the node's
    distinct points; each further center maximises the distance to the
    centers chosen so far (lowest index wins ties).  Points join the nearest
    center (lowest center wins ties).  A child's default weight is the
    distance between its center and its parent's center; the root's center
    is the first center picked at the root.
    """
    metric = cfg.metric
    uniq, inv = np.unique(cloud.coords, axis=0, return_inverse=True)
    inv = inv.ravel()
    rng = np.random.default_rng(cfg.seed)

    parent = [-1]
    weight = [0.0]
    node_of_distinct = np.zeros(uniq.shape[0], dtype=np.int64)
    # (node id, member distinct ids, center distinct id or -1, depth)
    queue = deque([(0, np.arange(uniq.shape[0]), -1, 0)])
    while queue:
        nid, members, center, level = queue.popleft()
        if level == cfg.max_depth or (members.size == 1 and nid != 0):
            node_of_distinct[members] = nid
            continue
        centers = _farthest_point_centers(uniq, members, cfg.branching, rng, metric)
        if center < 0:
            center = centers[0]
        assign = np.argmin(pairwise_distances(metric, uniq[members], uniq[centers]), axis=1)
        cw = pairwise_distances(metric, uniq[[center]], uniq[centers])[0]
        for c in range(centers.size):
            sub = members[assign == c]
            cid = len(parent)
            parent.append(nid)
            weight.append(float(cw[c]))
            queue.append((cid, sub, centers[c], level + 1))

    tree = Tree(np.asarray(parent), np.asarray(weight), node_of_distinct[inv])
    _check_builder_output(tree)
    return tree


def _farthest_point_centers(points, members, k, rng, metric):
    first = members[rng.integers(members.size)]
    centers = [first]
    mind = pairwise_distances(metric, points[members], points[[first]])[:, 0]
    while len(centers) < k:
        far = int(np.argmax(mind))
        if mind[far] <= 0:
            break
        centers.append(members[far])
        np.minimum(mind, pairwise_distances(metric, points[members], points[[members[far]]])[:, 0], out=mind)
    return np.asarray(centers, dtype=np.int64)


def _check_builder_output(tree: Tree):
    nop = tree.node_of_point
    if np.any(nop < 0):
        raise AssertionError("builder left a point unmapped")
    leaves = tree.n_children == 0
    if not np.all(leaves[nop]):
        raise AssertionError("builder mapped a point to an internal node")
    carried = np.zeros(tree.n_nodes, dtype=bool)
    carried[nop] = True
    if np.any(leaves & ~carried):
        raise AssertionError("builder produced an empty leaf")


def build_tree(cloud: PointCloud, method: str, *, max_depth: int = DEFAULT_DEPTH,
               branching: int = DEFAULT_BRANCHING, seed: int = 0,
               metric: str = "euclidean") -> Tree:
    if method == "quadtree":
        return build_quadtree(cloud, QuadTreeConfig(max_depth=max_depth, seed=seed))
    if method == "cluster":
        return build_clustertree(
            cloud, ClusterTreeConfig(branching=branching, max_depth=max_depth, seed=seed, metric=metric)
        )
    raise ValueError(f"unknown tree method {method!r}; expected 'quadtree' or 'cluster'")
