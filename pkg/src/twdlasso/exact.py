"""
Exact discrete optimal transport at desk scale, and the tree induced by an
optimal plan.

:func:`exact_w1` runs the transportation simplex (u-v potentials on a
spanning-tree basis, Bland's smallest-index rule for both the entering and
leaving cell) from a north-west-corner start.  The returned plan is basic,
so its support graph is a forest with at most ``n + m - 1`` edges.

:func:`tree_from_plan` turns that forest into a weighted tree whose
tree-Wasserstein distance reproduces the optimal cost exactly.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .data import Measure, PointCloud, check_metric, pairwise_distances
from .tree import Tree

MAX_SUPPORT = 4096


class CyclicPlanError(ValueError):
    """The plan's support graph has a cycle (not a basic solution)."""


@dataclass(frozen=True)
class TransportPlan:
    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    shape: tuple

    def __len__(self):
        return self.rows.size

    @property
    def entries(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.mass.tolist()))

    def dense(self) -> np.ndarray:
        P = np.zeros(self.shape)
        P[self.rows, self.cols] = self.mass
        return P


@dataclass(frozen=True)
class ExactW1Result:
    value: float
    plan: TransportPlan
    pivots: int = 0


def _as_mass(x):
    if isinstance(x, Measure):
        return np.asarray(x.masses, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0 or np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("masses must be finite, non-negative and non-empty")
    return x


def _northwest_corner(a, b):
    n, m = a.size, b.size
    flow = np.zeros((n, m))
    basic = np.zeros((n, m), dtype=bool)
    sa, sb = a.copy(), b.copy()
    i = j = 0
    while True:
        q = min(sa[i], sb[j])
        flow[i, j] = q
        basic[i, j] = True
        sa[i] -= q
        sb[j] -= q
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif sa[i] <= sb[j]:
            i += 1
        else:
            j += 1
    return flow, basic


def _basis_tree(basic, n, m):
    """BFS over the basis graph from row 0: (parent node, depth, order).

    Graph nodes are rows ``0..n-1`` and columns ``n..n+m-1``.
    """
    adj = [[] for _ in range(n + m)]
    for r, c in zip(*np.nonzero(basic)):
        adj[r].append(n + c)
        adj[n + c].append(r)
    parent = np.full(n + m, -1, dtype=np.int64)
    depth = np.full(n + m, -1, dtype=np.int64)
    depth[0] = 0
    order = [0]
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if depth[y] < 0:
                depth[y] = depth[x] + 1
                parent[y] = x
                order.append(y)
                queue.append(y)
    return parent, depth, order


def exact_w1(mu, nu, cost, max_support: int = MAX_SUPPORT) -> ExactW1Result:
    """Optimal transport cost and a basic optimal plan.

    Parameters
    ----------
    mu, nu : Measure or array-like
        Source and target masses (equal totals).
    cost : array-like, shape (len(mu), len(nu))
        Finite, non-negative ground costs between the two supports.
    """
    a, b = _as_mass(mu), _as_mass(nu)
    C = np.asarray(cost, dtype=np.float64)
    n, m = a.size, b.size
    if C.shape != (n, m):
        raise ValueError(f"cost has shape {C.shape}, expected {(n, m)}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost must be finite")
    if n + m > max_support:
        raise ValueError(f"combined support {n + m} exceeds the limit of {max_support}")
    if abs(a.sum() - b.sum()) > 1e-6 * max(1.0, a.sum()):
        raise ValueError("source and target masses differ")

    flow, basic = _northwest_corner(a, b)
    eps = 1e-12 * max(1.0, float(np.abs(C).max()))
    pivots = 0
    while True:
        parent, depth, order = _basis_tree(basic, n, m)
        pot = np.zeros(n + m)
        for x in order[1:]:
            p = parent[x]
            if x >= n:  # column: v_c = C[r, c] - u_r
                pot[x] = C[p, x - n] - pot[p]
            else:
                pot[x] = C[x, p - n] - pot[p]
        reduced = C - pot[:n, None] - pot[None, n:]
        reduced[basic] = 0.0
        cand = np.flatnonzero(reduced.ravel() < -eps)
        if cand.size == 0:
            break
        ei, ej = divmod(int(cand[0]), m)

        # basis path from row ei to column ej
        x, y = ei, n + ej
        left, right = [x], [y]
        while x != y:
            if depth[x] >= depth[y]:
                x = parent[x]
                left.append(x)
            else:
                y = parent[y]
                right.append(y)
        path = left + right[-2::-1]
        cells = []
        for t in range(1, len(path)):
            u, v = path[t - 1], path[t]
            r, c = (u, v - n) if u < n else (v, u - n)
            cells.append((r, c))
        minus = cells[0::2]
        plus = cells[1::2]
        theta = min(flow[r, c] for r, c in minus)
        leave = min((r * m + c for r, c in minus if flow[r, c] == theta))
        for r, c in minus:
            flow[r, c] -= theta
        for r, c in plus:
            flow[r, c] += theta
        flow[ei, ej] = theta
        lr, lc = divmod(leave, m)
        flow[lr, lc] = 0.0
        basic[lr, lc] = False
        basic[ei, ej] = True
        pivots += 1

    rows, cols = np.nonzero(basic & (flow > 0))
    mass = flow[rows, cols]
    value = float(np.dot(mass, C[rows, cols]))
    return ExactW1Result(value, TransportPlan(rows, cols, mass, (n, m)), pivots)


def measure_cost(cloud: PointCloud, mu: Measure, nu: Measure, metric: str = "euclidean"):
    check_metric(metric)
    return pairwise_distances(metric, cloud.coords[mu.indices], cloud.coords[nu.indices])


def w1(cloud: PointCloud, mu: Measure, nu: Measure, metric: str = "euclidean") -> float:
    """1-Wasserstein distance between two measures on a point cloud."""
    return exact_w1(mu, nu, measure_cost(cloud, mu, nu, metric)).value


# ----------------------------------------------------------------------------
# tree induced by an optimal plan
# ----------------------------------------------------------------------------


def _check_forest(plan: TransportPlan):
    n, m = plan.shape
    uf = np.arange(n + m)

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    for r, c in zip(plan.rows.tolist(), plan.cols.tolist()):
        x, y = find(r), find(n + c)
        if x == y:
            raise CyclicPlanError("plan support contains a cycle; expected a basic plan")
        uf[x] = y


def _forest_path(adj, edges, src, dst):
    """Edge ids on the forest path src -> dst, or None."""
    prev = {src: None}
    queue = deque([src])
    while queue:
        x = queue.popleft()
        if x == dst:
            break
        for e in adj[x]:
            s, r = edges[e][0], edges[e][1]
            y = r if s == x else s
            if y not in prev:
                prev[y] = (x, e)
                queue.append(y)
    if dst not in prev:
        return None
    out = []
    x = dst
    while prev[x] is not None:
        x, e = prev[x]
        out.append(e)
    return out[::-1]


def tree_from_plan(plan: TransportPlan, cost, row_points=None, col_points=None) -> Tree:
    """Weighted tree on the support points of a basic optimal plan.

    Every plan entry ``(i, j)`` becomes a direct edge of length
    ``cost[i, j]``, so ``twd(tree, mu, nu)`` equals the plan's cost.

    Points are numbered ``0..n-1`` for the rows and ``n..n+m-1`` for the
    columns unless ``row_points`` / ``col_points`` give explicit point ids.
    A point present on both sides becomes a single node; if that closes a
    cycle, flow is shifted around the cycle in the non-increasing-cost
    direction until one edge empties, which keeps the total cost optimal.
    Disconnected components hang off an extra zero-weight root.
    """
    _check_forest(plan)
    C = np.asarray(cost, dtype=np.float64)
    n, m = plan.shape
    rp = np.arange(n) if row_points is None else np.asarray(row_points, dtype=np.int64)
    cp = n + np.arange(m) if col_points is None else np.asarray(col_points, dtype=np.int64)
    if rp.size != n or cp.size != m:
        raise ValueError("point id arrays do not match the plan shape")

    # edges[e] = [sender, receiver, length, flow]
    edges: dict[int, list] = {}
    adj: dict[int, set] = {int(p): set() for p in np.concatenate([rp, cp]).tolist()}
    for eid, (r, c, f) in enumerate(plan.entries):
        s, t = int(rp[r]), int(cp[c])
        if s == t:
            continue
        edges[eid] = [s, t, float(C[r, c]), float(f)]
        path = _forest_path(adj, edges, t, s)
        if path is not None:
            hit = _cancel_cycle(edges, eid, s, path)
            if hit == eid:
                del edges[eid]
                continue
            adj[edges[hit][0]].discard(hit)
            adj[edges[hit][1]].discard(hit)
            del edges[hit]
        adj[s].add(eid)
        adj[t].add(eid)

    return _root_forest(adj, edges)


def _cancel_cycle(edges, new, start, path):
    """Shift flow around the cycle ``new`` + ``path`` until one edge empties.

    The cycle is walked starting at ``start`` (sender of ``new``).
    """
    walk = [(new, True)]
    x = edges[new][1]
    for e in path:
        s, r = edges[e][0], edges[e][1]
        walk.append((e, s == x))
        x = r if s == x else s
    along = [e for e, fwd in walk if fwd]
    against = [e for e, fwd in walk if not fwd]
    delta = sum(edges[e][2] for e in along) - sum(edges[e][2] for e in against)
    if delta < 0 or (delta == 0 and against):
        up, down = along, against
    else:
        up, down = against, along
    eps = min(edges[e][3] for e in down)
    hit = min((e for e in down if edges[e][3] == eps), key=lambda e: (e != new, e))
    for e in up:
        edges[e][3] += eps
    for e in down:
        edges[e][3] -= eps
    edges[hit][3] = 0.0
    return hit


def _root_forest(adj, edges):
    nodes = sorted(adj)
    seen = set()
    comps = []
    for start in nodes:
        if start in seen:
            continue
        seen.add(start)
        order, par, wts = [start], [None], [0.0]
        queue = deque([start])
        while queue:
            x = queue.popleft()
            nbrs = []
            for e in adj[x]:
                s, r, length = edges[e][0], edges[e][1], edges[e][2]
                nbrs.append((r if s == x else s, length))
            for y, length in sorted(nbrs):
                if y not in seen:
                    seen.add(y)
                    order.append(y)
                    par.append(x)
                    wts.append(length)
                    queue.append(y)
        comps.append((order, par, wts))

    offset = 1 if len(comps) > 1 else 0
    node_id = {}
    parent, weight = ([-1], [0.0]) if offset else ([], [])
    for order, par, wts in comps:
        for x, p, w in zip(order, par, wts):
            node_id[x] = len(parent)
            if p is None:
                parent.append(0 if offset else -1)
                weight.append(0.0)
            else:
                parent.append(node_id[p])
                weight.append(w)
    nop = np.full(max(nodes) + 1, -1, dtype=np.int64)
    for x, v in node_id.items():
        nop[x] = v
    return Tree(np.asarray(parent), np.asarray(weight), nop)
