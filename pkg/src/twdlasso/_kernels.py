"""
Inner loops for tree-Wasserstein evaluation, path features and the
non-negative Lasso coordinate descent.

Each kernel exists twice: ``*_nb`` (compiled with numba) and ``*_np``
(vectorised numpy, no compilation).  ``twdlasso._accel.USE_NUMBA`` decides
which one the public modules call.  Both take plain arrays so they can be
benchmarked against each other directly.

Trees are given as ``parent`` (int64, root = -1, parents before children)
and, for the numpy path, ``anc`` (ancestor table, ``anc[v, l]`` is the
ancestor of ``v`` at depth ``l`` or -1 when ``l > depth[v]``).
"""
import numpy as np

from ._accel import njit

# ----------------------------------------------------------------------------
# ancestor table (shared by the numpy kernels)
# ----------------------------------------------------------------------------


def ancestor_table(parent, depth):
    n = parent.size
    h = int(depth.max()) + 1 if n else 1
    anc = np.full((n, h), -1, dtype=np.int64)
    for level in range(h):
        nodes = np.flatnonzero(depth == level)
        if level:
            anc[nodes, :level] = anc[parent[nodes], :level]
        anc[nodes, level] = nodes
    return anc


# ----------------------------------------------------------------------------
# tree-Wasserstein: sum_v w_v |mu(subtree v) - nu(subtree v)|
# ----------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def twd_nb(parent, weight, nodes, signed_mass, buf, mark, touched):
    # buf/mark are all-zero on entry and are left all-zero on exit;
    # only the ancestors of the support nodes are ever written.
    n_touched = 0
    for s in range(nodes.size):
        v = nodes[s]
        m = signed_mass[s]
        while v >= 0:
            if mark[v] == 0:
                mark[v] = 1
                touched[n_touched] = v
                n_touched += 1
            buf[v] += m
            v = parent[v]
    total = 0.0
    for t in range(n_touched):
        v = touched[t]
        if parent[v] >= 0:
            total += weight[v] * abs(buf[v])
        buf[v] = 0.0
        mark[v] = 0
    return total


def twd_np(anc, weight, nodes, signed_mass):
    rows = anc[nodes]
    valid = rows >= 0
    flat = rows[valid]
    mass = np.broadcast_to(signed_mass[:, None], rows.shape)[valid]
    uniq, inv = np.unique(flat, return_inverse=True)
    sub = np.bincount(inv, weights=mass, minlength=uniq.size)
    # weight[root] is zero by construction of Tree; it is also skipped by the numba kernel
    return float(np.dot(weight[uniq], np.abs(sub)))


@njit(cache=True, nogil=True)
def twd_batch_nb(parent, weight, q_ptr, q_nodes, q_mass, buf, mark, touched):
    n_q = q_ptr.size - 1
    out = np.empty(n_q, dtype=np.float64)
    for q in range(n_q):
        s, e = q_ptr[q], q_ptr[q + 1]
        out[q] = twd_nb(parent, weight, q_nodes[s:e], q_mass[s:e], buf, mark, touched)
    return out


def twd_batch_np(anc, weight, q_ptr, q_nodes, q_mass):
    out = np.empty(q_ptr.size - 1, dtype=np.float64)
    for q in range(out.size):
        s, e = q_ptr[q], q_ptr[q + 1]
        out[q] = twd_np(anc, weight, q_nodes[s:e], q_mass[s:e])
    return out


# ----------------------------------------------------------------------------
# path features: nodes strictly below the LCA on the path between two nodes
# ----------------------------------------------------------------------------


@njit(cache=True)
def _path_walk(parent, depth, a, b, out, pos):
    while depth[a] > depth[b]:
        out[pos] = a
        pos += 1
        a = parent[a]
    while depth[b] > depth[a]:
        out[pos] = b
        pos += 1
        b = parent[b]
    while a != b:
        out[pos] = a
        out[pos + 1] = b
        pos += 2
        a = parent[a]
        b = parent[b]
    return pos


@njit(cache=True)
def _path_len(parent, depth, a, b):
    n = 0
    while depth[a] > depth[b]:
        n += 1
        a = parent[a]
    while depth[b] > depth[a]:
        n += 1
        b = parent[b]
    while a != b:
        n += 2
        a = parent[a]
        b = parent[b]
    return n


@njit(cache=True)
def path_features_nb(parent, depth, node_a, node_b):
    m = node_a.size
    indptr = np.zeros(m + 1, dtype=np.int64)
    for k in range(m):
        indptr[k + 1] = indptr[k] + _path_len(parent, depth, node_a[k], node_b[k])
    indices = np.empty(indptr[m], dtype=np.int64)
    for k in range(m):
        _path_walk(parent, depth, node_a[k], node_b[k], indices, indptr[k])
        _insertion_sort(indices, indptr[k], indptr[k + 1])
    return indptr, indices


@njit(cache=True)
def _insertion_sort(a, lo, hi):
    # rows hold at most 2 * height entries, where this beats a general sort
    for i in range(lo + 1, hi):
        x = a[i]
        j = i - 1
        while j >= lo and a[j] > x:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = x


def path_features_np(anc, node_a, node_b):
    A = anc[node_a]
    B = anc[node_b]
    differ = A != B
    take_a = differ & (A >= 0)
    take_b = differ & (B >= 0)
    counts = take_a.sum(axis=1) + take_b.sum(axis=1)
    indptr = np.zeros(node_a.size + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    both = np.concatenate([np.where(take_a, A, -1), np.where(take_b, B, -1)], axis=1)
    both.sort(axis=1)
    indices = both[both >= 0]
    return indptr, indices


# ----------------------------------------------------------------------------
# non-negative Lasso, cyclic coordinate descent on
#   sum_p (t_p - z_p . w)^2 + lam * sum_k w_k,  w >= 0
# columns are given in CSC form with unit entries
# ----------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def cd_nb(col_ptr, col_rows, w, resid, lam, tol, max_sweeps, history):
    n_cols = col_ptr.size - 1
    half_lam = 0.5 * lam
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        max_delta = 0.0
        for k in range(n_cols):
            s = col_ptr[k]
            e = col_ptr[k + 1]
            a = e - s
            if a == 0:
                w[k] = 0.0
                continue
            r = 0.0
            for p in range(s, e):
                r += resid[col_rows[p]]
            new = (r + a * w[k] - half_lam) / a
            if new < 0.0:
                new = 0.0
            delta = new - w[k]
            if delta != 0.0:
                for p in range(s, e):
                    resid[col_rows[p]] -= delta
                w[k] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        obj = 0.0
        for p in range(resid.size):
            obj += resid[p] * resid[p]
        l1 = 0.0
        for k in range(n_cols):
            l1 += w[k]
        history[sweeps] = obj + lam * l1
        sweeps += 1
        if max_delta <= tol:
            converged = True
            break
    return sweeps, converged


def cd_np(col_ptr, col_rows, w, resid, lam, tol, max_sweeps, history):
    n_cols = col_ptr.size - 1
    counts = np.diff(col_ptr)
    active = np.flatnonzero(counts)
    w[counts == 0] = 0.0
    half_lam = 0.5 * lam
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        max_delta = 0.0
        for k in active:
            rows = col_rows[col_ptr[k]:col_ptr[k + 1]]
            a = counts[k]
            new = max(0.0, (resid[rows].sum() + a * w[k] - half_lam) / a)
            delta = new - w[k]
            if delta != 0.0:
                resid[rows] -= delta
                w[k] = new
                max_delta = max(max_delta, abs(delta))
        history[sweeps] = float(np.dot(resid, resid) + lam * w[:n_cols].sum())
        sweeps += 1
        if max_delta <= tol:
            converged = True
            break
    return sweeps, converged
