"""
numba vs numpy kernels on the three hot paths.

    python benchmarks/bench_backends.py [--points 8000] [--pairs 50000] [--queries 2000]

Each kernel is called directly with identical inputs; the numba column
excludes compilation (one warm-up call first).  Results are also checked
for agreement so a silent divergence shows up here too.
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp

from twdlasso import _kernels
from twdlasso.build import build_tree
from twdlasso.data import PointCloud
from twdlasso.features import sample_pairs
from twdlasso.tree import SubtreeMassAccumulator


def best_of(fn, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--points", type=int, default=8000)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--pairs", type=int, default=50_000)
    ap.add_argument("--queries", type=int, default=2000)
    ap.add_argument("--support", type=int, default=32)
    ap.add_argument("--sweeps", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    cloud = PointCloud(rng.uniform(size=(args.points, args.dim)))
    tree = build_tree(cloud, "quadtree", seed=args.seed)
    print(f"tree: {tree.n_nodes} nodes, height {tree.height}; {args.points} points in {args.dim}-d")
    rows = []

    # -- TWD batch -------------------------------------------------------
    ptr = np.arange(args.queries + 1, dtype=np.int64) * (2 * args.support)
    q_nodes = np.empty(ptr[-1], dtype=np.int64)
    q_mass = np.empty(ptr[-1])
    for q in range(args.queries):
        pts = rng.choice(args.points, size=2 * args.support, replace=False)
        m = rng.uniform(0.1, 1.0, size=2 * args.support)
        m[: args.support] /= m[: args.support].sum()
        m[args.support:] /= -m[args.support:].sum()
        q_nodes[ptr[q]:ptr[q + 1]] = tree.node_of_point[pts]
        q_mass[ptr[q]:ptr[q + 1]] = m
    acc = SubtreeMassAccumulator(tree.n_nodes)
    anc = tree.ancestors

    def twd_nb():
        return _kernels.twd_batch_nb(tree.parent, tree.weight, ptr, q_nodes, q_mass,
                                     acc.buf, acc.mark, acc.touched)

    def twd_np():
        return _kernels.twd_batch_np(anc, tree.weight, ptr, q_nodes, q_mass)

    twd_nb()
    t_nb, a = best_of(twd_nb, args.repeats)
    t_np, b = best_of(twd_np, args.repeats)
    rows.append((f"twd x{args.queries} (support {args.support}+{args.support})", t_nb, t_np,
                 float(np.abs(a - b).max())))

    # -- path features ---------------------------------------------------
    sample = sample_pairs(cloud, "euclidean", args.pairs, args.seed)
    na = tree.node_of_point[sample.i]
    nb = tree.node_of_point[sample.j]
    _kernels.path_features_nb(tree.parent, tree.depth, na[:10], nb[:10])
    t_nb, (p1, x1) = best_of(lambda: _kernels.path_features_nb(tree.parent, tree.depth, na, nb), args.repeats)
    t_np, (p2, x2) = best_of(lambda: _kernels.path_features_np(anc, na, nb), args.repeats)
    same = np.array_equal(p1, p2) and np.array_equal(x1, x2)
    rows.append((f"path features x{args.pairs}", t_nb, t_np, 0.0 if same else np.inf))

    # -- coordinate descent ----------------------------------------------
    Z = sp.csr_matrix((np.ones(x1.size), x1, p1), shape=(na.size, tree.n_nodes)).tocsc()
    Z.sort_indices()
    col_ptr = Z.indptr.astype(np.int64)
    col_rows = Z.indices.astype(np.int64)

    def cd(kernel):
        def run():
            w = tree.weight.copy()
            w[np.diff(col_ptr) == 0] = 0.0
            resid = sample.targets - Z @ w
            hist = np.empty(args.sweeps)
            kernel(col_ptr, col_rows, w, resid, 1e-3, 0.0, args.sweeps, hist)
            return w
        return run

    cd(_kernels.cd_nb)()
    t_nb, a = best_of(cd(_kernels.cd_nb), args.repeats)
    t_np, b = best_of(cd(_kernels.cd_np), args.repeats)
    rows.append((f"coordinate descent {args.sweeps} sweeps", t_nb, t_np, float(np.abs(a - b).max())))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}  {'max diff':>9}")
    for name, tn, tp, diff in rows:
        print(f"{name:<{width}}  {tn * 1e3:8.2f}ms  {tp * 1e3:8.2f}ms  {tp / tn:7.1f}x  {diff:9.1e}")


if __name__ == "__main__":
    main()
