"""
Command line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Every command is a
deterministic function of its flags and input files; randomness comes only
from ``--seed``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .build import DEFAULT_BRANCHING, DEFAULT_DEPTH, build_tree
from .data import METRICS, load_measures, load_point_cloud
from .evaluation import (
    align,
    evaluate,
    format_bench,
    read_pair_values,
    read_pairs,
    run_benchmark,
    sample_measure_pairs,
    write_pair_values,
)
from .exact import w1
from .features import sample_pairs
from .fit import FitConfig, fit_sliced, fit_weights
from .tree import load_tree, save_tree, twd_many

log = logging.getLogger("twdlasso")


def _nonneg_float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"must be a finite value >= 0, got {s}")
    return v


def _pos_float(s):
    v = _nonneg_float(s)
    if v == 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _pos_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {s}")
    return v


def _float_list(s):
    return [_nonneg_float(x) for x in s.split(",") if x]


def _method_list(s):
    out = [x for x in s.split(",") if x]
    for m in out:
        if m not in ("quadtree", "cluster"):
            raise argparse.ArgumentTypeError(f"unknown method {m!r}")
    return out


def _add_tree_flags(p):
    p.add_argument("--method", choices=["quadtree", "cluster"], default="quadtree")
    p.add_argument("--depth", type=_pos_int, default=DEFAULT_DEPTH)
    p.add_argument("--branching", type=_pos_int, default=DEFAULT_BRANCHING)


def _add_fit_flags(p):
    p.add_argument("--pairs", type=_pos_int, default=100_000, help="training pairs sampled")
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, default=1e-3)
    p.add_argument("--tol", type=_pos_float, default=1e-8)
    p.add_argument("--max-sweeps", type=_pos_int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twdlasso", description="Tree-Wasserstein approximation with Lasso-fitted edge weights"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-tree", help="build a QuadTree or ClusterTree")
    p.add_argument("--input", required=True, help="vectors file")
    _add_tree_flags(p)
    p.add_argument("--metric", choices=METRICS, default="euclidean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit the edge weights of an existing tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--vectors", required=True)
    _add_fit_flags(p)
    p.add_argument("--metric", choices=METRICS, default="euclidean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit-sliced", help="build and fit T trees; writes OUT.0 .. OUT.{T-1}")
    p.add_argument("--vectors", required=True)
    _add_tree_flags(p)
    p.add_argument("--slices", type=_pos_int, default=3)
    _add_fit_flags(p)
    p.add_argument("--metric", choices=METRICS, default="euclidean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("dist", help="(sliced) tree-Wasserstein distances between measures")
    p.add_argument("--trees", nargs="+", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--measures", required=True)
    p.add_argument("--pairs-file", help="'i j' lines; default: all pairs i < j")
    p.add_argument("--out", required=True)

    p = sub.add_parser("exact-w1", help="exact 1-Wasserstein distances between measures")
    p.add_argument("--vectors", required=True)
    p.add_argument("--measures", required=True)
    p.add_argument("--metric", choices=METRICS, default="euclidean")
    p.add_argument("--pairs-file", help="'i j' lines; default: all pairs i < j")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="MAE / PCC of predicted against reference distances")
    p.add_argument("--ref", required=True)
    p.add_argument("--pred", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--nodes", type=int, default=0)
    g.add_argument("--trees", nargs="+", help="count nonzero-weight nodes of these trees")

    p = sub.add_parser("bench", help="averaged MAE / PCC / node table over seeds")
    p.add_argument("--vectors", required=True)
    p.add_argument("--measures", required=True)
    p.add_argument("--methods", type=_method_list, default=["quadtree", "cluster"])
    p.add_argument("--lambdas", type=_float_list, default=[1e-3, 1e-2, 1e-1])
    p.add_argument("--slices", type=_pos_int, default=3)
    p.add_argument("--seeds", type=_pos_int, default=10, help="number of repetitions")
    p.add_argument("--pairs", type=_pos_int, default=100_000)
    p.add_argument("--eval-pairs", type=_pos_int, default=100, help="measure pairs sampled")
    p.add_argument("--pairs-file", help="explicit measure pairs instead of sampling")
    p.add_argument("--depth", type=_pos_int, default=DEFAULT_DEPTH)
    p.add_argument("--branching", type=_pos_int, default=DEFAULT_BRANCHING)
    p.add_argument("--tol", type=_pos_float, default=1e-8)
    p.add_argument("--max-sweeps", type=_pos_int, default=1000)
    p.add_argument("--metric", choices=METRICS, default="euclidean")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--ref-cache", help="TSV caching the exact reference distances")
    p.add_argument("--scatter-dir", help="write reference/predicted TSVs per method (first seed)")
    p.add_argument("--out", required=True)
    return parser


def _check_branching(args, parser):
    if getattr(args, "method", None) == "cluster" and args.branching < 2:
        parser.error("--branching must be >= 2")


def _measure_pairs(measures, pairs_file):
    if pairs_file:
        pairs = read_pairs(pairs_file)
        for i, j in pairs:
            if not (0 <= i < len(measures) and 0 <= j < len(measures)):
                raise ValueError(f"pair ({i}, {j}) references a missing measure")
        return pairs
    n = len(measures)
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _check_tree_cloud(tree, cloud, path):
    if tree.n_points > cloud.n_points:
        raise ValueError(
            f"{path} maps point {tree.n_points - 1} but the vectors file has {cloud.n_points} points"
        )


def cmd_build_tree(args):
    cloud = load_point_cloud(args.input)
    tree = build_tree(cloud, args.method, max_depth=args.depth, branching=args.branching,
                      seed=args.seed, metric=args.metric)
    save_tree(args.out, tree)
    print(f"nodes={tree.n_nodes} leaves={tree.n_leaves} height={tree.height}")


def cmd_fit(args):
    cloud = load_point_cloud(args.vectors)
    tree = load_tree(args.tree)
    _check_tree_cloud(tree, cloud, args.tree)
    if tree.n_points != cloud.n_points or np.any(tree.node_of_point < 0):
        raise ValueError("tree must carry every point of the vectors file")
    cfg = FitConfig(lam=args.lam, tol=args.tol, max_sweeps=args.max_sweeps, seed=args.seed)
    sample = sample_pairs(cloud, args.metric, args.pairs, args.seed)
    fitted, report = fit_weights(tree, sample, cfg)
    save_tree(args.out, fitted)
    print(report.line())


def cmd_fit_sliced(args):
    cloud = load_point_cloud(args.vectors)
    cfg = FitConfig(lam=args.lam, tol=args.tol, max_sweeps=args.max_sweeps, seed=args.seed)
    fit = fit_sliced(cloud, args.metric, args.method, args.slices, max_depth=args.depth,
                     branching=args.branching, seed=args.seed, fit_cfg=cfg, n_pairs=args.pairs)
    for t, (tree, report) in enumerate(zip(fit.trees, fit.reports)):
        save_tree(f"{args.out}.{t}", tree)
        print(f"tree={t} {report.line()}")


def cmd_dist(args):
    cloud = load_point_cloud(args.vectors)
    measures = load_measures(args.measures, cloud)
    trees = []
    for path in args.trees:
        tree = load_tree(path)
        _check_tree_cloud(tree, cloud, path)
        trees.append(tree)
    pairs = _measure_pairs(measures, args.pairs_file)
    queries = [(measures[i], measures[j]) for i, j in pairs]
    total = np.zeros(len(pairs))
    for tree in trees:
        total += twd_many(tree, queries)
    write_pair_values(args.out, pairs, total / len(trees))


def cmd_exact(args):
    cloud = load_point_cloud(args.vectors)
    measures = load_measures(args.measures, cloud)
    pairs = _measure_pairs(measures, args.pairs_file)
    values = [w1(cloud, measures[i], measures[j], args.metric) for i, j in pairs]
    write_pair_values(args.out, pairs, values)


def cmd_eval(args):
    ref_pairs, ref_vals = read_pair_values(args.ref)
    pred_pairs, pred_vals = read_pair_values(args.pred)
    ref, pred = align(ref_pairs, ref_vals, pred_pairs, pred_vals)
    nodes = args.nodes
    if args.trees:
        nodes = sum(load_tree(p).n_nonzero for p in args.trees)
    print(evaluate(ref, pred, nodes).line())


def cmd_bench(args):
    cloud = load_point_cloud(args.vectors)
    measures = load_measures(args.measures, cloud)
    if args.pairs_file:
        eval_pairs = _measure_pairs(measures, args.pairs_file)
    else:
        eval_pairs = sample_measure_pairs(measures, args.eval_pairs, args.seed)
    rows = run_benchmark(
        cloud, measures, methods=args.methods, lambdas=args.lambdas, slices=args.slices,
        n_seeds=args.seeds, n_pairs=args.pairs, eval_pairs=eval_pairs, seed=args.seed,
        metric=args.metric, max_depth=args.depth, branching=args.branching,
        fit_cfg=FitConfig(tol=args.tol, max_sweeps=args.max_sweeps),
        ref_cache=args.ref_cache, scatter_dir=args.scatter_dir,
    )
    Path(args.out).write_text(format_bench(rows))


COMMANDS = {
    "build-tree": cmd_build_tree,
    "fit": cmd_fit,
    "fit-sliced": cmd_fit_sliced,
    "dist": cmd_dist,
    "exact-w1": cmd_exact,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _check_branching(args, parser)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"twdlasso {args.command}: error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
