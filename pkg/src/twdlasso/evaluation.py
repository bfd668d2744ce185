"""
Approximation quality of tree distances against exact 1-Wasserstein.

Protocol: sample measure pairs, compute the exact reference once, then for
every tree variant and seed report the mean absolute error, the Pearson
correlation and the number of nonzero-weight nodes, averaged over seeds.
PCCs are averaged arithmetically (no Fisher z transform).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .build import DEFAULT_BRANCHING, DEFAULT_DEPTH, build_tree
from .data import Measure, PointCloud, fmt
from .exact import w1
from .features import feature_matrix, sample_index_pairs, sample_pairs
from .fit import FitConfig, fit_weights
from .tree import twd_many

log = logging.getLogger(__name__)

SEED_STRIDE = 1000


@dataclass(frozen=True)
class EvalReport:
    mae: float
    pcc: float
    nodes: int
    n_pairs: int
    seed: int | None = None

    def line(self) -> str:
        return f"mae={fmt(self.mae)} pcc={fmt(self.pcc)} nodes={self.nodes}"


def pearson(x, y) -> float:
    """Sample Pearson correlation; nan when ``y`` is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(xc @ xc)
    sy = np.sqrt(yc @ yc)
    if sx == 0:
        raise ValueError("reference has zero variance; correlation undefined")
    if sy == 0:
        return float("nan")
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


def evaluate(reference, predicted, nodes: int = 0, seed=None) -> EvalReport:
    ref = np.asarray(reference, dtype=np.float64)
    pred = np.asarray(predicted, dtype=np.float64)
    if ref.shape != pred.shape or ref.ndim != 1:
        raise ValueError("reference and predicted must be 1-D and of equal length")
    if ref.size < 2:
        raise ValueError("need at least two distances")
    mae = float(np.mean(np.abs(ref - pred)))
    return EvalReport(mae, pearson(ref, pred), int(nodes), ref.size, seed)


def sample_measure_pairs(measures: Sequence[Measure], count: int = 100, seed=0) -> list[tuple[int, int]]:
    if len(measures) < 2:
        raise ValueError("need at least two measures")
    i, j = sample_index_pairs(len(measures), count, seed)
    return list(zip(i.tolist(), j.tolist()))


def reference_distances(cloud: PointCloud, measures, pairs, metric: str = "euclidean") -> np.ndarray:
    return np.array([w1(cloud, measures[i], measures[j], metric) for i, j in pairs])


# ----------------------------------------------------------------------------
# TSV of per-pair values: "i j value"
# ----------------------------------------------------------------------------


def write_pair_values(path, pairs, values):
    lines = [f"{i}\t{j}\t{fmt(v)}" for (i, j), v in zip(pairs, values)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_pair_values(path) -> tuple[list[tuple[int, int]], np.ndarray]:
    pairs, values = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        toks = line.split()
        if not toks:
            continue
        if len(toks) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'i j value'")
        pairs.append((int(toks[0]), int(toks[1])))
        values.append(float(toks[2]))
    return pairs, np.asarray(values)


def read_pairs(path) -> list[tuple[int, int]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        toks = line.split()
        if not toks:
            continue
        if len(toks) < 2:
            raise ValueError(f"{path}:{lineno}: expected 'i j'")
        out.append((int(toks[0]), int(toks[1])))
    return out


def align(ref_pairs, ref_values, pred_pairs, pred_values):
    """Reorder predicted values to the reference pair order."""
    lookup = {}
    for (i, j), v in zip(pred_pairs, pred_values):
        lookup[(i, j)] = v
        lookup.setdefault((j, i), v)
    try:
        return np.asarray(ref_values), np.array([lookup[p] for p in ref_pairs])
    except KeyError as exc:
        raise ValueError(f"pair {exc.args[0]} missing from predictions") from None


# ----------------------------------------------------------------------------
# benchmark
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    method: str
    lam: float | None
    slices: int
    mae: float
    pcc: float
    nodes: float

    def tsv(self) -> str:
        lam = "none" if self.lam is None else fmt(self.lam)
        return "\t".join([self.method, lam, str(self.slices), fmt(self.mae), fmt(self.pcc), fmt(self.nodes)])


BENCH_HEADER = "method\tlambda\tT\tmae\tpcc\tnodes"
_LABELS = {"quadtree": ("QuadTree", "qTWD"), "cluster": ("ClusterTree", "cTWD")}


def run_benchmark(cloud: PointCloud, measures: Sequence[Measure], *,
                  methods=("quadtree", "cluster"), lambdas=(1e-3, 1e-2, 1e-1),
                  slices: int = 3, n_seeds: int = 10, n_pairs: int = 100_000,
                  eval_pairs=None, n_eval: int = 100, seed: int = 7,
                  metric: str = "euclidean", max_depth: int = DEFAULT_DEPTH,
                  branching: int = DEFAULT_BRANCHING, fit_cfg: FitConfig = FitConfig(),
                  reference=None, ref_cache=None, scatter_dir=None) -> list[BenchRow]:
    """Table of averaged MAE / PCC / node counts.

    Rows per method: default weights, then one row per lambda; with
    ``slices > 1`` the same again for the averaged ``slices``-tree variant.
    Run ``r`` uses seed ``seed + 1000 r`` for pair sampling and
    ``seed + 1000 r + t`` for tree ``t``.
    """
    if eval_pairs is None:
        eval_pairs = sample_measure_pairs(measures, n_eval, seed)
    eval_pairs = [tuple(p) for p in eval_pairs]
    if reference is None:
        reference = _cached_reference(cloud, measures, eval_pairs, metric, ref_cache)
    reference = np.asarray(reference, dtype=np.float64)
    queries = [(measures[i], measures[j]) for i, j in eval_pairs]
    n_trees = max(1, slices)

    # (label, lam, T) -> list of EvalReport over seeds
    cells: dict[tuple, list[EvalReport]] = {}
    scatter: dict[str, np.ndarray] = {}
    for run in range(n_seeds):
        run_seed = seed + SEED_STRIDE * run
        sample = sample_pairs(cloud, metric, n_pairs, run_seed)
        for method in methods:
            base, fitted = _LABELS[method]
            trees = [
                build_tree(cloud, method, max_depth=max_depth, branching=branching,
                           seed=run_seed + t, metric=metric)
                for t in range(n_trees)
            ]
            feats = [feature_matrix(t, sample.i, sample.j) for t in trees]
            variants = [(base, None, trees)]
            for lam in lambdas:
                cfg = FitConfig(lam=lam, tol=fit_cfg.tol, max_sweeps=fit_cfg.max_sweeps, seed=run_seed)
                fitted_trees = [fit_weights(t, sample, cfg, Z)[0] for t, Z in zip(trees, feats)]
                variants.append((fitted, lam, fitted_trees))
            for label, lam, ts in variants:
                per_tree = [twd_many(t, queries) for t in ts]
                cells.setdefault((label, lam, 1), []).append(
                    evaluate(reference, per_tree[0], ts[0].n_nonzero, run_seed))
                if run == 0:
                    scatter[_scatter_name(label, lam, 1)] = per_tree[0]
                if slices > 1:
                    avg = sum(per_tree) / len(per_tree)
                    key = ("Sliced-" + label, lam, slices)
                    cells.setdefault(key, []).append(
                        evaluate(reference, avg, sum(t.n_nonzero for t in ts), run_seed))
                    if run == 0:
                        scatter[_scatter_name(*key)] = avg
        log.info("benchmark run %d/%d done", run + 1, n_seeds)

    if scatter_dir is not None:
        out = Path(scatter_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, pred in scatter.items():
            rows = [f"{fmt(r)}\t{fmt(p)}" for r, p in zip(reference, pred)]
            (out / f"{name}.tsv").write_text("\n".join(rows) + "\n")

    order = []
    for sliced in ([False, True] if slices > 1 else [False]):
        for method in methods:
            for label in _LABELS[method]:
                lams = [None] if label == _LABELS[method][0] else list(lambdas)
                for lam in lams:
                    key = ("Sliced-" + label, lam, slices) if sliced else (label, lam, 1)
                    order.append(key)
    rows = []
    for key in order:
        reps = cells[key]
        rows.append(BenchRow(
            method=key[0], lam=key[1], slices=key[2],
            mae=float(np.mean([r.mae for r in reps])),
            pcc=float(np.mean([r.pcc for r in reps])),
            nodes=float(np.mean([r.nodes for r in reps])),
        ))
    return rows


def _scatter_name(label, lam, slices):
    tag = "default" if lam is None else f"lam{lam:g}"
    return f"{label}_{tag}_T{slices}"


def _cached_reference(cloud, measures, pairs, metric, cache):
    if cache is not None and Path(cache).exists():
        cached_pairs, values = read_pair_values(cache)
        if [tuple(p) for p in cached_pairs] == list(pairs):
            return values
        log.warning("reference cache %s does not match the evaluation pairs; recomputing", cache)
    values = reference_distances(cloud, measures, pairs, metric)
    if cache is not None:
        write_pair_values(cache, pairs, values)
    return values


def format_bench(rows: Sequence[BenchRow]) -> str:
    return "\n".join([BENCH_HEADER] + [r.tsv() for r in rows]) + "\n"


def synthetic_problem(n_points: int = 256, dim: int = 8, n_measure_pairs: int = 40,
                      support: int = 16, seed: int = 0):
    """Uniform cloud in the unit cube and ``2 * n_measure_pairs`` random measures.

    Returns ``(cloud, measures, pairs)`` with pairs ``(2k, 2k + 1)``.
    """
    rng = np.random.default_rng(seed)
    cloud = PointCloud(rng.uniform(0.0, 1.0, size=(n_points, dim)))
    measures = []
    for _ in range(2 * n_measure_pairs):
        idx = np.sort(rng.choice(n_points, size=support, replace=False))
        mass = rng.uniform(0.1, 1.0, size=support)
        measures.append(Measure(idx, mass / mass.sum()))
    pairs = [(2 * k, 2 * k + 1) for k in range(n_measure_pairs)]
    return cloud, measures, pairs
