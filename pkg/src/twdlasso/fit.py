"""
Edge-weight estimation by non-negative Lasso, single tree and tree-sliced.

The objective is used literally, without a 1/2 or 1/|pairs| factor::

    sum_{(i,j)} (d(x_i, x_j) - w . z_ij)^2 + lam * ||w||_1,   w >= 0

so ``lam`` is not interchangeable with libraries that normalise the loss.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _accel, _kernels
from .build import DEFAULT_BRANCHING, DEFAULT_DEPTH, build_tree
from .data import Measure, PointCloud, fmt
from .features import PairSample, feature_matrix, sample_pairs
from .tree import Tree, twd

ZERO_CUTOFF = 1e-12


@dataclass(frozen=True)
class FitConfig:
    lam: float = 1e-3
    tol: float = 1e-8
    max_sweeps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lambda must be finite and >= 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass(frozen=True)
class FitReport:
    objective: float
    sweeps_used: int
    nonzero_weights: int
    converged: bool
    # objective at the warm start followed by the value after each sweep
    history: np.ndarray = field(repr=False, default=None)

    def line(self) -> str:
        return (
            f"objective={fmt(self.objective)} sweeps={self.sweeps_used} "
            f"nonzeros={self.nonzero_weights} converged={str(self.converged).lower()}"
        )


def objective(Z, targets, w, lam) -> float:
    r = np.asarray(targets) - Z @ w
    return float(r @ r + lam * np.sum(w))


def lambda_max(Z, targets) -> float:
    """Smallest ``lam`` for which ``w = 0`` is optimal: ``2 max_k sum_p z_pk t_p``."""
    return float(2.0 * np.max(Z.T @ np.asarray(targets), initial=0.0))


def solve_nonneg_lasso(Z, targets, lam, w0=None, tol=1e-8, max_sweeps=1000):
    """Cyclic coordinate descent on the literal objective.

    ``Z`` is a 0/1 sparse matrix (pairs x features).  Columns without
    entries are pinned to zero.  Returns ``(w, sweeps, converged, history)``.
    """
    Z = sp.csc_matrix(Z)
    Z.sort_indices()
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if Z.shape[0] == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(targets)):
        raise ValueError("targets must be finite")
    n_cols = Z.shape[1]
    w = np.zeros(n_cols) if w0 is None else np.array(w0, dtype=np.float64, copy=True)
    col_ptr = Z.indptr.astype(np.int64)
    col_rows = Z.indices.astype(np.int64)
    w[np.diff(col_ptr) == 0] = 0.0
    resid = targets - Z @ w
    history = np.empty(max_sweeps + 1)
    history[0] = float(resid @ resid + lam * w.sum())
    kernel = _kernels.cd_nb if _accel.USE_NUMBA else _kernels.cd_np
    sweeps, converged = kernel(
        col_ptr, col_rows, w, resid, float(lam), float(tol), int(max_sweeps), history[1:]
    )
    history = history[: sweeps + 1]
    slack = 1e-10 * max(1.0, abs(history[0]))
    if np.any(np.diff(history) > slack):
        raise AssertionError("coordinate descent objective increased between sweeps")
    return w, int(sweeps), bool(converged), history


def fit_weights(tree: Tree, sample: PairSample, cfg: FitConfig = FitConfig(), features=None):
    """Fit non-negative edge weights of a fixed tree to the sampled distances.

    The tree's current weights are the warm start.  Returns the re-weighted
    tree and a :class:`FitReport`.
    """
    if len(sample) == 0:
        raise ValueError("empty sample")
    Z = feature_matrix(tree, sample.i, sample.j) if features is None else features
    w, sweeps, converged, history = solve_nonneg_lasso(
        Z, sample.targets, cfg.lam, tree.weight, cfg.tol, cfg.max_sweeps
    )
    w[0] = 0.0
    w[w < ZERO_CUTOFF] = 0.0
    fitted = tree.with_weights(w)
    report = FitReport(
        objective=objective(Z, sample.targets, w, cfg.lam),
        sweeps_used=sweeps,
        nonzero_weights=fitted.n_nonzero,
        converged=converged,
        history=history,
    )
    return fitted, report


@dataclass(frozen=True)
class SlicedFit:
    trees: tuple
    reports: tuple

    def __post_init__(self):
        if len(self.trees) < 1 or len(self.trees) != len(self.reports):
            raise ValueError("need T >= 1 trees with one report each")
        sizes = {t.n_points for t in self.trees}
        if len(sizes) != 1:
            raise ValueError("all trees must cover the same point cloud")

    def __len__(self):
        return len(self.trees)

    @property
    def nonzero_weights(self) -> int:
        return sum(t.n_nonzero for t in self.trees)


def fit_sliced(cloud: PointCloud, metric: str, method: str, n_slices: int, *,
               max_depth: int = DEFAULT_DEPTH, branching: int = DEFAULT_BRANCHING,
               seed: int = 0, fit_cfg: FitConfig = FitConfig(), n_pairs: int = 100_000,
               sample: PairSample | None = None, workers: int = 1) -> SlicedFit:
    """Build ``n_slices`` trees (seeds ``seed + t``) and fit each on one shared pair sample."""
    if n_slices < 1:
        raise ValueError("need at least one slice")
    if sample is None:
        sample = sample_pairs(cloud, metric, n_pairs, fit_cfg.seed)

    def one(t):
        tree = build_tree(cloud, method, max_depth=max_depth, branching=branching,
                          seed=seed + t, metric=metric)
        return fit_weights(tree, sample, fit_cfg)

    if workers > 1 and n_slices > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, range(n_slices)))
    else:
        results = [one(t) for t in range(n_slices)]
    return SlicedFit(tuple(r[0] for r in results), tuple(r[1] for r in results))


def sliced_twd(fit: SlicedFit | list, mu: Measure, nu: Measure) -> float:
    trees = fit.trees if isinstance(fit, SlicedFit) else fit
    total = 0.0
    for tree in trees:
        total += twd(tree, mu, nu)
    return total / len(trees)
