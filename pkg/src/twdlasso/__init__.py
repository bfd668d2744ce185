"""
twdlasso: approximate 1-Wasserstein distances with tree-Wasserstein
distances whose edge weights are fitted by non-negative Lasso.

Typical use::

    from twdlasso import PointCloud, build_tree, sample_pairs, fit_weights, twd

    tree = build_tree(cloud, "quadtree", seed=0)
    fitted, report = fit_weights(tree, sample_pairs(cloud, "euclidean", 100_000, seed=0))
    d = twd(fitted, mu, nu)
"""
from ._accel import backend_name
from .build import (
    ClusterTreeConfig,
    QuadTreeConfig,
    build_clustertree,
    build_quadtree,
    build_tree,
    random_shift,
)
from .data import (
    FormatError,
    Measure,
    PointCloud,
    ground_distance,
    load_measures,
    load_point_cloud,
    pairwise_distances,
    save_measures,
    save_point_cloud,
)
from .evaluation import EvalReport, evaluate, pearson, run_benchmark, synthetic_problem
from .exact import CyclicPlanError, ExactW1Result, TransportPlan, exact_w1, tree_from_plan, w1
from .features import PairSample, feature_matrix, path_feature, sample_pairs
from .fit import (
    FitConfig,
    FitReport,
    SlicedFit,
    fit_sliced,
    fit_weights,
    lambda_max,
    sliced_twd,
    solve_nonneg_lasso,
)
from .tree import (
    Tree,
    TreeError,
    ancestor_set,
    load_tree,
    prune_zero_weights,
    save_tree,
    tree_distance,
    twd,
    twd_many,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterTreeConfig", "CyclicPlanError", "EvalReport", "ExactW1Result", "FitConfig",
    "FitReport", "FormatError", "Measure", "PairSample", "PointCloud", "QuadTreeConfig",
    "SlicedFit", "TransportPlan", "Tree", "TreeError", "ancestor_set", "backend_name",
    "build_clustertree", "build_quadtree", "build_tree", "evaluate", "exact_w1",
    "feature_matrix", "fit_sliced", "fit_weights", "ground_distance", "lambda_max",
    "load_measures", "load_point_cloud", "load_tree", "pairwise_distances", "path_feature",
    "pearson", "prune_zero_weights", "random_shift", "run_benchmark", "sample_pairs",
    "save_measures", "save_point_cloud", "save_tree", "sliced_twd", "solve_nonneg_lasso",
    "synthetic_problem", "tree_distance", "tree_from_plan", "twd", "twd_many", "w1",
]
