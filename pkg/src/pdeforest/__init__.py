"""Discover governing PDEs from gridded space-time data.

Candidate equations are forests of symbolic binary trees evolved by a
tree-aware genetic algorithm; term coefficients come from thresholded ridge
regression and candidates are ranked by AIC.

Typical use::

    from pdeforest import GAConfig, evolve, preset, solve

    dataset = solve(preset("burgers"))
    result = evolve(GAConfig(rng_seed=0), dataset)
    print(result.equation_display)
"""

__version__ = "0.1.0"

from .expr import (
    Forest,
    GenConfig,
    Node,
    canonical_key,
    parse_computable_string,
    random_forest,
    random_tree,
    to_computable_string,
    to_display_string,
    validate,
)
from .grid import (
    Dataset,
    FeatureMatrix,
    FieldColumn,
    build_feature_matrix,
    diff_x,
    evaluate_tree,
    make_dataset,
    ut_vector,
)
from .regress import CandidateScore, RegressionParams, ridge_solve, score, stridge
from .ga import Candidate, DiscoveryResult, GAConfig, evolve
from .datasets import (
    SolverConfig,
    preset,
    read_dataset,
    solve,
    write_dataset,
)

__all__ = [
    "Candidate",
    "CandidateScore",
    "Dataset",
    "DiscoveryResult",
    "FeatureMatrix",
    "FieldColumn",
    "Forest",
    "GAConfig",
    "GenConfig",
    "Node",
    "RegressionParams",
    "SolverConfig",
    "build_feature_matrix",
    "canonical_key",
    "diff_x",
    "evaluate_tree",
    "evolve",
    "make_dataset",
    "parse_computable_string",
    "preset",
    "random_forest",
    "random_tree",
    "read_dataset",
    "ridge_solve",
    "score",
    "solve",
    "stridge",
    "to_computable_string",
    "to_display_string",
    "ut_vector",
    "validate",
    "write_dataset",
]
