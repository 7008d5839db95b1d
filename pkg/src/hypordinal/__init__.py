"""Hyperbolic (HOE) and Euclidean (EOE) ordinal embedding, plus tools that
check the generalization theory behind them numerically."""

from .dataset import (LinkFunction, WeightedTree, enumerate_triplets,
                      generate_weighted_tree, sample_observations, star_tree,
                      tree_distances)
from .embed import (Embedding, FitConfig, LossFunction, Transform, empirical_risk,
                    expected_risk_exact, fit_eoe, fit_hoe, hypothesis,
                    minimize_expected_risk)
from .estimators import EuclideanOrdinalEmbedding, HyperbolicOrdinalEmbedding
from .exceptions import HypOrdinalError
from .hypgeo import BallRestriction

__version__ = "0.1.0"

__all__ = [
    "BallRestriction", "Embedding", "EuclideanOrdinalEmbedding", "FitConfig",
    "HypOrdinalError", "HyperbolicOrdinalEmbedding", "LinkFunction", "LossFunction",
    "Transform", "WeightedTree", "empirical_risk", "enumerate_triplets",
    "expected_risk_exact", "fit_eoe", "fit_hoe", "generate_weighted_tree", "hypothesis",
    "minimize_expected_risk", "sample_observations", "star_tree", "tree_distances",
]
