"""Ranking objects from noisy pairwise comparisons."""

from .analysis import WalkAnalysis, build_node_dag, dag_estimate, walk_analysis
from .errors import (
    ConfigurationError,
    DataError,
    DisconnectedGraphError,
    DomainError,
    GraphGenerationError,
    NumericalError,
    PairRankError,
)
from .estimators import (
    ComparisonCounts,
    QualityEstimate,
    estimate,
    estimate_distances,
    ls_solve,
    ml_estimate,
    rank_from_qualities,
    sample_counts,
)
from .experiments import ExperimentConfig, sweep, two_stage
from .graphs import ComparisonGraph, build_graph, is_connected, knn_quality_graph, system_matrices
from .metrics import aligned_mse, epsilon_error, kendall_tau
from .models import ModelKind, PreferenceModel, inverse_preference, preference_prob

__version__ = "0.1.0"

__all__ = [
    "ComparisonCounts",
    "ComparisonGraph",
    "ConfigurationError",
    "DataError",
    "DisconnectedGraphError",
    "DomainError",
    "ExperimentConfig",
    "GraphGenerationError",
    "ModelKind",
    "NumericalError",
    "PairRankError",
    "PreferenceModel",
    "QualityEstimate",
    "WalkAnalysis",
    "aligned_mse",
    "build_graph",
    "build_node_dag",
    "dag_estimate",
    "epsilon_error",
    "estimate",
    "estimate_distances",
    "inverse_preference",
    "is_connected",
    "kendall_tau",
    "knn_quality_graph",
    "ls_solve",
    "ml_estimate",
    "preference_prob",
    "rank_from_qualities",
    "sample_counts",
    "sweep",
    "system_matrices",
    "two_stage",
    "walk_analysis",
]
