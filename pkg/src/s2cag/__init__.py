"""Spectral clustering of attributed graphs via smoothed representations."""
from .graphstore import (AttributedGraph, GraphFormatError, GraphValidationError,
                         NormalizedOperators, build_graph, load_graph, normalize, save_graph)
from .metrics import (QualityReport, StochasticityDiagnostics, affinity_conductance,
                      affinity_modularity, ari, clustering_accuracy, evaluate, nmi,
                      stochasticity_report)
from .msscag import MsscagParams, cluster_msscag
from .rounding import ClusterAssignment, kmeans_round, snem_round, vca_matrix
from .smoothing import NsrMatrix, build_nsr, decay_weights, power_method
from .sscag import SscagParams, SpectralEmbedding, cluster_sscag

__version__ = "0.1.0"

__all__ = [
    "AttributedGraph", "GraphFormatError", "GraphValidationError", "NormalizedOperators",
    "build_graph", "load_graph", "normalize", "save_graph",
    "QualityReport", "StochasticityDiagnostics", "affinity_conductance", "affinity_modularity",
    "ari", "clustering_accuracy", "evaluate", "nmi", "stochasticity_report",
    "MsscagParams", "cluster_msscag",
    "ClusterAssignment", "kmeans_round", "snem_round", "vca_matrix",
    "NsrMatrix", "build_nsr", "decay_weights", "power_method",
    "SscagParams", "SpectralEmbedding", "cluster_sscag",
]
