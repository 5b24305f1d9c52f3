"""Geometry-aware label reliability and reliability-weighted NNK voting."""

from .clustering import ClusterModel, fit_supervised, fit_unsupervised, kmeans, softmax_weights
from .embeddings import DatasetError, EmbeddingDataset, l2_normalize, load_dataset, save_dataset
from .geometry import KernelConfig, default_bandwidth, euclidean_distance, gaussian_kernel, knn_candidates
from .harness import ExperimentConfig, ExperimentReport, run_experiment
from .inference import VoteConfig, classify_unweighted, classify_weighted, knn_baseline
from .nnk import NnkNeighborhood, build_neighborhood, polytope_diameter, solve_nnk_coefficients
from .noise import NoiseSpec, inject_asymmetric, inject_symmetric
from .reliability import (
    ReliabilityVector,
    knn_reliability,
    nnk_diameter_ratio_reliability,
    nnk_weights_reliability,
    supervised_kmeans_reliability,
    unsupervised_kmeans_reliability,
)
from .report import emit_report
from .synthetic import generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "ClusterModel", "fit_supervised", "fit_unsupervised", "kmeans", "softmax_weights",
    "DatasetError", "EmbeddingDataset", "l2_normalize", "load_dataset", "save_dataset",
    "KernelConfig", "default_bandwidth", "euclidean_distance", "gaussian_kernel", "knn_candidates",
    "ExperimentConfig", "ExperimentReport", "run_experiment",
    "VoteConfig", "classify_unweighted", "classify_weighted", "knn_baseline",
    "NnkNeighborhood", "build_neighborhood", "polytope_diameter", "solve_nnk_coefficients",
    "NoiseSpec", "inject_asymmetric", "inject_symmetric",
    "ReliabilityVector", "knn_reliability", "nnk_diameter_ratio_reliability", "nnk_weights_reliability",
    "supervised_kmeans_reliability", "unsupervised_kmeans_reliability",
    "emit_report", "generate_synthetic",
]
