"""Per-sample label reliability scores for a (possibly noisy) training set.

Every estimator returns a :class:`ReliabilityVector` with one score in
``[0, 1]`` per training sample; higher means the sample's label is more
likely to be correct.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterModel, softmax_of_distances
from .geometry import KernelConfig, knn_candidates
from .nnk import polytope_diameter, training_neighborhoods

METHODS = ("knn", "nnk_weights", "nnk_diam_ratio", "kmeans_supervised", "kmeans_unsupervised")


def fingerprint(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class ReliabilityVector:
    scores: np.ndarray
    method: str
    config_fingerprint: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown reliability method {self.method!r}")
        s = np.array(self.scores, dtype=np.float64, copy=True)
        if s.ndim != 1:
            raise ValueError("scores must be one-dimensional")
        if s.size and (np.nanmin(s) < 0 or np.nanmax(s) > 1 or np.isnan(s).any()):
            raise ValueError("reliability scores must lie in [0, 1]")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    def __len__(self):
        return self.scores.size


def knn_reliability(dataset, k: int) -> ReliabilityVector:
    """Fraction of the ``k`` nearest other samples that carry the sample's label."""
    n = len(dataset)
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} out of range for {n} samples (self excluded)")
    X, y = dataset.vectors, dataset.labels
    scores = np.empty(n)
    for q in range(n):
        nn = knn_candidates(X, X[q], k, exclude=q)
        scores[q] = np.count_nonzero(y[nn] == y[q]) / k
    return ReliabilityVector(scores, "knn", fingerprint({"method": "knn", "k": k}))


def _kernel_fp(method, config):
    return fingerprint({"method": method, "sigma": config.sigma, "k_init": config.k_init})


def nnk_weights_reliability(dataset, config: KernelConfig, neighborhoods=None) -> ReliabilityVector:
    """Sum of normalized NNK weights over same-label neighbors.

    ``neighborhoods`` may carry precomputed self-excluded neighborhoods from
    :func:`nnkrel.nnk.training_neighborhoods`; they depend only on geometry,
    so they can be shared across noisy relabelings of the same points.
    """
    if neighborhoods is None:
        neighborhoods = training_neighborhoods(dataset, config)
    y = dataset.labels
    # ratio of raw coefficients so an all-agreeing neighborhood scores exactly 1
    scores = np.array([
        float(np.sum(nb.raw_coefficients[y[nb.neighbor_indices] == y[q]]) / np.sum(nb.raw_coefficients))
        for q, nb in enumerate(neighborhoods)
    ])
    return ReliabilityVector(np.clip(scores, 0.0, 1.0), "nnk_weights", _kernel_fp("nnk_weights", config))


def diameter_ratio(dataset, q, full, same) -> float:
    """Score for one sample from its unrestricted and same-label NNK sets.

    Degenerate cases: no same-label spread (fewer than two distinct same-label
    neighbors) scores 0, unless the unrestricted set also collapses to a point
    whose labels all match, which scores 1.
    """
    d_full = polytope_diameter(dataset, full.neighbor_indices)
    d_same = 0.0 if same is None else polytope_diameter(dataset, same.neighbor_indices)
    if same is not None and np.array_equal(np.sort(full.neighbor_indices), np.sort(same.neighbor_indices)):
        return 1.0
    if d_same == 0.0:
        if d_full == 0.0 and np.all(dataset.labels[full.neighbor_indices] == dataset.labels[q]):
            return 1.0
        return 0.0
    return float(min(1.0, max(0.0, d_full / d_same)))


def nnk_diameter_ratio_reliability(dataset, config: KernelConfig, neighborhoods=None, same_label=None) -> ReliabilityVector:
    """Diameter of the unrestricted NNK polytope over that of the same-label one.

    The same-label polytope is built from the ``k_init`` nearest samples that
    share the query's label, so it may reach farther than the unrestricted one.
    """
    if neighborhoods is None:
        neighborhoods = training_neighborhoods(dataset, config)
    if same_label is None:
        same_label = training_neighborhoods(dataset, config, same_label_only=True)
    scores = np.array([diameter_ratio(dataset, q, neighborhoods[q], same_label[q]) for q in range(len(dataset))])
    return ReliabilityVector(scores, "nnk_diam_ratio", _kernel_fp("nnk_diam_ratio", config))


def _centroid_distances(dataset, model):
    diff = dataset.vectors[:, None, :] - model.centroids[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def supervised_kmeans_reliability(dataset, model: ClusterModel) -> ReliabilityVector:
    """Largest softmax weight among the centroids of the sample's own class."""
    if model.mode != "supervised":
        raise ValueError("supervised k-means reliability needs a supervised ClusterModel")
    w = softmax_of_distances(_centroid_distances(dataset, model))
    own = model.hard_labels[None, :] == dataset.labels[:, None]
    scores = np.max(np.where(own, w, 0.0), axis=1)
    fp = fingerprint({"method": "kmeans_supervised", "M": model.n_clusters})
    return ReliabilityVector(np.clip(scores, 0.0, 1.0), "kmeans_supervised", fp)


def unsupervised_kmeans_reliability(dataset, model: ClusterModel) -> ReliabilityVector:
    """Nearest centroid's softmax weight times its empirical share of the sample's label."""
    if model.mode != "unsupervised":
        raise ValueError("unsupervised k-means reliability needs an unsupervised ClusterModel")
    d = _centroid_distances(dataset, model)
    w = softmax_of_distances(d)
    nearest = np.argmin(d, axis=1)  # first minimum: lowest index wins ties
    rows = np.arange(len(dataset))
    scores = w[rows, nearest] * model.label_distributions[nearest, dataset.labels]
    fp = fingerprint({"method": "kmeans_unsupervised", "M": model.n_clusters})
    return ReliabilityVector(np.clip(scores, 0.0, 1.0), "kmeans_unsupervised", fp)


def write_reliability_csv(path, dataset, rel: ReliabilityVector) -> None:
    if len(rel) != len(dataset):
        raise ValueError("reliability vector does not match the dataset")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "score", "method"])
        for i, s in zip(dataset.ids, rel.scores):
            w.writerow([i, repr(float(s)), rel.method])


def read_reliability_csv(path) -> ReliabilityVector:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"no reliability rows in {path}")
    methods = {r["method"] for r in rows}
    if len(methods) != 1:
        raise ValueError(f"mixed methods in {path}: {sorted(methods)}")
    return ReliabilityVector([float(r["score"]) for r in rows], methods.pop())
