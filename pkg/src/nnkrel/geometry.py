"""Euclidean distances, the Gaussian kernel and exact k-NN candidate search."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_K_INIT = 50
BANDWIDTH_SCALE = 100.0


def default_bandwidth(dim: int) -> float:
    """Kernel bandwidth ``100 * sqrt(d)`` for ``d``-dimensional embeddings."""
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    return BANDWIDTH_SCALE * math.sqrt(dim)


@dataclass(frozen=True)
class KernelConfig:
    sigma: float
    k_init: int = DEFAULT_K_INIT

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"bandwidth must be positive and finite, got {self.sigma}")
        if int(self.k_init) != self.k_init or self.k_init < 1:
            raise ValueError(f"k_init must be a positive integer, got {self.k_init}")

    @classmethod
    def for_dim(cls, dim: int, k_init: int = DEFAULT_K_INIT) -> "KernelConfig":
        return cls(default_bandwidth(dim), k_init)


def _check_sigma(sigma):
    if not sigma > 0:
        raise ValueError(f"bandwidth must be positive, got {sigma}")


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def sq_distances(points, query) -> np.ndarray:
    """Squared distances from every row of ``points`` to ``query``.

    Computed from differences, not the ``|a|^2 + |b|^2 - 2ab`` expansion, so
    exact duplicates come out as exactly zero.
    """
    points = np.asarray(points, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    if points.shape[1] != query.shape[-1]:
        raise ValueError(f"dimension mismatch: points have d={points.shape[1]}, query d={query.shape[-1]}")
    diff = points - query
    return np.einsum("ij,ij->i", diff, diff)


def pairwise_sq_distances(points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    diff = points[:, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def gaussian_kernel(a, b, sigma: float) -> float:
    """``exp(-|a - b|^2 / (2 sigma^2))``."""
    _check_sigma(sigma)
    d = euclidean_distance(a, b)
    return math.exp(-(d * d) / (2.0 * sigma * sigma))


def kernel_from_sq(sq, sigma: float) -> np.ndarray:
    _check_sigma(sigma)
    return np.exp(-np.asarray(sq, dtype=np.float64) / (2.0 * sigma * sigma))


def knn_candidates(dataset_or_points, query, k: int, exclude: int | None = None, pool=None) -> np.ndarray:
    """Indices of the ``k`` training points nearest to ``query``.

    Ordered by ascending distance, ties by ascending sample index. ``exclude``
    removes one index (the query itself during reliability estimation);
    ``pool`` restricts the search to a subset of indices.
    """
    points = getattr(dataset_or_points, "vectors", dataset_or_points)
    points = np.asarray(points, dtype=np.float64)
    idx = np.arange(points.shape[0]) if pool is None else np.asarray(pool, dtype=np.int64)
    if exclude is not None:
        idx = idx[idx != exclude]
    if k < 1 or k > idx.size:
        raise ValueError(f"k={k} out of range: only {idx.size} candidates available")
    dist = sq_distances(points[idx], query)
    # lexsort: last key is primary
    order = np.lexsort((idx, dist))[:k]
    return idx[order]
