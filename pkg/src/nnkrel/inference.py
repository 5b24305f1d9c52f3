"""Reliability-weighted voting over NNK neighborhoods, and the plain k-NN baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import KernelConfig, knn_candidates
from .nnk import NnkNeighborhood, build_neighborhood

VOTING_MODES = ("weighted", "unweighted")


@dataclass(frozen=True)
class VoteConfig:
    mode: str
    kernel: KernelConfig

    def __post_init__(self):
        if self.mode not in VOTING_MODES:
            raise ValueError(f"voting mode must be one of {VOTING_MODES}, got {self.mode!r}")


def _argmax_lowest(votes) -> int:
    # np.argmax returns the first maximum, i.e. the lowest class index
    return int(np.argmax(votes))


def vote(neighborhood: NnkNeighborhood, labels, scores, num_classes: int, mode: str) -> int:
    """Argmax over classes of summed reliability (times NNK weight when ``mode == "weighted"``).

    Falls back to the plain NNK-weight vote when every contributing score is zero.
    """
    idx = neighborhood.neighbor_indices
    if idx.size == 0:
        raise ValueError("empty neighborhood")
    y = np.asarray(labels)[idx]
    eta = np.asarray(scores, dtype=np.float64)[idx]
    if mode == "weighted":
        mass = neighborhood.weights * eta
    elif mode == "unweighted":
        mass = eta
    else:
        raise ValueError(f"unknown voting mode {mode!r}")
    votes = np.bincount(y, weights=mass, minlength=num_classes)
    if not votes.sum() > 0:
        votes = np.bincount(y, weights=neighborhood.weights, minlength=num_classes)
    return _argmax_lowest(votes)


def _scores_of(scores, train):
    s = getattr(scores, "scores", scores)
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (len(train),):
        raise ValueError(f"{s.size} reliability scores for {len(train)} training samples")
    return s


def classify_weighted(test_point, train, scores, config: VoteConfig, neighborhood=None) -> int:
    s = _scores_of(scores, train)
    nb = neighborhood if neighborhood is not None else build_neighborhood(train, test_point, config.kernel)
    return vote(nb, train.labels, s, train.num_classes, "weighted")


def classify_unweighted(test_point, train, scores, config: VoteConfig, neighborhood=None) -> int:
    s = _scores_of(scores, train)
    nb = neighborhood if neighborhood is not None else build_neighborhood(train, test_point, config.kernel)
    return vote(nb, train.labels, s, train.num_classes, "unweighted")


def classify(test_point, train, scores, config: VoteConfig, neighborhood=None) -> int:
    fn = classify_weighted if config.mode == "weighted" else classify_unweighted
    return fn(test_point, train, scores, config, neighborhood)


def knn_baseline(test_point, train, k: int) -> int:
    """Majority label among the ``k`` nearest training points (ties: lowest class)."""
    if not 1 <= k <= len(train):
        raise ValueError(f"k={k} out of range for {len(train)} training samples")
    nn = knn_candidates(train.vectors, test_point, k)
    return _argmax_lowest(np.bincount(train.labels[nn], minlength=train.num_classes))


def predict_many(neighborhoods, train, scores, mode: str) -> np.ndarray:
    s = _scores_of(scores, train)
    return np.array([vote(nb, train.labels, s, train.num_classes, mode) for nb in neighborhoods], dtype=np.int64)
