"""Gaussian-blob stand-in for foundation-model embeddings."""

from __future__ import annotations

import numpy as np

from .embeddings import EmbeddingDataset, l2_normalize


def class_means(num_classes, dim, separation, rng):
    """Class means with every pairwise distance >= ``separation``."""
    if num_classes <= dim:
        # scaled orthonormal basis: all pairwise distances exactly `separation`
        q, _ = np.linalg.qr(rng.normal(size=(dim, num_classes)))
        return q.T * (separation / np.sqrt(2.0))
    dirs = rng.normal(size=(num_classes, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    diff = dirs[:, None, :] - dirs[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    closest = dist[~np.eye(num_classes, dtype=bool)].min()
    if closest <= 0:
        raise ValueError("degenerate class means; try another seed")
    return dirs * (separation / closest)


def generate_synthetic(num_classes, per_class, dim, separation, seed=0):
    """Unit-variance Gaussian blobs, L2-normalized, split half/half per class.

    Each class draws ``per_class`` points; ``per_class - per_class // 2`` go to
    the training set and ``per_class // 2`` to the test set. Returns
    ``(train, test)``; test ids continue after the training ids.
    """
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 2:
        raise ValueError("need at least 2 samples per class for a train/test split")
    if dim < 2:
        raise ValueError("need at least 2 dimensions")
    if not separation > 0:
        raise ValueError("separation must be positive")
    rng = np.random.default_rng(seed)
    means = class_means(num_classes, dim, separation, rng)
    n_train = per_class - per_class // 2
    tr_x, tr_y, te_x, te_y = [], [], [], []
    for c in range(num_classes):
        pts = means[c] + rng.normal(size=(per_class, dim))
        tr_x.append(pts[:n_train])
        te_x.append(pts[n_train:])
        tr_y += [c] * n_train
        te_y += [c] * (per_class - n_train)
    tr_x, te_x = np.vstack(tr_x), np.vstack(te_x)
    tr_y, te_y = np.array(tr_y), np.array(te_y)
    p_tr = rng.permutation(tr_y.size)
    p_te = rng.permutation(te_y.size)
    train = EmbeddingDataset(tr_x[p_tr], tr_y[p_tr], num_classes, np.arange(tr_y.size))
    test = EmbeddingDataset(te_x[p_te], te_y[p_te], num_classes, tr_y.size + np.arange(te_y.size))
    return l2_normalize(train), l2_normalize(test)
