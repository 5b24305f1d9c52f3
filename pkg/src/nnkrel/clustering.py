"""k-means models behind the two cluster-based reliability scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ITER = 300
TOL = 1e-6


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """Fitted centroids.

    ``mode == "supervised"``: ``hard_labels[j]`` is the class centroid ``j`` was
    fit on. ``mode == "unsupervised"``: ``label_distributions[j, c]`` is the
    fraction of cluster ``j`` members carrying label ``c``.
    """

    centroids: np.ndarray
    mode: str
    member_counts: np.ndarray
    hard_labels: np.ndarray | None = None
    label_distributions: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("supervised", "unsupervised"):
            raise ValueError(f"unknown cluster mode {self.mode!r}")
        for name in ("centroids", "member_counts", "hard_labels", "label_distributions"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, copy=True)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]


def _sq_dists(points, centroids):
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeans_plusplus(points, n_clusters, rng):
    """D^2 seeding; returns initial centroids as a copy."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(points, points[chosen])[:, 0]
    for _ in range(1, n_clusters):
        total = closest.sum()
        if total <= 0:
            # every point coincides with a chosen center; take the first unused
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rest[0])
        else:
            nxt = int(rng.choice(n, p=closest / total))
        chosen.append(nxt)
        closest = np.minimum(closest, _sq_dists(points, points[[nxt]])[:, 0])
    return points[chosen].copy()


def objective(points, centroids, assignments) -> float:
    diff = points - centroids[assignments]
    return float(np.einsum("ij,ij->", diff, diff))


def kmeans(points, n_clusters, seed=0, max_iter=MAX_ITER, tol=TOL, history=None):
    """Lloyd's algorithm with k-means++ seeding.

    Stops when the largest centroid shift, relative to the data scale, drops
    below ``tol``. A cluster left empty is reseeded at the point farthest from
    its assigned centroid, so exactly ``n_clusters`` non-empty clusters come
    back. Assignment ties go to the lowest centroid index.

    If ``history`` is a list, the objective after each assignment step is
    appended to it.

    Returns ``(centroids, assignments)``.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("points must be a 2-D matrix")
    if not np.isfinite(X).all():
        raise ValueError("non-finite input to k-means")
    n = X.shape[0]
    if not 1 <= n_clusters <= n:
        raise ValueError(f"cannot fit {n_clusters} clusters to {n} points")
    rng = np.random.default_rng(seed)
    centroids = kmeans_plusplus(X, n_clusters, rng)
    scale = max(float(np.max(np.abs(X))), 1e-300)

    assign = None
    for _ in range(max_iter):
        d2 = _sq_dists(X, centroids)
        assign = np.argmin(d2, axis=1)
        _repair_empty(X, centroids, assign, d2)
        if history is not None:
            history.append(objective(X, centroids, assign))
        new = np.empty_like(centroids)
        for j in range(n_clusters):
            new[j] = X[assign == j].mean(axis=0)
        shift = float(np.max(np.abs(new - centroids)))
        centroids = new
        if shift < tol * scale:
            break
    d2 = _sq_dists(X, centroids)
    assign = np.argmin(d2, axis=1)
    _repair_empty(X, centroids, assign, d2)
    for j in range(n_clusters):
        centroids[j] = X[assign == j].mean(axis=0)
    if history is not None:
        history.append(objective(X, centroids, assign))
    return centroids, assign


def _repair_empty(X, centroids, assign, d2):
    counts = np.bincount(assign, minlength=centroids.shape[0])
    for j in np.flatnonzero(counts == 0):
        own = d2[np.arange(X.shape[0]), assign]
        # only steal from clusters that keep at least one member
        own = np.where(counts[assign] > 1, own, -1.0)
        far = int(np.argmax(own))
        counts[assign[far]] -= 1
        assign[far] = j
        counts[j] = 1
        centroids[j] = X[far]
        d2[far] = _sq_dists(X[far:far + 1], centroids)[0]


def _class_seed(seed, members):
    # keyed by the member set, not the class id, so relabeling classes cannot change the fit
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(members[0]), int(members.size)])


def fit_supervised(dataset, clusters_per_class, seed=0, max_iter=MAX_ITER, tol=TOL) -> ClusterModel:
    """Run k-means separately inside each class with ``clusters_per_class`` centroids."""
    kc = int(clusters_per_class)
    if kc < 1:
        raise ValueError("clusters_per_class must be positive")
    cents, labels, counts = [], [], []
    for c in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == c)
        if members.size < kc:
            raise ValueError(f"class {c} has {members.size} members, fewer than {kc} centroids")
        mu, assign = kmeans(dataset.vectors[members], kc, _class_seed(seed, members), max_iter, tol)
        cents.append(mu)
        labels.extend([c] * kc)
        counts.append(np.bincount(assign, minlength=kc))
    return ClusterModel(
        centroids=np.vstack(cents),
        mode="supervised",
        member_counts=np.concatenate(counts),
        hard_labels=np.array(labels, dtype=np.int64),
    )


def fit_unsupervised(dataset, n_clusters, seed=0, max_iter=MAX_ITER, tol=TOL) -> ClusterModel:
    """Label-blind k-means, then per-cluster empirical label distributions."""
    m = int(n_clusters)
    if m < dataset.num_classes:
        raise ValueError(f"need at least C={dataset.num_classes} clusters, got {m}")
    mu, assign = kmeans(dataset.vectors, m, seed, max_iter, tol)
    counts = np.bincount(assign, minlength=m)
    dist = np.zeros((m, dataset.num_classes))
    np.add.at(dist, (assign, dataset.labels), 1.0)
    dist /= counts[:, None]
    return ClusterModel(centroids=mu, mode="unsupervised", member_counts=counts, label_distributions=dist)


def softmax_weights(query, centroids) -> np.ndarray:
    """Softmax over negative (unsquared) Euclidean distances to each centroid."""
    C = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    if C.shape[0] < 1:
        raise ValueError("need at least one centroid")
    d = np.sqrt(np.sum((C - np.asarray(query, dtype=np.float64)) ** 2, axis=1))
    return softmax_of_distances(d)


def softmax_of_distances(d) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if not np.isfinite(d).all():
        raise ValueError("non-finite distance")
    z = -(d - d.min(axis=-1, keepdims=True))
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
