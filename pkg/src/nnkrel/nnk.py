"""Non-negative kernel (NNK) regression neighborhoods.

For a query with ``k`` kernel-nearest candidates, NNK solves the
non-negative quadratic program::

    min_{theta >= 0}  0.5 * theta' K_SS theta - K_Sq' theta

where ``K_SS`` is the candidate-candidate kernel matrix and ``K_Sq`` the
candidate-query kernel vector. Candidates that are geometrically redundant
(hidden behind another candidate as seen from the query) get zero weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import KernelConfig, kernel_from_sq, knn_candidates, pairwise_sq_distances, sq_distances

DUAL_TOL = 1e-8
PRUNE_TOL = 1e-8
KKT_TOL = 1e-6


class NNKConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class NnkNeighborhood:
    """Sparse NNK result for one query.

    ``query_ref`` is the training index of the query, or ``None`` for an
    external (test) point.
    """

    query_ref: int | None
    neighbor_indices: np.ndarray
    weights: np.ndarray
    raw_coefficients: np.ndarray
    kernel_values: np.ndarray

    def __len__(self):
        return self.neighbor_indices.size


def _solve_sub(K, b, passive):
    P = np.flatnonzero(passive)
    z = np.zeros_like(b)
    if P.size == 0:
        return z
    A = K[np.ix_(P, P)]
    try:
        z[P] = np.linalg.solve(A, b[P])
    except np.linalg.LinAlgError:
        z[P] = np.linalg.lstsq(A, b[P], rcond=None)[0]
    return z


def solve_nnk_coefficients(K_SS, K_Sq, tol: float = DUAL_TOL, max_iter: int | None = None) -> np.ndarray:
    """Active-set (Lawson-Hanson) solve of the NNK quadratic program.

    Works directly on the normal-equation form ``K theta = b`` so a
    factorization ``K = A'A`` is never needed. The entering variable is the
    largest positive dual ``b - K theta``; exact ties go to the lowest
    candidate position, which is what resolves duplicate candidates.

    Parameters
    ----------
    K_SS : (k, k) array
        Symmetric candidate kernel matrix.
    K_Sq : (k,) array
        Candidate-vs-query kernel values.
    tol : float
        Dual feasibility tolerance.
    max_iter : int, optional
        Cap on total (outer + inner) iterations, default ``10 * k``.

    Returns
    -------
    theta : (k,) ndarray, non-negative.
    """
    K = np.asarray(K_SS, dtype=np.float64)
    b = np.asarray(K_Sq, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"K_SS must be square, got shape {K.shape}")
    if b.shape != (K.shape[0],):
        raise ValueError(f"K_Sq length {b.size} does not match K_SS size {K.shape[0]}")
    if not (np.isfinite(K).all() and np.isfinite(b).all()):
        raise ValueError("non-finite kernel values")
    if not np.allclose(K, K.T, rtol=0, atol=1e-12):
        raise ValueError("K_SS is not symmetric")

    k = b.size
    cap = 10 * k if max_iter is None else max_iter
    theta = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    w = b - K @ theta
    it = 0
    while True:
        active_dual = np.where(passive, -np.inf, w)
        j = int(np.argmax(active_dual))
        if active_dual[j] <= tol:
            break
        it += 1
        if it > cap:
            raise NNKConvergenceError(f"active-set solver did not converge in {cap} iterations")
        passive[j] = True
        z = _solve_sub(K, b, passive)
        while np.any(z[passive] <= 0):
            it += 1
            if it > cap:
                raise NNKConvergenceError(f"active-set solver did not converge in {cap} iterations")
            bad = np.flatnonzero(passive & (z <= 0))
            ratios = theta[bad] / (theta[bad] - z[bad])
            alpha = ratios.min()
            theta = theta + alpha * (z - theta)
            theta[bad[ratios == alpha]] = 0.0
            passive &= theta > 0
            theta[~passive] = 0.0
            z = _solve_sub(K, b, passive)
        theta = z
        w = b - K @ theta
    return theta


def kkt_residuals(K_SS, K_Sq, theta):
    """Return ``(stationarity, dual_violation)`` for a candidate solution.

    Stationarity is ``max |(K theta - b)_i|`` over the support; the dual
    violation is ``max(0, -(K theta - b)_i)`` over the zeros.
    """
    g = np.asarray(K_SS) @ theta - np.asarray(K_Sq)
    pos = theta > 0
    stat = float(np.max(np.abs(g[pos]))) if pos.any() else 0.0
    dual = float(np.max(np.maximum(0.0, -g[~pos]))) if (~pos).any() else 0.0
    return stat, dual


def neighborhood_from_candidates(points, query, candidates, sigma, query_ref=None) -> NnkNeighborhood:
    """Solve NNK over an explicit, ordered candidate list."""
    candidates = np.asarray(candidates, dtype=np.int64)
    if candidates.size == 0:
        raise ValueError("empty candidate pool")
    X = points[candidates]
    K_SS = kernel_from_sq(pairwise_sq_distances(X), sigma)
    K_Sq = kernel_from_sq(sq_distances(X, query), sigma)
    theta = solve_nnk_coefficients(K_SS, K_Sq)
    keep = theta > PRUNE_TOL
    if not keep.any():
        # all coefficients numerically zero: fall back to the nearest candidate
        keep[0] = True
        theta = theta.copy()
        theta[0] = max(theta[0], PRUNE_TOL)
    raw = theta[keep]
    return NnkNeighborhood(
        query_ref=query_ref,
        neighbor_indices=candidates[keep],
        weights=raw / raw.sum(),
        raw_coefficients=raw,
        kernel_values=K_Sq[keep],
    )


def build_neighborhood(
    dataset,
    query,
    config: KernelConfig,
    candidate_filter=None,
    exclude: int | None = None,
) -> NnkNeighborhood:
    """NNK neighborhood of ``query`` among the ``k_init`` nearest training points.

    ``candidate_filter`` is a predicate on a label (or a boolean mask over
    the training set) restricting the pool; ``exclude`` drops one training
    index, typically the query itself.
    """
    points = dataset.vectors
    pool = None
    if candidate_filter is not None:
        if callable(candidate_filter):
            mask = np.fromiter((bool(candidate_filter(int(y))) for y in dataset.labels), bool, len(dataset))
        else:
            mask = np.asarray(candidate_filter, dtype=bool)
        pool = np.flatnonzero(mask)
    available = len(dataset) if pool is None else pool.size
    if exclude is not None and (pool is None or exclude in pool):
        available -= 1
    if available < 1:
        raise ValueError("empty candidate pool after filtering/exclusion")
    k = min(config.k_init, available)
    cand = knn_candidates(points, query, k, exclude=exclude, pool=pool)
    return neighborhood_from_candidates(points, query, cand, config.sigma, query_ref=exclude)


def polytope_diameter(dataset_or_points, indices) -> float:
    """Largest pairwise Euclidean distance among the indexed points."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("diameter of an empty set")
    if idx.size == 1:
        return 0.0
    points = np.asarray(getattr(dataset_or_points, "vectors", dataset_or_points), dtype=np.float64)
    return float(np.sqrt(np.max(pairwise_sq_distances(points[idx]))))


def training_neighborhoods(dataset, config: KernelConfig, same_label_only=False) -> list[NnkNeighborhood]:
    """Self-excluded NNK neighborhood for every training sample.

    With ``same_label_only`` the pool for sample ``q`` is restricted to
    samples sharing its label. A sample with no eligible candidate gets
    ``None``.
    """
    out = []
    labels = dataset.labels
    for q in range(len(dataset)):
        mask = labels == labels[q] if same_label_only else None
        pool = None if mask is None else np.flatnonzero(mask)
        available = len(dataset) - 1 if pool is None else pool.size - 1
        if available < 1:
            out.append(None)
            continue
        cand = knn_candidates(dataset.vectors, dataset.vectors[q], min(config.k_init, available), exclude=q, pool=pool)
        out.append(neighborhood_from_candidates(dataset.vectors, dataset.vectors[q], cand, config.sigma, query_ref=q))
    return out


def query_neighborhoods(dataset, queries, config: KernelConfig) -> list[NnkNeighborhood]:
    """NNK neighborhoods of external query points over the full training set."""
    return [build_neighborhood(dataset, np.asarray(x), config) for x in np.atleast_2d(queries)]
