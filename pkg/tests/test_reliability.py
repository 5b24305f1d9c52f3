import itertools
import math

import numpy as np
import pytest
from conftest import make_dataset, random_dataset
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import nnk_enumeration

from nnkrel.clustering import ClusterModel, fit_supervised, fit_unsupervised
from nnkrel.geometry import KernelConfig, kernel_from_sq, pairwise_sq_distances, sq_distances
from nnkrel.reliability import (
    ReliabilityVector,
    knn_reliability,
    nnk_diameter_ratio_reliability,
    nnk_weights_reliability,
    read_reliability_csv,
    supervised_kmeans_reliability,
    unsupervised_kmeans_reliability,
    write_reliability_csv,
)


def line(labels):
    """Sample 0 at the origin, the rest at 1, 2, 3, ... on a line."""
    pts = np.arange(len(labels), dtype=float)[:, None] * np.array([[1.0, 0.0]])
    return make_dataset(pts, labels)


def test_knn_counts():
    assert knn_reliability(line([0, 0, 0, 0, 1]), 3).scores[0] == 1.0
    assert knn_reliability(line([0, 1, 1, 1, 0]), 3).scores[0] == 0.0
    assert knn_reliability(line([0, 0, 1, 0, 1, 0, 1, 1]), 5).scores[0] == pytest.approx(0.6)


def test_knn_k_range():
    with pytest.raises(ValueError):
        knn_reliability(line([0, 1, 0]), 3)


def test_nnk_weights_all_and_none():
    ds = make_dataset([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [5, 5]], [0, 0, 0, 0, 1])
    cfg = KernelConfig(1.0, 3)
    assert nnk_weights_reliability(ds, cfg).scores[0] == 1.0
    ds2 = ds.with_labels([0, 1, 1, 1, 0])
    assert nnk_weights_reliability(ds2, cfg).scores[0] == 0.0


def test_nnk_weights_symmetric_pair():
    ds = make_dataset([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]], [0, 0, 1])
    # oracle: mirror pair gets equal weight
    pts = ds.vectors[1:]
    theta = nnk_enumeration(kernel_from_sq(pairwise_sq_distances(pts), 1.0), kernel_from_sq(sq_distances(pts, ds.vectors[0]), 1.0))
    np.testing.assert_allclose(theta / theta.sum(), [0.5, 0.5], atol=1e-12)
    assert nnk_weights_reliability(ds, KernelConfig(1.0, 2)).scores[0] == pytest.approx(0.5, abs=1e-12)


def test_diameter_ratio_identical_polytopes():
    ds = make_dataset([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.3], [0.2, 1.0], [6, 6]], [0, 0, 0, 0, 1])
    assert nnk_diameter_ratio_reliability(ds, KernelConfig(1.0, 3)).scores[0] == 1.0


def test_diameter_ratio_thin_same_class_pool():
    ds = make_dataset([[0.0, 0.0], [5.0, 5.0], [1.0, 0.0], [-1.0, 0.0]], [0, 0, 1, 1])
    assert nnk_diameter_ratio_reliability(ds, KernelConfig(1.0, 3)).scores[0] == 0.0


def _oracle_support(pts, q, sigma):
    theta = nnk_enumeration(kernel_from_sq(pairwise_sq_distances(pts), sigma), kernel_from_sq(sq_distances(pts, q), sigma))
    return np.flatnonzero(theta > 1e-8)


def _brute_diam(pts):
    return max((np.linalg.norm(a - b) for a, b in itertools.combinations(pts, 2)), default=0.0)


def test_diameter_ratio_mixed_geometry():
    pts = np.array([[0.0, 0.0], [0.8, 0.0], [-0.8, 0.1], [0.1, 0.9], [0.0, 2.5], [2.4, -1.0], [-2.2, -1.5]])
    y = [0, 1, 1, 1, 0, 0, 0]
    ds = make_dataset(pts, y)
    sigma = 1.0
    others = np.arange(1, 7)
    same = np.array([4, 5, 6])
    s_full = others[_oracle_support(pts[others], pts[0], sigma)]
    s_same = same[_oracle_support(pts[same], pts[0], sigma)]
    expected = _brute_diam(pts[s_full]) / _brute_diam(pts[s_same])
    got = nnk_diameter_ratio_reliability(ds, KernelConfig(sigma, 6)).scores[0]
    assert 0.0 < expected < 1.0
    assert got == pytest.approx(expected, rel=1e-9)


def supervised_model(centroids, labels):
    centroids = np.asarray(centroids, dtype=float)
    return ClusterModel(centroids, "supervised", np.ones(len(labels), int), hard_labels=np.array(labels))


def test_supervised_equidistant():
    ds = make_dataset([[0.0, 0.0], [1.0, 1.0]], [0, 1])
    model = supervised_model([[1.0, 0.0], [-1.0, 0.0]], [0, 1])
    assert supervised_kmeans_reliability(ds, model).scores[0] == pytest.approx(0.5)
    ds1 = ds.with_labels([1, 1])
    assert supervised_kmeans_reliability(ds1, model).scores[0] == pytest.approx(0.5)


def test_supervised_separation_limit():
    prev = 0.0
    for sep in (1.0, 5.0, 20.0, 60.0):
        ds = make_dataset([[0.0, 0.0], [sep, 0.0]], [0, 1])
        s = supervised_kmeans_reliability(ds, supervised_model([[0.0, 0.0], [sep, 0.0]], [0, 1])).scores[0]
        assert s > prev
        prev = s
    assert prev == pytest.approx(1.0, abs=1e-12)


def test_supervised_three_class_softmax():
    ln2 = math.log(2)
    ds = make_dataset([[0.0, 0.0], [9.0, 9.0]], [2, 0], 3)
    model = supervised_model([[0.0, 0.0], [ln2, 0.0], [0.0, ln2]], [0, 1, 2])
    assert supervised_kmeans_reliability(ds, model).scores[0] == pytest.approx(0.25, rel=1e-12)


def test_supervised_takes_max_over_own_class():
    ds = make_dataset([[0.0, 0.0], [9.0, 9.0]], [0, 1])
    model = supervised_model([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], [1, 0, 0])
    w = np.exp(-np.array([0.0, 1.0, 2.0]))
    w /= w.sum()
    assert supervised_kmeans_reliability(ds, model).scores[0] == pytest.approx(w[1], rel=1e-12)


def unsupervised_model(centroids, dist):
    dist = np.asarray(dist, dtype=float)
    return ClusterModel(np.asarray(centroids, float), "unsupervised", np.ones(len(dist), int), label_distributions=dist)


def test_unsupervised_pure_cluster():
    ds = make_dataset([[0.0, 0.0], [3.0, 0.0]], [0, 1])
    model = unsupervised_model([[0.0, 0.0], [3.0, 0.0]], [[1, 0], [0, 1]])
    s = unsupervised_kmeans_reliability(ds, model).scores
    expected = 1.0 / (1.0 + math.exp(-3.0))
    np.testing.assert_allclose(s, [expected, expected], rtol=1e-12)
    assert s[0] < 1.0


def test_unsupervised_absent_label():
    ds = make_dataset([[0.0, 0.0], [3.0, 0.0]], [1, 1])
    model = unsupervised_model([[0.0, 0.0], [3.0, 0.0]], [[1, 0], [0, 1]])
    assert unsupervised_kmeans_reliability(ds, model).scores[0] == 0.0


def test_unsupervised_tie_goes_to_lowest_centroid():
    ds = make_dataset([[0.0, 0.0], [5.0, 5.0]], [0, 1])
    model = unsupervised_model([[1.0, 0.0], [-1.0, 0.0]], [[0.5, 0.5], [1.0, 0.0]])
    assert unsupervised_kmeans_reliability(ds, model).scores[0] == pytest.approx(0.25)


def test_mode_mismatch():
    ds = make_dataset([[0.0, 0.0], [1.0, 0.0]], [0, 1])
    sup = supervised_model([[0.0, 0.0], [1.0, 0.0]], [0, 1])
    uns = unsupervised_model([[0.0, 0.0], [1.0, 0.0]], [[1, 0], [0, 1]])
    with pytest.raises(ValueError):
        unsupervised_kmeans_reliability(ds, sup)
    with pytest.raises(ValueError):
        supervised_kmeans_reliability(ds, uns)


def all_five(ds, cfg, seed=0, kc=2, m=None):
    return {
        "knn": knn_reliability(ds, 5),
        "nnk_weights": nnk_weights_reliability(ds, cfg),
        "nnk_diam_ratio": nnk_diameter_ratio_reliability(ds, cfg),
        "kmeans_supervised": supervised_kmeans_reliability(ds, fit_supervised(ds, kc, seed)),
        "kmeans_unsupervised": unsupervised_kmeans_reliability(ds, fit_unsupervised(ds, m or 3 * ds.num_classes, seed)),
    }


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.5, 1.0, 100 * math.sqrt(6)]))
def test_scores_bounded(seed, sigma):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, n=45, d=6, C=3)
    for rel in all_five(ds, KernelConfig(sigma, 10), seed).values():
        assert len(rel) == len(ds)
        assert np.all((rel.scores >= 0) & (rel.scores <= 1))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.permutations([0, 1, 2, 3]))
def test_label_permutation_equivariance(seed, perm):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, n=48, d=5, C=4)
    perm = np.array(perm)
    permuted = ds.with_labels(perm[ds.labels])
    cfg = KernelConfig(1.0, 10)
    a, b = all_five(ds, cfg, seed), all_five(permuted, cfg, seed)
    for method in a:
        np.testing.assert_allclose(a[method].scores, b[method].scores, rtol=0, atol=1e-12, err_msg=method)


def test_separable_fixture_is_perfect(small_separable):
    train, _ = small_separable
    cfg = KernelConfig.for_dim(train.dim)
    assert np.all(knn_reliability(train, 15).scores == 1.0)
    assert np.all(nnk_weights_reliability(train, KernelConfig(cfg.sigma, 15)).scores == 1.0)


def test_csv_roundtrip(tmp_path):
    ds = line([0, 1, 0, 1])
    rel = ReliabilityVector([0.25, 1.0, 0.0, 0.5], "knn")
    write_reliability_csv(tmp_path / "r.csv", ds, rel)
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "id,score,method"
    back = read_reliability_csv(tmp_path / "r.csv")
    np.testing.assert_array_equal(back.scores, rel.scores)
    assert back.method == "knn"


def test_vector_validation():
    with pytest.raises(ValueError):
        ReliabilityVector([1.5], "knn")
    with pytest.raises(ValueError):
        ReliabilityVector([0.5], "bogus")
