"""Clusterer and model-selection oracles.

The BIC oracle here is a deliberately independent scalar re-implementation
(pure-Python loops, math.log) so a defect in the vectorized path cannot hide.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from openep.clustering import KMeansResult, bic, kmeans, select_k


def scalar_bic(points, assignments, centroids) -> float:
    """Independent re-implementation: shared-variance spherical Gaussian."""
    n = len(points)
    d = len(points[0])
    k = len(centroids)
    assert n > k
    inertia = 0.0
    for p, a in zip(points, assignments):
        for x, c in zip(p, centroids[a]):
            inertia += (x - c) ** 2
    variance = inertia / (d * (n - k))
    if variance <= 0:
        return float("-inf")
    loglik = 0.0
    for j in range(k):
        n_j = sum(1 for a in assignments if a == j)
        if n_j == 0:
            continue
        loglik += (
            n_j * math.log(n_j)
            - n_j * math.log(n)
            - (n_j * d / 2.0) * math.log(2.0 * math.pi * variance)
            - (n_j - 1) * d / 2.0
        )
    return (k * d + k) * math.log(n) - 2.0 * loglik


def blobs(n_per=20, d=8, centers=3, spread=0.1, gap=10.0, seed=7):
    rng = np.random.default_rng(seed)
    points = []
    labels = []
    for c in range(centers):
        center = np.zeros(d)
        center[c % d] = gap * (c + 1)
        points.append(center + rng.normal(0, spread, size=(n_per, d)))
        labels.extend([c] * n_per)
    return np.vstack(points), np.array(labels)


def test_kmeans_square_corners_k4_zero_inertia():
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    result = kmeans(pts, 4)
    assert result.inertia == pytest.approx(0.0, abs=1e-12)
    assert sorted(map(tuple, result.centroids)) == sorted(map(tuple, pts))


def test_kmeans_k1_is_mean_and_total_sq_deviation():
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0], [1.0, 1.0]])
    result = kmeans(pts, 1)
    assert np.allclose(result.centroids[0], pts.mean(axis=0))
    expected = float(((pts - pts.mean(axis=0)) ** 2).sum())
    assert result.inertia == pytest.approx(expected, rel=1e-12)


def test_kmeans_recovers_blobs_up_to_permutation():
    pts, labels = blobs()
    result = kmeans(pts, 3)
    # brute-force label matching over all permutations
    from itertools import permutations

    best = 0
    for perm in permutations(range(3)):
        mapped = np.array([perm[a] for a in result.assignments])
        best = max(best, int((mapped == labels).sum()))
    assert best == len(labels)


def test_kmeans_inertia_monotone_over_iterations():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(40, 5))
    result = kmeans(pts, 4)
    history = result.inertia_history
    assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))


def test_kmeans_rejects_bad_k():
    pts = np.zeros((3, 2))
    with pytest.raises(ValueError):
        kmeans(pts, 4)
    with pytest.raises(ValueError):
        kmeans(pts, 0)


def test_kmeans_deterministic_given_inputs():
    rng = np.random.default_rng(11)
    pts = rng.normal(size=(30, 6))
    a = kmeans(pts, 5, seed=1)
    b = kmeans(pts, 5, seed=1)
    assert np.array_equal(a.assignments, b.assignments)
    assert np.array_equal(a.centroids, b.centroids)
    assert a.inertia == b.inertia


def test_kmeans_duplicate_points_keep_all_clusters_nonempty():
    pts = np.array([[0.0, 0.0]] * 3 + [[5.0, 5.0]] * 3)
    result = kmeans(pts, 2)
    counts = np.bincount(result.assignments, minlength=2)
    assert (counts > 0).all()


def test_bic_matches_scalar_reimplementation():
    pts, _ = blobs()
    for k in range(1, 9):
        result = kmeans(pts, k)
        ours = bic(pts, result.assignments, result.centroids)
        theirs = scalar_bic(
            pts.tolist(), result.assignments.tolist(), result.centroids.tolist()
        )
        assert ours == pytest.approx(theirs, rel=1e-9)


def test_bic_blob_curve_dips_at_three():
    pts, _ = blobs()
    curve = {}
    for k in (2, 3, 4):
        result = kmeans(pts, k)
        curve[k] = bic(pts, result.assignments, result.centroids)
    assert curve[3] < curve[2]
    assert curve[3] < curve[4]


def test_bic_degenerate_duplicates_is_neg_inf():
    pts = np.array([[1.0, 1.0]] * 5)
    result = kmeans(pts, 1)
    assert bic(pts, result.assignments, result.centroids) == float("-inf")


def test_bic_rejects_k_equal_n():
    pts = np.array([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValueError):
        bic(pts, [0, 1], pts)


def test_select_k_finds_three_blobs():
    pts, labels = blobs()
    start = time.monotonic()
    selection = select_k(pts, range(1, 9))
    elapsed = time.monotonic() - start
    assert selection.k_selected == 3
    assert elapsed < 1.0
    assert set(selection.bic_by_k) == set(range(1, 9))
    assert selection.k_selected == min(
        selection.bic_by_k, key=lambda k: (selection.bic_by_k[k], k)
    )
    from itertools import permutations

    best = 0
    for perm in permutations(range(3)):
        mapped = np.array([perm[a] for a in selection.best.assignments])
        best = max(best, int((mapped == labels).sum()))
    assert best == len(labels)


def test_select_k_two_points_clamps_to_k1():
    # BIC needs n > k, so k=2 is clamped away for two points; the k=1 value
    # is checked against the scalar oracle.
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    selection = select_k(pts, [1, 2])
    assert selection.k_selected == 1
    assert set(selection.bic_by_k) == {1}
    result = kmeans(pts, 1)
    assert selection.bic_by_k[1] == pytest.approx(
        scalar_bic(pts.tolist(), result.assignments.tolist(), result.centroids.tolist()),
        rel=1e-12,
    )


def test_select_k_single_point_trivial():
    selection = select_k(np.array([[3.0, 4.0]]))
    assert selection.k_selected == 1
    assert selection.bic_by_k == {}
    assert selection.best.iterations == 0


def test_select_k_empty_is_none():
    assert select_k(np.empty((0, 4))) is None


def test_select_k_ties_pick_smallest_k():
    # Duplicated points make every valid k a perfect (-inf) fit; the smallest
    # k must win.
    pts = np.array([[2.0, 2.0]] * 6)
    selection = select_k(pts, range(1, 4))
    assert selection.k_selected == 1
    assert all(v == float("-inf") for v in selection.bic_by_k.values())
