"""K-means with deterministic seeding and BIC-based choice of cluster count.

The clusterer is deliberately reproducible: greedy farthest-point seeding
(first center is the point nearest the global mean), first-index tie-breaks
everywhere, and empty clusters re-seeded from the point farthest from its
centroid. Model selection scores every candidate k with a spherical-Gaussian
BIC (lower is better) and keeps the whole curve for audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

MAX_ITERATIONS = 100
DEFAULT_K_MAX = 10


@dataclass
class KMeansResult:
    assignments: np.ndarray  # (n,) cluster index per point
    centroids: np.ndarray  # (k, d)
    inertia: float
    iterations: int
    inertia_history: list[float] = field(default_factory=list)


@dataclass
class KSelection:
    k_selected: int
    bic_by_k: dict[int, float]
    best: KMeansResult
    seed: int = 0


def _sq_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _seed_indices(points: np.ndarray, k: int) -> list[int]:
    mean = points.mean(axis=0)
    first = int(np.argmin(((points - mean) ** 2).sum(axis=1)))
    chosen = [first]
    min_d2 = ((points - points[first]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        min_d2 = np.minimum(min_d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return chosen


def _fix_empty_clusters(
    points: np.ndarray, centers: np.ndarray, assign: np.ndarray, k: int
) -> np.ndarray:
    counts = np.bincount(assign, minlength=k)
    empty = [j for j in range(k) if counts[j] == 0]
    if not empty:
        return assign
    assign = assign.copy()
    dist_own = np.take_along_axis(
        _sq_distances(points, centers), assign[:, None], axis=1
    ).ravel()
    order = np.argsort(-dist_own, kind="stable")
    taken: set[int] = set()
    for j in empty:
        for idx in order:
            i = int(idx)
            if i in taken or counts[assign[i]] <= 1:
                continue
            counts[assign[i]] -= 1
            assign[i] = j
            counts[j] = 1
            taken.add(i)
            break
    return assign


def kmeans(
    embeddings: Sequence[Sequence[float]] | np.ndarray,
    k: int,
    seed: int = 0,
    max_iterations: int = MAX_ITERATIONS,
) -> KMeansResult:
    """Lloyd's algorithm, deterministic given (inputs, k, seed).

    The seed is recorded for provenance; the procedure itself has no random
    choices left in it.
    """
    points = np.asarray(embeddings, dtype=float)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("embeddings must be a non-empty 2-D array")
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")

    centers = points[_seed_indices(points, k)].copy()
    prev: Optional[np.ndarray] = None
    history: list[float] = []
    iterations = 0
    assign = np.zeros(n, dtype=int)

    for iterations in range(1, max_iterations + 1):
        assign = np.argmin(_sq_distances(points, centers), axis=1)
        assign = _fix_empty_clusters(points, centers, assign, k)
        if prev is not None and np.array_equal(assign, prev):
            break
        for j in range(k):
            centers[j] = points[assign == j].mean(axis=0)
        d2 = _sq_distances(points, centers)
        history.append(float(np.take_along_axis(d2, assign[:, None], axis=1).sum()))
        prev = assign

    inertia = history[-1] if history else 0.0
    return KMeansResult(
        assignments=assign,
        centroids=centers,
        inertia=inertia,
        iterations=iterations,
        inertia_history=history,
    )


def bic(
    embeddings: Sequence[Sequence[float]] | np.ndarray,
    assignments: Sequence[int] | np.ndarray,
    centroids: Sequence[Sequence[float]] | np.ndarray,
) -> float:
    """Spherical-Gaussian BIC of a clustering; lower is better.

    Uses a shared variance estimate over all clusters. A zero variance
    (duplicate points fit exactly) returns -inf so a perfect fit wins, which
    combined with the smallest-k tie rule keeps degenerate inputs sane.
    """
    points = np.asarray(embeddings, dtype=float)
    assign = np.asarray(assignments, dtype=int)
    centers = np.asarray(centroids, dtype=float)
    n, d = points.shape
    k = len(centers)
    if n <= k:
        raise ValueError(f"BIC needs n > k (got n={n}, k={k})")

    diff = points - centers[assign]
    inertia = float((diff * diff).sum())
    variance = inertia / (d * (n - k))
    if variance <= 0.0:
        return float("-inf")

    log_likelihood = 0.0
    for j in range(k):
        n_j = int((assign == j).sum())
        if n_j == 0:
            continue
        log_likelihood += (
            n_j * math.log(n_j)
            - n_j * math.log(n)
            - (n_j * d / 2.0) * math.log(2.0 * math.pi * variance)
            - (n_j - 1) * d / 2.0
        )
    params = k * d + k
    return params * math.log(n) - 2.0 * log_likelihood


def select_k(
    embeddings: Sequence[Sequence[float]] | np.ndarray,
    k_range: Optional[Iterable[int]] = None,
    seed: int = 0,
    k_max: int = DEFAULT_K_MAX,
) -> Optional[KSelection]:
    """Scan candidate cluster counts and keep the BIC-optimal one.

    Candidates are clamped to [1, n-1] (BIC is undefined at k >= n); ties go
    to the smallest k. Fewer than two points short-circuit to one trivial
    cluster with an empty curve. Empty input returns None.
    """
    points = np.asarray(embeddings, dtype=float)
    if points.size == 0:
        return None
    n = len(points)
    if n == 1:
        trivial = KMeansResult(
            assignments=np.zeros(1, dtype=int),
            centroids=points.copy(),
            inertia=0.0,
            iterations=0,
        )
        return KSelection(k_selected=1, bic_by_k={}, best=trivial, seed=seed)

    upper = min(n - 1, k_max)
    candidates = sorted(set(k_range) if k_range is not None else range(1, upper + 1))
    candidates = [k for k in candidates if 1 <= k <= n - 1]
    if not candidates:
        raise ValueError("no valid k in range after clamping to [1, n-1]")

    bic_by_k: dict[int, float] = {}
    results: dict[int, KMeansResult] = {}
    for k in candidates:
        result = kmeans(points, k, seed=seed)
        results[k] = result
        bic_by_k[k] = bic(points, result.assignments, result.centroids)

    best_k = candidates[0]
    for k in candidates[1:]:
        if bic_by_k[k] < bic_by_k[best_k]:
            best_k = k
    return KSelection(k_selected=best_k, bic_by_k=bic_by_k, best=results[best_k], seed=seed)
