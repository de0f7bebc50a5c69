"""Embedding-space analytics: drift, PCA projection, space diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .stats import rank_correlation

log = logging.getLogger(__name__)


def _as_array(v) -> np.ndarray:
    values = getattr(v, "values", v)
    return np.asarray(values, dtype=np.float64)


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), in [0, 2]. Zero vectors are an error."""
    va, vb = _as_array(a), _as_array(b)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine distance undefined for zero vectors")
    d = 1.0 - float(va @ vb) / (na * nb)
    return min(2.0, max(0.0, d))


def centroid(vectors) -> np.ndarray:
    mat = np.stack([_as_array(v) for v in vectors])
    return mat.mean(axis=0)


def trajectory_drift(centroids) -> float:
    """Cosine distance between the first and last centroids of a path."""
    centroids = list(centroids)
    if not centroids:
        raise ValueError("trajectory_drift requires at least one centroid")
    if len(centroids) == 1:
        return 0.0
    return cosine_distance(centroids[0], centroids[-1])


@dataclass(frozen=True)
class Trajectory:
    topic: str
    labels: tuple
    centroids: tuple
    drift: float


def build_trajectory(topic: str, labeled_centroids) -> Trajectory:
    """labeled_centroids: ordered (window label, centroid vector) pairs."""
    labels = tuple(l for l, _ in labeled_centroids)
    cents = tuple(np.asarray(c, dtype=np.float64) for _, c in labeled_centroids)
    drift = trajectory_drift(cents) if cents else 0.0
    return Trajectory(topic=topic, labels=labels, centroids=cents, drift=drift)


def pca_project(vectors, dims: int = 2) -> tuple[np.ndarray, list[float]]:
    """Mean-centered projection onto the top principal axes.

    Sign convention: each axis is flipped so its largest-magnitude component
    is positive, making plots reproducible. Rank-deficient inputs get zero
    axes (with a warning) rather than failing.
    """
    mat = np.stack([_as_array(v) for v in vectors])
    m, d = mat.shape
    if m < dims + 1:
        raise ValueError(f"need at least {dims + 1} vectors for {dims}-D PCA")
    centered = mat - mat.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    tol = max(m, d) * np.finfo(np.float64).eps * (svals[0] if svals.size else 0.0)
    rank = int(np.sum(svals > tol))
    if rank < dims:
        log.warning("PCA input has rank %d < %d; padding with zero axes",
                    rank, dims)
    components = np.zeros((dims, d))
    explained = [0.0] * dims
    for i in range(min(dims, rank)):
        axis = vt[i]
        j = int(np.argmax(np.abs(axis)))
        if axis[j] < 0:
            axis = -axis
        components[i] = axis
        explained[i] = float(svals[i] ** 2 / (m - 1))
    points = centered @ components.T
    return points, explained


def embedding_diagnostics(vectors, scores, hits) -> dict:
    """Four brute-force-checkable scalars over a hypothesis embedding set.

    diversity         mean pairwise cosine distance
    centroid/score    Pearson r between centroid distance and score
    nn/score          Spearman rho between a point's score and its nearest
                      semantic neighbor's score
    hit/miss split    mean centroid distance of hits minus misses
    """
    mat = np.stack([_as_array(v) for v in vectors])
    n = mat.shape[0]
    if n < 3:
        raise ValueError("diagnostics require at least 3 vectors")
    scores = list(scores)
    hits = list(hits)
    if len(scores) != n or len(hits) != n:
        raise ValueError("scores/hits must align with vectors")

    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero vectors are not embeddable")
    unit = mat / norms[:, None]
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    dist = 1.0 - sims
    iu = np.triu_indices(n, k=1)
    diversity = float(dist[iu].mean())

    center = mat.mean(axis=0)
    centroid_dist = [cosine_distance(mat[i], center) for i in range(n)]

    def _corr(xs, ys, method):
        try:
            res = rank_correlation(xs, ys, method=method)
            return res.statistic, res.p_value
        except ValueError:
            return None, None

    pearson_r, pearson_p = _corr(centroid_dist, scores, "pearson")

    np.fill_diagonal(dist, np.inf)
    nn_idx = np.argmin(dist, axis=1)
    nn_scores = [scores[j] for j in nn_idx]
    spearman_r, spearman_p = _corr(scores, nn_scores, "spearman")

    hit_d = [d for d, h in zip(centroid_dist, hits) if h]
    miss_d = [d for d, h in zip(centroid_dist, hits) if not h]
    separation = None
    if hit_d and miss_d:
        separation = sum(hit_d) / len(hit_d) - sum(miss_d) / len(miss_d)

    return {
        "n": n,
        "diversity": diversity,
        "centroid_score_pearson": pearson_r,
        "centroid_score_p": pearson_p,
        "nn_score_spearman": spearman_r,
        "nn_score_p": spearman_p,
        "hit_miss_separation": separation,
    }
