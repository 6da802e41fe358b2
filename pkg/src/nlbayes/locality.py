"""Mahalanobis-ball subsampling and single-linkage flat clustering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

from .ensemble import Ensemble
from .errors import InsufficientEnsembleError, NumericalError

# Floor for a zero clustering threshold, so identical samples still merge.
MIN_THRESHOLD = 1e-12


def _gamma_cholesky(gamma) -> np.ndarray:
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    try:
        return linalg.cholesky(gamma, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("gamma is not positive definite") from exc


def mahalanobis_distance(a, b, gamma) -> float:
    """``sqrt((a - b)^T gamma^-1 (a - b))``."""
    L = _gamma_cholesky(gamma)
    diff = np.atleast_1d(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    z = linalg.solve_triangular(L, diff, lower=True)
    return float(np.sqrt(z @ z))


def mahalanobis_distances(points, center, gamma) -> np.ndarray:
    """Row-wise Mahalanobis distance of ``points`` to ``center``."""
    L = _gamma_cholesky(gamma)
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    diff = P - np.atleast_1d(np.asarray(center, dtype=float))[None, :]
    z = linalg.solve_triangular(L, diff.T, lower=True)
    return np.sqrt(np.einsum("ij,ij->j", z, z))


@dataclass(frozen=True)
class SubsampleResult:
    indices: np.ndarray
    radius: float

    @property
    def M(self) -> int:
        return int(self.indices.size)


def subsample(ens: Ensemble, v_hat, gamma, radius: float = 1.0) -> SubsampleResult:
    """Members whose observed block lies within ``radius`` of ``v_hat`` in the gamma-norm."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    dist = mahalanobis_distances(ens.v, v_hat, gamma)
    return SubsampleResult(np.flatnonzero(dist <= radius), float(radius))


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray
    cluster_means: np.ndarray
    cluster_sizes: np.ndarray
    selected: int

    @property
    def n_clusters(self) -> int:
        return int(self.cluster_sizes.size)

    @property
    def selected_mean(self) -> np.ndarray:
        return self.cluster_means[self.selected]


def single_linkage_flat_clusters(samples, threshold: float) -> ClusterResult:
    """Cut the single-linkage dendrogram of ``samples`` at ``threshold``.

    Two samples share a cluster iff they are joined by a chain of hops of
    Euclidean length at most ``threshold``. Cluster ids follow the order in
    which clusters first appear among the samples; the selected cluster is
    the most populated one, ties going to the lowest id.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    if N < 1:
        raise ValueError("need at least one sample")
    if threshold <= 0:
        raise ValueError("threshold must be positive")

    if N == 1:
        raw = np.zeros(1, dtype=int)
    else:
        # condensed distances; a raw N x N sample matrix could be mistaken for one
        raw = fcluster(linkage(pdist(X), method="single"), threshold, criterion="distance")
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    # relabel so ids follow first occurrence
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    labels = rank[inverse.ravel()]

    n_clusters = order.size
    sizes = np.bincount(labels, minlength=n_clusters)
    sums = np.zeros((n_clusters, X.shape[1]))
    np.add.at(sums, labels, X)
    means = sums / sizes[:, None]
    return ClusterResult(labels, means, sizes, int(np.argmax(sizes)))


def cluster_threshold(samples) -> float:
    """Root-mean-square per-dimension sample standard deviation (unbiased)."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise InsufficientEnsembleError(f"need at least 2 samples, got {X.shape[0]}")
    return float(np.sqrt(np.mean(X.var(axis=0, ddof=1))))
