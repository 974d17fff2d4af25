"""
Clustering machinery: seeded k-means, the silhouette score and cluster purity.

Randomness comes from a single ``numpy.random.Generator(PCG64(seed))`` stream. PCG64 output is
specified independently of platform, so a (matrix, params) pair always gives the same clustering.
Restarts draw from that one stream in order.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pydantic
from pydantic import ConfigDict, Field
from scipy.spatial.distance import cdist
from sklearn import metrics

from .core import Rows, as_matrix, distance_matrix

logger = logging.getLogger(__name__)

PRNG_NAME = "PCG64"
DEFAULT_SEED = 0xC0FFEE
MAX_SEED = 2 ** 64 - 1


class KMeansParams(pydantic.BaseModel):
    """Configuration of a k-means run; ``tolerance`` bounds the largest centroid displacement."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=1)
    seed: int = Field(default=DEFAULT_SEED, ge=0, le=MAX_SEED)
    max_iterations: int = Field(default=300, ge=1)
    tolerance: float = Field(default=1e-4, gt=0)
    n_init: int = Field(default=10, ge=1)


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """
    The best k-means restart.

    :param assignments: Cluster index per row, in [0, k).
    :param centroids: k x D, each the mean of its members.
    :param iterations_run: Lloyd iterations of the returned restart.
    :param converged: Whether the displacement fell below tolerance before max_iterations.
    :param inertia: Sum of squared distances of rows to their centroid.
    :param inertia_history: Inertia after every Lloyd iteration of the returned restart.
    :param restart_inertias: Final inertia of every restart, in run order.
    """

    assignments: np.ndarray
    centroids: np.ndarray
    iterations_run: int
    converged: bool
    inertia: float
    inertia_history: tuple[float, ...] = ()
    restart_inertias: tuple[float, ...] = ()

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _kmeans_plusplus(matrix: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Pick k initial centroids among the rows by D^2 sampling."""
    n = matrix.shape[0]
    chosen = [int(rng.integers(n))]
    closest = cdist(matrix, matrix[chosen[0]][None, :], "sqeuclidean")[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            cumulative = np.cumsum(closest)
            index = int(np.searchsorted(cumulative, rng.random() * total, side="right"))
            index = min(index, int(np.flatnonzero(closest > 0)[-1]))
        else:
            # Every row coincides with a chosen centroid.
            taken = set(chosen)
            index = next(i for i in range(n) if i not in taken)
        chosen.append(index)
        closest = np.minimum(closest, cdist(matrix, matrix[index][None, :], "sqeuclidean")[:, 0])
    return matrix[chosen].copy()


def _repair_empty(labels: np.ndarray, sq_distances: np.ndarray, k: int) -> np.ndarray:
    """Give every empty cluster the row farthest from its own centroid, lowest index on ties."""
    counts = np.bincount(labels, minlength=k)
    if counts.all():
        return labels
    labels = labels.copy()
    own = sq_distances[np.arange(len(labels)), labels]
    for cluster in np.flatnonzero(counts == 0):
        candidates = np.where(counts[labels] > 1, own, -np.inf)
        index = int(np.argmax(candidates))
        counts[labels[index]] -= 1
        labels[index] = cluster
        counts[cluster] = 1
    return labels


def _lloyd(matrix: np.ndarray, centroids: np.ndarray, params: KMeansParams):
    history = []
    converged = False
    iterations = 0
    labels = None
    for iterations in range(1, params.max_iterations + 1):
        sq_distances = cdist(matrix, centroids, "sqeuclidean")
        labels = _repair_empty(np.argmin(sq_distances, axis=1), sq_distances, params.k)
        updated = np.vstack([matrix[labels == j].mean(axis=0) for j in range(params.k)])
        history.append(float(((matrix - updated[labels]) ** 2).sum()))
        shift = float(np.max(np.linalg.norm(updated - centroids, axis=1)))
        centroids = updated
        if shift < params.tolerance:
            converged = True
            break
    return labels, centroids, iterations, converged, history


def kmeans(matrix: Rows, params: KMeansParams) -> ClusterAssignment:
    """
    Lloyd's k-means with k-means++ initialisation, keeping the restart with the lowest inertia.

    Nearest-centroid ties go to the lower cluster index; ties between restarts go to the earlier one.

    :param matrix: N x D rows, N >= k.
    :param params: The configuration.
    :return: The best assignment.
    :raises: ValueError if N < k or the input is not finite.
    """
    matrix = as_matrix(matrix)
    if not np.isfinite(matrix).all():
        raise ValueError("k-means input contains non-finite values")
    if matrix.shape[0] < params.k:
        raise ValueError(f"k-means needs at least k={params.k} rows, got {matrix.shape[0]}")
    rng = make_rng(params.seed)
    best = None
    restart_inertias = []
    for restart in range(params.n_init):
        initial = _kmeans_plusplus(matrix, params.k, rng)
        labels, centroids, iterations, converged, history = _lloyd(matrix, initial, params)
        restart_inertias.append(history[-1])
        logger.debug("k-means restart %d: inertia=%.6g iterations=%d converged=%s",
                     restart, history[-1], iterations, converged)
        if best is None or history[-1] < best[4][-1]:
            best = (labels, centroids, iterations, converged, history)
    labels, centroids, iterations, converged, history = best
    return ClusterAssignment(
        assignments=labels,
        centroids=centroids,
        iterations_run=iterations,
        converged=converged,
        inertia=history[-1],
        inertia_history=tuple(history),
        restart_inertias=tuple(restart_inertias),
    )


def silhouette_samples(matrix: Rows, labels, distances: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Per-sample silhouette s(i) = (b - a) / max(a, b).

    a is the mean distance to the other members of the own class, b the smallest mean distance to
    another class. Members of singleton classes score 0, as do samples with a = b = 0.

    :param matrix: N x D rows.
    :param labels: N class ids of any integer values.
    :param distances: Precomputed N x N distance matrix, computed when omitted.
    :raises: ValueError for N < 2, fewer than 2 classes, or mismatched lengths.
    """
    matrix = as_matrix(matrix)
    labels = np.asarray(labels).reshape(-1)
    n = matrix.shape[0]
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels given for {n} rows")
    if n < 2:
        raise ValueError("silhouette needs at least 2 samples")
    n_classes = len(np.unique(labels))
    if n_classes < 2:
        raise ValueError("silhouette needs at least 2 distinct classes")
    if n_classes == n:
        # Every class is a singleton.
        return np.zeros(n)
    if distances is None:
        distances = distance_matrix(matrix)
    return metrics.silhouette_samples(distances, labels, metric="precomputed")


def silhouette(matrix: Rows, labels, distances: Optional[np.ndarray] = None) -> float:
    """Mean silhouette over all samples, in [-1, 1]."""
    return float(np.mean(silhouette_samples(matrix, labels, distances)))


def purity(predicted, truth) -> float:
    """
    Cluster purity: (1/N) * sum over clusters of the size of its largest class.

    :param predicted: Cluster id per sample.
    :param truth: Class id per sample.
    :return: A value in (0, 1], 1 iff every cluster is class-pure.
    """
    predicted = np.asarray(predicted).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if len(predicted) != len(truth):
        raise ValueError(f"length mismatch: {len(predicted)} predictions, {len(truth)} truth labels")
    if len(predicted) == 0:
        raise ValueError("purity of an empty labelling is undefined")
    _, cluster = np.unique(predicted, return_inverse=True)
    _, klass = np.unique(truth, return_inverse=True)
    cluster = cluster.reshape(-1)
    klass = klass.reshape(-1)
    table = np.zeros((cluster.max() + 1, klass.max() + 1), dtype=np.int64)
    np.add.at(table, (cluster, klass), 1)
    return float(table.max(axis=1).sum() / len(predicted))
