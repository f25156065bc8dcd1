import logging

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp
from sklearn.metrics import silhouette_samples

from .clustering import assign_kmeans, fca_membership, log_densities
from .errors import DegenerateClustering, DimensionMismatch, InvalidParameter
from .objects.clustering import ClusterModel
from .objects.consensus import ConsensusRun
from .objects.metrics import Telemetry
from .objects.topology import Topology

__all__ = (
    "sse",
    "silhouette",
    "fca_objective",
    "gmm_log_likelihood",
    "elbow",
    "record_telemetry",
)

logger = logging.getLogger(__name__)


def sse(data, centroids, labels=None) -> float:
    """Returns the sum of squared distances of the observations to their centroids.

    Parameters
    ----------
    data: array-like
        The ``N x D`` observations.
    centroids: array-like
        The ``K x D`` centroids.
    labels: array-like | :class:`None`
        The assigned cluster of every observation. Defaults to the nearest centroid.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    centroids = np.atleast_2d(np.asarray(centroids, dtype=float))

    if labels is None:
        labels = assign_kmeans(data, centroids)

    return float(np.sum((data - centroids[np.asarray(labels)]) ** 2))


def silhouette(data, labels) -> float:
    """Returns the mean silhouette coefficient of hard assignments.

    Observations alone in their cluster score 0.

    Raises
    ------
    DegenerateClustering
        If fewer than 2 clusters are nonempty.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    labels = np.asarray(labels)

    if labels.shape != (data.shape[0],):
        raise DimensionMismatch((data.shape[0],), labels.shape, "labels")

    effective = len(np.unique(labels))

    if effective < 2:
        raise DegenerateClustering(effective)

    if effective == data.shape[0]:
        return 0.0

    return float(np.mean(silhouette_samples(data, labels)))


def fca_objective(data, model: ClusterModel) -> float:
    """Returns ``sum_n sum_k rho_nk^m |y_n - mu_k|^2``."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    memberships = fca_membership(data, model.centroids, model.fuzziness)
    distances = cdist(data, model.centroids, "sqeuclidean")
    return float(np.sum(memberships**model.fuzziness * distances))


def gmm_log_likelihood(data, model: ClusterModel) -> float:
    """Returns the log-likelihood of the data under a gmm model."""
    data = np.atleast_2d(np.asarray(data, dtype=float))

    with np.errstate(divide="ignore"):
        log_weights = np.log(model.weights)

    return float(np.sum(logsumexp(log_densities(data, model) + log_weights, axis=1)))


def elbow(ks, curve) -> int:
    """Locates the elbow of an SSE curve at its largest second difference.

    Raises
    ------
    InvalidParameter
        If fewer than three points are given.
    """
    ks = list(ks)
    curve = np.asarray(curve, dtype=float)

    if len(ks) < 3 or curve.shape != (len(ks),):
        raise InvalidParameter("ks", ks, "the elbow needs at least three matching points")

    second = curve[:-2] - 2 * curve[1:-1] + curve[2:]
    return int(ks[int(np.argmax(second)) + 1])


def record_telemetry(
    topology: Topology,
    runs: list[ConsensusRun],
    iterations: int | None = None,
    bytes_per_float: int = 4,
) -> Telemetry:
    """Counts what every agent computed and sent during a list of consensus runs.

    Every round, agent ``i`` sends one message to each of its ``d_i``
    neighbours, each carrying the whole state, and performs ``d_i + 1``
    multiplications per state entry while mixing.

    Parameters
    ----------
    topology: :class:`.objects.topology.Topology`
        The communication graph.
    runs: list[:class:`.objects.consensus.ConsensusRun`]
        The consensus runs, in execution order.
    iterations: :class:`int` | :class:`None`
        The outer clustering iterations. Defaults to the number of runs.
    bytes_per_float: :class:`int`
        The size of one transmitted float.

    Returns
    -------
    :class:`.objects.metrics.Telemetry`
        The counters.
    """
    telemetry = Telemetry(
        topology.degrees,
        len(runs) if iterations is None else iterations,
        runs[0].dim if runs else 0,
        bytes_per_float,
    )

    for run in runs:
        telemetry.add_consensus(run.rounds, run.dim)

    logger.debug("Recorded %r", telemetry)
    return telemetry
