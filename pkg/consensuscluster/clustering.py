import logging

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist
from scipy.special import softmax
from scipy.stats import multivariate_normal
from sklearn.cluster import kmeans_plusplus

from .consensus import mixing_matrix, run_with_config
from .enums import CovarianceCentre, InitStrategy, Method
from .errors import (
    BudgetExhausted,
    ConsensusBudgetExhausted,
    DimensionMismatch,
    InvalidParameter,
    SingularCovariance,
)
from .objects.clustering import (
    ClusterModel,
    GlobalAggregate,
    LocalComparison,
    LocalSummary,
    StopRule,
)
from .objects.consensus import ConsensusConfig, ConsensusRun
from .objects.topology import Topology, WeightMatrix

__all__ = (
    "assign_kmeans",
    "fca_membership",
    "gmm_responsibility",
    "log_densities",
    "soft_assignments",
    "hard_assignments",
    "summary_weights",
    "summarize",
    "scatter_matrices",
    "local_summaries",
    "pack_summary",
    "unpack_state",
    "update_model",
    "update_covariances",
    "initial_centroids",
    "initial_model",
    "cluster_centralized",
    "cluster_distributed",
    "local_vs_global",
)

logger = logging.getLogger(__name__)

EMPTY_CLUSTER_WEIGHT = 1e-9
SINGULAR_DISTANCE = 1e-12
REGULARIZATION_SCALE = 1e-6


def _as_observations(values, what: str = "observations") -> np.ndarray:
    array = np.asarray(values, dtype=float)

    if array.ndim == 1:
        array = array[None, :]

    if array.ndim != 2:
        raise DimensionMismatch(("N", "D"), array.shape, what)

    return array


def _check_dims(data: np.ndarray, centroids: np.ndarray) -> None:
    if data.shape[1] != centroids.shape[1]:
        raise DimensionMismatch(("N", centroids.shape[1]), data.shape, "observations")


def assign_kmeans(observations, centroids) -> int | np.ndarray:
    """Assigns observations to their nearest centroid.

    Parameters
    ----------
    observations: array-like
        A single ``D``-vector or an ``N x D`` matrix.
    centroids: array-like
        The ``K x D`` centroids.

    Returns
    -------
    :class:`int` | :class:`numpy.ndarray`
        The cluster index of a single observation, or one index per row.
        Ties go to the lowest index.
    """
    single = np.ndim(observations) == 1
    data = _as_observations(observations)
    centroids = _as_observations(centroids, "centroids")
    _check_dims(data, centroids)

    labels = np.argmin(cdist(data, centroids, "sqeuclidean"), axis=1)
    return int(labels[0]) if single else labels


def fca_membership(observations, centroids, m: float = 2.0) -> np.ndarray:
    """Computes fuzzy memberships.

    The membership of cluster ``k`` is proportional to
    ``|y - mu_k| ^ (-2 / (m - 1))``. An observation closer than ``1e-12`` to a
    centroid belongs entirely to the nearest such centroid.

    Parameters
    ----------
    observations: array-like
        A single ``D``-vector or an ``N x D`` matrix.
    centroids: array-like
        The ``K x D`` centroids.
    m: :class:`float`
        The fuzziness, greater than 1.

    Returns
    -------
    :class:`numpy.ndarray`
        A ``K``-vector, or an ``N x K`` matrix whose rows sum to 1.
    """
    if not m > 1:
        raise InvalidParameter("m", m, "the fuzziness must be greater than 1")

    single = np.ndim(observations) == 1
    data = _as_observations(observations)
    centroids = _as_observations(centroids, "centroids")
    _check_dims(data, centroids)

    squared = cdist(data, centroids, "sqeuclidean")
    singular = squared < SINGULAR_DISTANCE**2
    memberships = np.zeros_like(squared)
    regular = ~singular.any(axis=1)

    if regular.any():
        memberships[regular] = softmax(-np.log(squared[regular]) / (m - 1), axis=1)

    for row in np.flatnonzero(~regular):
        memberships[row, np.argmin(squared[row])] = 1.0

    return memberships[0] if single else memberships


def log_densities(data: np.ndarray, model: ClusterModel) -> np.ndarray:
    """Returns the ``N x K`` Gaussian log densities of every observation under
    every component.

    Raises
    ------
    SingularCovariance
        If a covariance fails its Cholesky factorization.
    """
    densities = np.empty((data.shape[0], model.num_clusters))

    for k in range(model.num_clusters):
        try:
            scipy.linalg.cholesky(model.covariances[k], lower=True)

        except (scipy.linalg.LinAlgError, ValueError) as exception:
            raise SingularCovariance(k) from exception

        densities[:, k] = np.reshape(
            multivariate_normal.logpdf(data, model.centroids[k], model.covariances[k]),
            data.shape[0],
        )

    return densities


def gmm_responsibility(observations, model: ClusterModel) -> np.ndarray:
    """Computes the posterior probability of every Gaussian component.

    Parameters
    ----------
    observations: array-like
        A single ``D``-vector or an ``N x D`` matrix.
    model: :class:`.objects.clustering.ClusterModel`
        A gmm model.

    Returns
    -------
    :class:`numpy.ndarray`
        A ``K``-vector, or an ``N x K`` matrix whose rows sum to 1. Components
        with zero weight get zero responsibility.

    Raises
    ------
    SingularCovariance
        If a covariance is not positive definite.
    """
    single = np.ndim(observations) == 1
    data = _as_observations(observations)
    _check_dims(data, model.centroids)

    with np.errstate(divide="ignore"):
        log_weights = np.log(model.weights)

    responsibilities = softmax(log_densities(data, model) + log_weights, axis=1)
    return responsibilities[0] if single else responsibilities


def soft_assignments(method: Method, data, model: ClusterModel) -> np.ndarray:
    """Returns the ``N x K`` one-hot assignments, memberships or responsibilities."""
    data = _as_observations(data)

    if data.shape[0] == 0:
        return np.zeros((0, model.num_clusters))

    if method == Method.KMEANS:
        labels = assign_kmeans(data, model.centroids)
        return np.eye(model.num_clusters)[labels]

    if method == Method.FCA:
        return fca_membership(data, model.centroids, model.fuzziness)

    return gmm_responsibility(data, model)


def hard_assignments(method: Method, data, model: ClusterModel) -> np.ndarray:
    """Reduces the assignments of any method to cluster labels by argmax."""
    return np.argmax(soft_assignments(method, data, model), axis=1)


def summary_weights(method: Method, data, model: ClusterModel) -> np.ndarray:
    """Returns the ``N x K`` weights of the observations in the local sums:
    indicators for k-means, ``rho ** m`` for FCA and responsibilities for GMM."""
    weights = soft_assignments(method, data, model)

    if method == Method.FCA:
        return weights**model.fuzziness

    return weights


def scatter_matrices(data, weights: np.ndarray, centres: np.ndarray) -> np.ndarray:
    """Returns ``h_k = sum_n w_nk (y_n - c_k)^T (y_n - c_k)`` for every cluster."""
    data = _as_observations(data)
    num_clusters, dim = centres.shape
    scatter = np.zeros((num_clusters, dim, dim))

    for k in range(num_clusters):
        deviation = data - centres[k]
        scatter[k] = (deviation * weights[:, k, None]).T @ deviation

    return scatter


def summarize(
    method: Method, data, weights: np.ndarray, centres: np.ndarray | None = None
) -> LocalSummary:
    """Builds the local results ``s = W^T Y`` and ``z = sum_n W``, plus the scatter
    matrices around ``centres`` when given."""
    data = _as_observations(data)
    s = weights.T @ data
    z = weights.sum(axis=0)
    h = scatter_matrices(data, weights, centres) if centres is not None else None
    return LocalSummary(method, s, z, h)


def local_summaries(method: Method, data, model: ClusterModel, scatter: bool = True) -> LocalSummary:
    """Computes the local results of one agent under the current model.

    Parameters
    ----------
    method: :class:`.enums.Method`
        The clustering method.
    data: array-like
        The agent's ``N_i x D`` observations.
    model: :class:`.objects.clustering.ClusterModel`
        The current model.
    scatter: :class:`bool`
        Whether gmm summaries include the scatter matrices, centred on the
        current (pre-update) centroids.

    Returns
    -------
    :class:`.objects.clustering.LocalSummary`
        ``s``, ``z`` and for gmm ``h``.
    """
    data = _as_observations(data)

    if data.shape[0] == 0:
        data = np.zeros((0, model.dim))

    _check_dims(data, model.centroids)
    weights = summary_weights(method, data, model)
    centres = model.centroids if method == Method.GMM and scatter else None
    return summarize(method, data, weights, centres)


def pack_summary(summary: LocalSummary) -> np.ndarray:
    """Flattens a summary into a consensus state.

    The layout is the ``K x D`` block of ``s`` row by row, then the ``K``
    entries of ``z``, then the ``K x D x D`` block of ``h`` row-major when present.
    """
    blocks = [summary.s.ravel(), summary.z.ravel()]

    if summary.h is not None:
        blocks.append(summary.h.ravel())

    return np.concatenate(blocks)


def unpack_state(
    state: np.ndarray, method: Method, num_clusters: int, dim: int, scatter: bool = False
) -> GlobalAggregate:
    """Reads a state packed by :func:`pack_summary` back into its blocks.

    Raises
    ------
    DimensionMismatch
        If the state length does not match the layout.
    """
    state = np.asarray(state, dtype=float)
    sums = num_clusters * dim
    expected = sums + num_clusters + (num_clusters * dim * dim if scatter else 0)

    if state.shape != (expected,):
        raise DimensionMismatch((expected,), state.shape, "packed state")

    s = state[:sums].reshape(num_clusters, dim)
    z = state[sums : sums + num_clusters]
    h = state[sums + num_clusters :].reshape(num_clusters, dim, dim) if scatter else None
    return GlobalAggregate(method, s, z, h)


def _regularize(covariance: np.ndarray, regularization: float) -> np.ndarray:
    return (covariance + covariance.T) / 2 + regularization * np.eye(covariance.shape[0])


def update_covariances(
    model: ClusterModel, scatter: np.ndarray, totals: np.ndarray
) -> ClusterModel:
    """Replaces the covariances of a gmm model with ``H_k / Z_k``, symmetrized and
    regularized. Degenerate clusters keep their covariance."""
    covariances = model.covariances.copy()

    for k in range(model.num_clusters):
        if totals[k] >= EMPTY_CLUSTER_WEIGHT:
            covariances[k] = _regularize(scatter[k] / totals[k], model.regularization)

    return ClusterModel(
        model.method,
        model.centroids,
        model.fuzziness,
        model.weights,
        covariances,
        model.regularization,
        degenerate=model.degenerate,
    )


def update_model(
    method: Method,
    aggregate: LocalSummary,
    previous: ClusterModel,
    total: float | None = None,
) -> ClusterModel:
    """Derives the next model from the global results.

    Parameters
    ----------
    method: :class:`.enums.Method`
        The clustering method.
    aggregate: :class:`.objects.clustering.LocalSummary`
        The global sums ``S``, ``Z`` and optionally ``H``.
    previous: :class:`.objects.clustering.ClusterModel`
        The model the aggregate was computed under.
    total: :class:`float` | :class:`None`
        The number of observations ``N``. Defaults to ``sum_k Z_k``.

    Returns
    -------
    :class:`.objects.clustering.ClusterModel`
        ``mu_k = S_k / Z_k``; for gmm also ``omega_k = Z_k / N`` and, when ``H``
        is present, ``Sigma_k = H_k / Z_k``. Clusters with ``Z_k < 1e-9`` keep
        their previous parameters and are listed in ``degenerate``.
    """
    if aggregate.s.shape != previous.centroids.shape:
        raise DimensionMismatch(previous.centroids.shape, aggregate.s.shape, "aggregate")

    degenerate = aggregate.z < EMPTY_CLUSTER_WEIGHT
    alive = ~degenerate

    if degenerate.any():
        logger.warning(
            "Clusters %s are empty and keep their previous parameters.",
            np.flatnonzero(degenerate).tolist(),
        )

    centroids = previous.centroids.copy()
    centroids[alive] = aggregate.s[alive] / aggregate.z[alive, None]
    model = ClusterModel(
        method,
        centroids,
        previous.fuzziness,
        previous.weights,
        previous.covariances,
        previous.regularization,
        degenerate=tuple(int(k) for k in np.flatnonzero(degenerate)),
    )

    if method != Method.GMM:
        return model

    total = float(aggregate.z.sum()) if total is None else float(total)
    weights = aggregate.z / total
    weights[degenerate] = previous.weights[degenerate]
    model.weights = weights / weights.sum()

    if aggregate.h is not None:
        model = update_covariances(model, aggregate.h, aggregate.z)

    return model


def initial_centroids(
    data,
    num_clusters: int,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    strategy: InitStrategy = InitStrategy.RANDOM,
) -> np.ndarray:
    """Draws ``K`` observations as the public initial centroids.

    Parameters
    ----------
    data: array-like
        The ``N x D`` pooled observations.
    num_clusters: :class:`int`
        The number of clusters ``K``.
    seed: :class:`int` | :class:`numpy.random.SeedSequence` | :class:`numpy.random.Generator`
        The seed of the draw.
    strategy: :class:`.enums.InitStrategy`
        ``random`` picks ``K`` distinct observations uniformly. ``kmeans++``
        picks them one at a time with probability proportional to the squared
        distance to the closest centroid already picked.

    Raises
    ------
    InvalidParameter
        If there are fewer observations than clusters.
    """
    data = _as_observations(data)

    if not 1 <= num_clusters <= data.shape[0]:
        raise InvalidParameter("K", num_clusters, f"K must lie in [1, {data.shape[0]}]")

    rng = np.random.default_rng(seed)

    if strategy == InitStrategy.PLUS_PLUS:
        centroids, _ = kmeans_plusplus(data, num_clusters, random_state=int(rng.integers(2**31 - 1)))
        return centroids

    return data[rng.choice(data.shape[0], num_clusters, replace=False)].copy()


def initial_model(
    method: Method, centroids, variance: float = 1.0, m: float = 2.0
) -> ClusterModel:
    """Builds the starting model around the initial centroids.

    Gmm models start with equal weights, covariances ``variance * I`` and a
    regularization of ``1e-6 * variance``.
    """
    centroids = _as_observations(centroids, "centroids")
    num_clusters, dim = centroids.shape

    if not variance > 0:
        raise InvalidParameter("variance", variance, "the data variance must be positive")

    weights = covariances = None

    if method == Method.GMM:
        weights = np.full(num_clusters, 1.0 / num_clusters)
        covariances = np.repeat(variance * np.eye(dim)[None], num_clusters, axis=0)

    return ClusterModel(
        method,
        centroids.copy(),
        m,
        weights,
        covariances,
        REGULARIZATION_SCALE * variance,
    )


def _check_init(method: Method, init: ClusterModel, num_observations: int) -> None:
    if init.method != method:
        raise InvalidParameter("init", init, f"the initial model is not a {method.value} model")

    if init.num_clusters > num_observations:
        raise InvalidParameter(
            "K", init.num_clusters, f"K exceeds the number of observations {num_observations}"
        )


def cluster_centralized(
    method: Method,
    data,
    init: ClusterModel,
    stop: StopRule | None = None,
    *,
    centre: CovarianceCentre = CovarianceCentre.PREVIOUS,
    history: list[ClusterModel] | None = None,
) -> tuple[ClusterModel, int]:
    """Clusters the union of the data in one place.

    Parameters
    ----------
    method: :class:`.enums.Method`
        The clustering method.
    data: array-like
        The ``N x D`` observations.
    init: :class:`.objects.clustering.ClusterModel`
        The initial model, see :func:`initial_model`.
    stop: :class:`.objects.clustering.StopRule` | :class:`None`
        The stop rule. Defaults to ``StopRule()``.
    centre: :class:`.enums.CovarianceCentre`
        Whether gmm scatter matrices are centred on the previous or the updated
        centroids.
    history: list[:class:`.objects.clustering.ClusterModel`] | :class:`None`
        When given, the initial model and every updated model are appended.

    Returns
    -------
    tuple[:class:`.objects.clustering.ClusterModel`, :class:`int`]
        The final model with the memberships of ``data``, and the number of
        iterations.
    """
    stop = stop or StopRule()
    data = _as_observations(data)
    _check_init(method, init, data.shape[0])
    _check_dims(data, init.centroids)

    model = init
    previous_centres = method == Method.GMM and centre == CovarianceCentre.PREVIOUS
    iterations = 0

    if history is not None:
        history.append(model)

    while iterations < stop.max_iterations:
        iterations += 1
        weights = summary_weights(method, data, model)
        summary = summarize(method, data, weights, model.centroids if previous_centres else None)
        updated = update_model(method, summary, model, data.shape[0])

        if method == Method.GMM and centre == CovarianceCentre.UPDATED:
            scatter = scatter_matrices(data, weights, updated.centroids)
            updated = update_covariances(updated, scatter, summary.z)

        displacement = stop.displacement(model.centroids, updated.centroids)
        logger.debug("Iteration %s of %s: displacement %s", iterations, method.value, displacement)
        model = updated

        if history is not None:
            history.append(model)

        if displacement < stop.tol:
            break

    model.memberships = soft_assignments(method, data, model)
    logger.info("Centralized %s finished after %s iterations.", method.value, iterations)
    return model, iterations


def _iteration_config(config: ConsensusConfig, iteration: int, phase: int) -> ConsensusConfig:
    if config.params is None:
        return config

    base = config.params.seed
    base = base if isinstance(base, tuple) else (base,)
    return config.with_seed((*base, iteration, phase))


def _agree(
    config: ConsensusConfig,
    topology: Topology,
    weights: WeightMatrix,
    states: np.ndarray,
    iteration: int,
    phase: int,
) -> ConsensusRun:
    try:
        return run_with_config(
            _iteration_config(config, iteration, phase), topology, states, weights
        )

    except BudgetExhausted as exception:
        raise ConsensusBudgetExhausted(iteration, exception) from exception


def cluster_distributed(
    method: Method,
    topology: Topology,
    agent_data: list,
    init: ClusterModel,
    consensus: ConsensusConfig,
    stop: StopRule | None = None,
    *,
    centre: CovarianceCentre = CovarianceCentre.PREVIOUS,
) -> tuple[list[ClusterModel], int, list[ConsensusRun]]:
    """Clusters data that never leaves its agents.

    Every outer iteration, each agent computes its local results, packs them
    into one state and the network runs a consensus on the states. Each agent
    multiplies its final state by ``M`` to recover the global results and
    updates its own copy of the model. With the ``updated`` covariance centre a
    second consensus on the scatter matrices follows the first.

    Parameters
    ----------
    method: :class:`.enums.Method`
        The clustering method.
    topology: :class:`.objects.topology.Topology`
        The communication graph.
    agent_data: list[array-like]
        The observations of every agent, in agent order.
    init: :class:`.objects.clustering.ClusterModel`
        The public initial model shared by all agents.
    consensus: :class:`.objects.consensus.ConsensusConfig`
        How every consensus is run. Privacy variants draw fresh disturbance
        seeds per outer iteration, derived from the configured seed.
    stop: :class:`.objects.clustering.StopRule` | :class:`None`
        The public stop rule. Iterations stop once every agent satisfies it.
    centre: :class:`.enums.CovarianceCentre`
        Whether gmm scatter matrices are centred on the previous or the updated
        centroids.

    Returns
    -------
    tuple[list[:class:`.objects.clustering.ClusterModel`], :class:`int`, list[:class:`.objects.consensus.ConsensusRun`]]
        The final model of every agent, the number of outer iterations and the
        consensus runs in execution order.

    Raises
    ------
    ConsensusBudgetExhausted
        If a consensus misses its tolerance within its budget.
    """
    stop = stop or StopRule()

    if len(agent_data) != topology.num_agents:
        raise DimensionMismatch((topology.num_agents,), (len(agent_data),), "agent datasets")

    data = []

    for values in agent_data:
        array = _as_observations(values) if np.size(values) else np.zeros((0, init.dim))
        _check_dims(array, init.centroids)
        data.append(array)

    _check_init(method, init, sum(array.shape[0] for array in data))

    weights = mixing_matrix(consensus.variant, topology, consensus.alpha)
    previous_centres = method == Method.GMM and centre == CovarianceCentre.PREVIOUS
    models = [init] * topology.num_agents
    runs: list[ConsensusRun] = []
    iterations = 0

    while iterations < stop.max_iterations:
        iterations += 1
        assignments = [
            summary_weights(method, data[agent], models[agent])
            for agent in range(topology.num_agents)
        ]
        states = np.vstack(
            [
                pack_summary(
                    summarize(
                        method,
                        data[agent],
                        assignments[agent],
                        models[agent].centroids if previous_centres else None,
                    )
                )
                for agent in range(topology.num_agents)
            ]
        )
        run = _agree(consensus, topology, weights, states, iterations, 0)
        runs.append(run)

        aggregates = [
            unpack_state(run.sums[agent], method, init.num_clusters, init.dim, previous_centres)
            for agent in range(topology.num_agents)
        ]
        updated = [
            update_model(method, aggregates[agent], models[agent])
            for agent in range(topology.num_agents)
        ]

        if method == Method.GMM and centre == CovarianceCentre.UPDATED:
            scatter = np.vstack(
                [
                    scatter_matrices(data[agent], assignments[agent], updated[agent].centroids).ravel()
                    for agent in range(topology.num_agents)
                ]
            )
            scatter_run = _agree(consensus, topology, weights, scatter, iterations, 1)
            runs.append(scatter_run)
            updated = [
                update_covariances(
                    updated[agent],
                    scatter_run.sums[agent].reshape(init.num_clusters, init.dim, init.dim),
                    aggregates[agent].z,
                )
                for agent in range(topology.num_agents)
            ]

        displacements = [
            stop.displacement(models[agent].centroids, updated[agent].centroids)
            for agent in range(topology.num_agents)
        ]
        logger.debug(
            "Outer iteration %s of %s: %s consensus rounds, max displacement %s",
            iterations,
            method.value,
            run.rounds,
            max(displacements),
        )
        models = updated

        if all(displacement < stop.tol for displacement in displacements):
            break

    for agent, model in enumerate(models):
        model.memberships = soft_assignments(method, data[agent], model)

    logger.info(
        "Distributed %s finished after %s outer iterations and %s consensus runs.",
        method.value,
        iterations,
        len(runs),
    )
    return models, iterations, runs


def local_vs_global(
    agent_data,
    global_model: ClusterModel,
    num_clusters: int,
    seed: int = 0,
    stop: StopRule | None = None,
    strategy: InitStrategy = InitStrategy.RANDOM,
) -> LocalComparison:
    """Clusters one agent's data alone and compares it with the global model.

    Returns
    -------
    :class:`.objects.clustering.LocalComparison`
        The local model, its distances to the global centroids and the global
        clusters the agent has no observation of.
    """
    data = _as_observations(agent_data)
    method = global_model.method
    variance = global_model.regularization / REGULARIZATION_SCALE
    init = initial_model(
        method, initial_centroids(data, num_clusters, seed, strategy), variance, global_model.fuzziness
    )
    local_model, iterations = cluster_centralized(method, data, init, stop)

    labels = hard_assignments(method, data, global_model)
    shares = np.bincount(labels, minlength=global_model.num_clusters) / data.shape[0]
    distances = cdist(global_model.centroids, local_model.centroids)
    return LocalComparison(local_model, iterations, distances, shares)
