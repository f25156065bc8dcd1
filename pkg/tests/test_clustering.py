import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from consensuscluster import (
    assign_kmeans,
    build_topology,
    cluster_centralized,
    cluster_distributed,
    fca_membership,
    gmm_responsibility,
    hard_assignments,
    initial_centroids,
    initial_model,
    local_summaries,
    local_vs_global,
    pack_summary,
    path_topology,
    soft_assignments,
    summary_weights,
    unpack_state,
    update_model,
)
from consensuscluster.enums import CovarianceCentre, InitStrategy, Method, Variant
from consensuscluster.errors import (
    ConsensusBudgetExhausted,
    DimensionMismatch,
    InvalidParameter,
    SingularCovariance,
)
from consensuscluster.metrics import gmm_log_likelihood, sse
from consensuscluster.objects.clustering import ClusterModel, GlobalAggregate, LocalSummary, StopRule
from consensuscluster.objects.consensus import ConsensusConfig, DisturbanceParams


def _consensus(seed=0):
    return ConsensusConfig(
        Variant.PP_AAC, tol=1e-12, budget=5000, relative_tol=True, params=DisturbanceParams(2.0, 0.2, seed)
    )


def _variance(data):
    return float(np.mean(np.var(data, axis=0)))


def test_assign_kmeans_examples():
    centroids = np.array([[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]])

    assert assign_kmeans([5.0, 5.0], centroids) == 2
    assert assign_kmeans([1.0, 0.0], centroids) == 0


def test_assign_kmeans_matches_brute_force(rng):
    data = rng.standard_normal((5, 3))
    centroids = rng.standard_normal((2, 3))
    expected = [min(range(2), key=lambda k: np.sum((row - centroids[k]) ** 2)) for row in data]

    assert_array_equal(assign_kmeans(data, centroids), expected)


def test_assign_kmeans_rejects_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        assign_kmeans(np.ones((2, 3)), np.ones((2, 2)))


def test_fca_membership_examples():
    assert_allclose(fca_membership([0.0], [[1.0], [-2.0]], 2.0), [0.8, 0.2])
    assert_allclose(fca_membership([0.0], [[1.0], [-1.0]], 3.5), [0.5, 0.5])
    assert_allclose(fca_membership([1.0, 1.0], [[0.0, 0.0], [1.0, 1.0]]), [0.0, 1.0])


def test_fca_membership_rejects_fuzziness():
    with pytest.raises(InvalidParameter):
        fca_membership([0.0], [[1.0]], 1.0)


def _gmm(centroids, weights, variances):
    centroids = np.asarray(centroids, dtype=float)
    covariances = np.array([variance * np.eye(centroids.shape[1]) for variance in variances])
    return ClusterModel(Method.GMM, centroids, weights=np.asarray(weights, dtype=float), covariances=covariances)


def test_gmm_responsibility_scalar_example():
    model = _gmm([[0.0], [1.0]], [0.5, 0.5], [1.0, 1.0])

    assert gmm_responsibility([0.0], model)[0] == pytest.approx(1 / (1 + np.exp(-0.5)))


def test_gmm_responsibility_symmetry():
    model = _gmm([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.25] * 4, [1.0] * 4)

    assert_allclose(gmm_responsibility([0.0, 0.0], model), [0.25] * 4)


def test_gmm_responsibility_zero_weight():
    model = _gmm([[0.0], [1.0]], [1.0, 0.0], [1.0, 1.0])

    assert_allclose(gmm_responsibility([1.0], model), [1.0, 0.0])


def test_gmm_singular_covariance():
    model = ClusterModel(
        Method.GMM, [[0.0, 0.0]], weights=np.array([1.0]), covariances=np.zeros((1, 2, 2))
    )

    with pytest.raises(SingularCovariance):
        gmm_responsibility([[0.0, 0.0]], model)


def test_assignments_sum_to_one(blobs, method):
    data, _ = blobs
    model = initial_model(method, initial_centroids(data, 3, seed=1), _variance(data))
    soft = soft_assignments(method, data, model)

    assert soft.shape == (60, 3)
    assert_allclose(soft.sum(axis=1), 1.0, atol=1e-12)
    assert_array_equal(hard_assignments(method, data, model), np.argmax(soft, axis=1))


def test_local_summaries_single_observation():
    centroids = np.array([[0.0, 0.0], [10.0, 10.0]])
    summary = local_summaries(Method.KMEANS, [[1.0, 2.0]], initial_model(Method.KMEANS, centroids))

    assert_allclose(summary.s, [[1.0, 2.0], [0.0, 0.0]])
    assert_allclose(summary.z, [1.0, 0.0])
    assert summary.h is None


def test_local_summaries_fca_singularity():
    centroids = np.array([[0.0, 0.0], [3.0, 4.0]])
    summary = local_summaries(Method.FCA, [[3.0, 4.0]], initial_model(Method.FCA, centroids))

    assert_allclose(summary.s, [[0.0, 0.0], [3.0, 4.0]])
    assert_allclose(summary.z, [0.0, 1.0])


def test_local_summaries_group_by(rng):
    data = rng.standard_normal((4, 2))
    centroids = data[:2].copy()
    summary = local_summaries(Method.KMEANS, data, initial_model(Method.KMEANS, centroids))
    labels = assign_kmeans(data, centroids)

    for k in range(2):
        assert_allclose(summary.s[k], data[labels == k].sum(axis=0))
        assert summary.z[k] == np.sum(labels == k)


def test_local_summaries_empty_agent():
    model = initial_model(Method.GMM, [[0.0, 0.0], [1.0, 1.0]])
    summary = local_summaries(Method.GMM, np.zeros((0, 2)), model)

    assert_allclose(summary.s, 0.0)
    assert_allclose(summary.z, 0.0)
    assert_allclose(summary.h, 0.0)


def test_gmm_scatter_uses_current_centroids(rng):
    data = rng.standard_normal((6, 2))
    model = initial_model(Method.GMM, data[:2])
    summary = local_summaries(Method.GMM, data, model)
    weights = summary_weights(Method.GMM, data, model)

    for k in range(2):
        deviation = data - model.centroids[k]
        expected = sum(weights[n, k] * np.outer(deviation[n], deviation[n]) for n in range(6))
        assert_allclose(summary.h[k], expected, atol=1e-12)


def test_decomposition_identity(blobs, method):
    data, parts = blobs
    model = initial_model(method, initial_centroids(data, 3, seed=2), _variance(data))
    summaries = [local_summaries(method, part, model) for part in parts]
    aggregate = GlobalAggregate.from_summaries(summaries)
    union = local_summaries(method, data, model)

    assert isinstance(aggregate, GlobalAggregate)
    assert_allclose(aggregate.s, union.s, atol=1e-12)
    assert_allclose(aggregate.z, union.z, atol=1e-12)

    if method == Method.GMM:
        assert_allclose(aggregate.h, union.h, atol=1e-12)


def test_summaries_refuse_mismatched_shapes():
    first = LocalSummary(Method.KMEANS, np.zeros((2, 2)), np.zeros(2))
    second = LocalSummary(Method.KMEANS, np.zeros((3, 2)), np.zeros(3))

    with pytest.raises(DimensionMismatch):
        first + second


def test_packed_layout():
    summary = LocalSummary(Method.KMEANS, np.arange(6.0).reshape(2, 3), np.array([7.0, 8.0]))
    state = pack_summary(summary)

    assert_array_equal(state, [0, 1, 2, 3, 4, 5, 7, 8])

    unpacked = unpack_state(state, Method.KMEANS, 2, 3)
    assert_array_equal(unpacked.s, summary.s)
    assert_array_equal(unpacked.z, summary.z)

    with pytest.raises(DimensionMismatch):
        unpack_state(state, Method.GMM, 2, 3, scatter=True)


def test_packed_size_of_profiles():
    summary = LocalSummary(Method.KMEANS, np.zeros((6, 48)), np.zeros(6))

    assert summary.size == 294
    assert pack_summary(summary).shape == (294,)


def test_update_model_examples():
    previous = initial_model(Method.KMEANS, [[0.0, 0.0]])
    model = update_model(Method.KMEANS, GlobalAggregate(Method.KMEANS, [[2.0, 4.0]], [2.0]), previous)

    assert_allclose(model.centroids, [[1.0, 2.0]])

    previous = initial_model(Method.GMM, [[0.0, 0.0]])
    aggregate = GlobalAggregate(Method.GMM, [[5.0, 5.0]], [5.0], np.array([[[10.0, 0.0], [0.0, 5.0]]]))
    model = update_model(Method.GMM, aggregate, previous, 5)

    assert_allclose(model.weights, [1.0])
    assert_allclose(model.covariances[0], [[2.0 + 1e-6, 0.0], [0.0, 1.0 + 1e-6]])


def test_update_model_flags_degenerate_cluster():
    previous = initial_model(Method.KMEANS, [[0.0], [100.0]])
    aggregate = GlobalAggregate(Method.KMEANS, [[3.0], [0.0]], [3.0, 0.0])
    model = update_model(Method.KMEANS, aggregate, previous)

    assert model.degenerate == (1,)
    assert_allclose(model.centroids, [[1.0], [100.0]])


def test_degenerate_gmm_keeps_parameters():
    previous = _gmm([[0.0], [100.0]], [0.5, 0.5], [1.0, 4.0])
    aggregate = GlobalAggregate(Method.GMM, [[6.0], [0.0]], [3.0, 0.0], np.array([[[3.0]], [[0.0]]]))
    model = update_model(Method.GMM, aggregate, previous, 3)

    assert model.degenerate == (1,)
    assert_allclose(model.weights.sum(), 1.0)
    assert_allclose(model.covariances[1], [[4.0]])


def _textbook_fca(data, centroids, m, iterations):
    for _ in range(iterations):
        distances = np.abs(data[:, None] - centroids[None, :])
        memberships = np.empty_like(distances)

        for n in range(len(data)):
            for k in range(len(centroids)):
                memberships[n, k] = 1 / sum(
                    (distances[n, k] / distances[n, other]) ** (2 / (m - 1))
                    for other in range(len(centroids))
                )

        weights = memberships**m
        centroids = (weights * data[:, None]).sum(axis=0) / weights.sum(axis=0)

    return centroids


def test_fca_matches_textbook_iteration():
    data = np.array([0.0, 0.5, 1.2, 7.0, 7.7, 9.1])
    init = np.array([0.1, 8.5])
    model, iterations = cluster_centralized(
        Method.FCA, data[:, None], initial_model(Method.FCA, init[:, None]), StopRule(1e-300, 5)
    )

    assert iterations == 5
    assert_allclose(model.centroids.ravel(), _textbook_fca(data, init, 2.0, 5), atol=1e-12)


def test_centralized_fixed_point():
    points = np.array([[0.0, 0.0], [1.0, 5.0], [4.0, 2.0]])
    model, iterations = cluster_centralized(Method.KMEANS, points, initial_model(Method.KMEANS, points))

    assert iterations == 1
    assert_allclose(model.centroids, points)
    assert_allclose(model.memberships, np.eye(3))


def test_centralized_separable_groups():
    data = np.array([[0.0, 0.0], [0.0, 2.0], [10.0, 0.0], [10.0, 2.0]])
    model, _ = cluster_centralized(Method.KMEANS, data, initial_model(Method.KMEANS, data[[0, 2]]))

    assert_allclose(model.centroids, [[0.0, 1.0], [10.0, 1.0]])


def _lloyd(data, centroids, iterations=300):
    for _ in range(iterations):
        labels = np.array([np.argmin([np.sum((row - centre) ** 2) for centre in centroids]) for row in data])
        updated = np.array(
            [data[labels == k].mean(axis=0) if np.any(labels == k) else centroids[k] for k in range(len(centroids))]
        )

        if np.allclose(updated, centroids, rtol=0, atol=0):
            break

        centroids = updated

    return centroids, labels


def _mixture(seed):
    rng = np.random.default_rng(seed)
    size, dim, clusters = int(rng.integers(10, 61)), int(rng.integers(1, 4)), int(rng.integers(2, 6))
    centres = rng.uniform(-5, 5, (clusters, dim))
    data = centres[rng.integers(clusters, size=size)] + rng.standard_normal((size, dim))
    return data, clusters


@pytest.mark.parametrize("seed", range(50))
def test_kmeans_matches_lloyd_and_sse_decreases(seed):
    data, clusters = _mixture(seed)
    init = initial_centroids(data, clusters, seed=seed)
    history = []
    model, _ = cluster_centralized(Method.KMEANS, data, initial_model(Method.KMEANS, init), history=history)
    centroids, labels = _lloyd(data, init)
    costs = [sse(data, step.centroids) for step in history]

    assert_allclose(model.centroids, centroids, atol=1e-9)
    assert_array_equal(hard_assignments(Method.KMEANS, data, model), labels)
    assert all(later <= earlier + 1e-9 for earlier, later in zip(costs, costs[1:]))


def test_label_permutation(blobs):
    data, _ = blobs
    init = initial_centroids(data, 3, seed=5)
    order = [2, 0, 1]
    model, _ = cluster_centralized(Method.KMEANS, data, initial_model(Method.KMEANS, init))
    permuted, _ = cluster_centralized(Method.KMEANS, data, initial_model(Method.KMEANS, init[order]))

    assert_allclose(permuted.centroids, model.centroids[order], atol=1e-12)


def test_gmm_improves_likelihood(blobs):
    data, _ = blobs
    init = initial_model(Method.GMM, initial_centroids(data, 3, seed=6), _variance(data))
    model, _ = cluster_centralized(Method.GMM, data, init, centre=CovarianceCentre.UPDATED)

    assert gmm_log_likelihood(data, model) > gmm_log_likelihood(data, init)


@pytest.mark.parametrize("centre", list(CovarianceCentre), ids=lambda centre: centre.value)
@pytest.mark.parametrize("seed", range(5))
def test_gmm_likelihood_never_decreases(blobs, centre, seed):
    data, _ = blobs
    init = initial_model(Method.GMM, initial_centroids(data, 3, seed=seed), _variance(data))
    history = []
    cluster_centralized(Method.GMM, data, init, centre=centre, history=history)
    likelihoods = [gmm_log_likelihood(data, step) for step in history]

    assert len(likelihoods) > 2
    assert all(later >= earlier - 1e-9 * max(1.0, abs(earlier)) for earlier, later in zip(likelihoods, likelihoods[1:]))


def test_initial_centroids_checks_k(rng):
    data = rng.standard_normal((4, 2))

    assert len(np.unique(initial_centroids(data, 4, seed=0), axis=0)) == 4

    with pytest.raises(InvalidParameter):
        initial_centroids(data, 5)


def test_initial_centroids_plus_plus(rng):
    centres = np.array([[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]])
    data = np.vstack([centre + 0.1 * rng.standard_normal((10, 2)) for centre in centres])
    picks = initial_centroids(data, 3, seed=3, strategy=InitStrategy.PLUS_PLUS)

    assert all(any(np.array_equal(pick, row) for row in data) for pick in picks)
    assert_array_equal(initial_centroids(data, 3, seed=3, strategy=InitStrategy.PLUS_PLUS), picks)
    assert sorted(assign_kmeans(picks, centres).tolist()) == [0, 1, 2]


def test_single_agent_reproduces_centralized(blobs, method):
    data, _ = blobs
    init = initial_model(method, initial_centroids(data, 3, seed=7), _variance(data))
    centralized, expected = cluster_centralized(method, data, init)
    models, iterations, runs = cluster_distributed(method, build_topology(1, []), [data], init, _consensus())

    assert iterations == expected
    assert all(run.rounds == 0 for run in runs)
    assert_allclose(models[0].centroids, centralized.centroids, atol=1e-12)


@pytest.mark.parametrize("centre", list(CovarianceCentre), ids=lambda centre: centre.value)
def test_distributed_equals_centralized(blobs, method, centre):
    data, parts = blobs
    init = initial_model(method, initial_centroids(data, 3, seed=8), _variance(data))
    centralized, expected = cluster_centralized(method, data, init, centre=centre)
    models, iterations, runs = cluster_distributed(method, path_topology(4), parts, init, _consensus(), centre=centre)

    assert iterations == expected
    assert len(models) == 4

    for model in models:
        assert_allclose(model.centroids, centralized.centroids, atol=1e-6)

    if method == Method.GMM:
        assert_allclose(models[0].weights, centralized.weights, atol=1e-6)
        assert_allclose(models[0].covariances, centralized.covariances, atol=1e-6)

    scatter_runs = 2 if method == Method.GMM and centre == CovarianceCentre.UPDATED else 1
    assert len(runs) == scatter_runs * iterations


def test_distributed_seeds_differ_per_iteration(blobs):
    data, parts = blobs
    init = initial_model(Method.KMEANS, initial_centroids(data, 3, seed=9))
    _, iterations, runs = cluster_distributed(Method.KMEANS, path_topology(4), parts, init, _consensus(3))

    assert iterations > 1
    assert runs[0].params.seed == (3, 1, 0)
    assert runs[1].params.seed == (3, 2, 0)


def test_distributed_surfaces_iteration(blobs):
    data, parts = blobs
    init = initial_model(Method.KMEANS, initial_centroids(data, 3, seed=9))
    consensus = ConsensusConfig(Variant.AC, tol=1e-12, budget=2)

    with pytest.raises(ConsensusBudgetExhausted) as info:
        cluster_distributed(Method.KMEANS, path_topology(4), parts, init, consensus)

    assert info.value.iteration == 1
    assert info.value.run.rounds == 2


def test_distributed_checks_agents(blobs):
    data, parts = blobs
    init = initial_model(Method.KMEANS, initial_centroids(data, 3, seed=9))

    with pytest.raises(DimensionMismatch):
        cluster_distributed(Method.KMEANS, path_topology(3), parts, init, _consensus())

    with pytest.raises(InvalidParameter):
        cluster_distributed(Method.FCA, path_topology(4), parts, init, _consensus())


def test_local_vs_global(blobs):
    data, _ = blobs
    far_group = assign_kmeans(data, [[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]]) == 2
    global_model, _ = cluster_centralized(
        Method.KMEANS, data, initial_model(Method.KMEANS, [[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]])
    )
    comparison = local_vs_global(data[~far_group], global_model, 2, seed=0)

    assert comparison.missed == (2,)
    assert comparison.distances.shape == (3, 2)
    assert_allclose(comparison.shares.sum(), 1.0)
    assert sorted(comparison.matches[:2]) == [0, 1]
