import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from sklearn.metrics import adjusted_rand_score

from consensuscluster import (
    DAILY_PEAK_SHAPES,
    PROFILE_SHAPES,
    cluster_centralized,
    default_components,
    distributed_standardize,
    hard_assignments,
    initial_model,
    load_agent_files,
    load_profiles,
    partition,
    profile_template,
    retailer_topology,
    standardize,
    synth_profiles,
)
from consensuscluster.enums import Method, PartitionPolicy, Standardization
from consensuscluster.errors import (
    DimensionMismatch,
    EmptyDataset,
    InfeasiblePolicy,
    InvalidParameter,
    NonFiniteValue,
    ParseError,
    RaggedRows,
)
from consensuscluster.objects.consensus import ConsensusConfig, DisturbanceParams
from consensuscluster.objects.experiment import Dataset


@pytest.fixture
def write_csv(tmp_path):
    def write(text, name="profiles.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write


def test_load_small_matrix(write_csv):
    dataset = load_profiles(write_csv("1,2\n3,4\n"), Standardization.NONE)

    assert (dataset.num_observations, dataset.dim) == (2, 2)
    assert_array_equal(dataset.observations, [[1, 2], [3, 4]])
    assert not dataset.standardized
    assert dataset.num_agents == 0


def test_load_skips_header_and_blank_lines(write_csv):
    dataset = load_profiles(write_csv("t0,t1,t2\n1,2,3\n\n4,5,6\n"), Standardization.NONE)

    assert_array_equal(dataset.observations, [[1, 2, 3], [4, 5, 6]])


def test_non_finite_cell_is_located(write_csv):
    with pytest.raises(NonFiniteValue) as info:
        load_profiles(write_csv("1,2\n3,NaN\n"))

    assert (info.value.row, info.value.column) == (2, 2)


def test_unparseable_cell_is_located(write_csv):
    with pytest.raises(ParseError) as info:
        load_profiles(write_csv("a,b\n1,2\n3,four\n"))

    assert (info.value.row, info.value.column) == (3, 2)


def test_ragged_rows(write_csv):
    with pytest.raises(RaggedRows) as info:
        load_profiles(write_csv("1,2\n3\n"))

    assert info.value.row == 2


@pytest.mark.parametrize("text", ["", "a,b\n", "\n\n"], ids=["empty", "header-only", "blank"])
def test_empty_dataset(write_csv, text):
    with pytest.raises(EmptyDataset):
        load_profiles(write_csv(text))


def test_standardize_round_trip(rng):
    raw = rng.uniform(0, 5, (50, 4))
    dataset = standardize(Dataset(raw))

    assert dataset.standardized
    assert_allclose(dataset.observations.mean(axis=0), 0.0, atol=1e-9)
    assert_allclose(dataset.observations.var(axis=0), 1.0, atol=1e-9)
    assert_allclose(dataset.inverse_transform(dataset.observations), raw, atol=1e-12)


def test_standardize_constant_dimension():
    dataset = standardize(Dataset(np.array([[1.0, 3.0], [2.0, 3.0], [3.0, 3.0]])))

    assert_allclose(dataset.observations[:, 1], 0.0)
    assert dataset.scale[1] == 1.0


def test_load_profiles_standardizes_by_default(write_csv):
    dataset = load_profiles(write_csv("1,10\n2,20\n3,60\n"))

    assert dataset.standardized
    assert_allclose(dataset.observations.mean(axis=0), 0.0, atol=1e-12)


def test_load_agent_files(write_csv):
    paths = [write_csv("1,2\n3,4\n", "a.csv"), write_csv("5,6\n", "b.csv"), write_csv("7,8\n9,9\n", "c.csv")]
    dataset = load_agent_files(paths, Standardization.NONE)

    assert dataset.num_agents == 3
    assert_array_equal(dataset.owners, [0, 0, 1, 2, 2])
    assert_array_equal(dataset.local_ids(), [0, 1, 0, 0, 1])
    assert_array_equal(partition(dataset, 3, PartitionPolicy.BY_FILE), dataset.owners)


def test_agent_files_must_agree_on_dimension(write_csv):
    paths = [write_csv("1,2\n", "a.csv"), write_csv("1,2,3\n", "b.csv")]

    with pytest.raises(DimensionMismatch):
        load_agent_files(paths)


def test_distributed_standardize_matches_global(rng):
    topology = retailer_topology()
    raw = rng.uniform(0, 4, (200, 5))
    dataset = Dataset(raw, owners=partition(Dataset(raw), 10))
    config = ConsensusConfig(tol=1e-12, relative_tol=True, params=DisturbanceParams(2.0, 0.2, 5))
    distributed = distributed_standardize(dataset, topology, config)
    centralized = standardize(dataset)

    assert_allclose(distributed.observations, centralized.observations, atol=1e-8)
    assert_allclose(distributed.mean, centralized.mean, atol=1e-9)
    assert_allclose(distributed.scale, centralized.scale, atol=1e-9)


def test_distributed_standardize_needs_owners(rng):
    config = ConsensusConfig(tol=1e-12)

    with pytest.raises(InfeasiblePolicy):
        distributed_standardize(Dataset(rng.uniform(size=(20, 2))), retailer_topology(), config)


def test_profile_templates():
    assert len(PROFILE_SHAPES) == 8
    assert set(DAILY_PEAK_SHAPES) < set(PROFILE_SHAPES)
    assert [np.argmax(profile_template(shape, 24)) for shape in DAILY_PEAK_SHAPES] == [3, 7, 11, 15, 19, 23]
    assert_allclose(profile_template("flat", 24), 0.9)
    assert np.argmax(profile_template("evening-peak")) == 38

    with pytest.raises(InvalidParameter):
        profile_template("weekend")


def test_synthetic_without_spread():
    dataset = synth_profiles([{"shape": "afternoon", "spread": 0.0, "count": 5}], dim=24)

    assert_allclose(dataset.observations, np.tile(profile_template("afternoon", 24), (5, 1)))
    assert_array_equal(dataset.labels, np.zeros(5))


def test_synthetic_seeds():
    components = default_components(3, 10)
    first = synth_profiles(components, seed=1)
    second = synth_profiles(components, seed=2)

    assert first.observations.shape == second.observations.shape == (30, 48)
    assert not np.allclose(first.observations, second.observations)
    assert np.array_equal(synth_profiles(components, seed=1).observations, first.observations)


def test_default_components_stay_distinct():
    components = default_components(8, 10)

    assert [component["level"] for component in components] == [1, 1, 1, 1, 1, 1, 2, 2]
    assert components[6]["shape"] == components[0]["shape"]


def test_kmeans_recovers_planted_components():
    dataset = standardize(synth_profiles(default_components(6, 100, 0.3), seed=0))
    init = np.vstack([dataset.observations[np.flatnonzero(dataset.labels == k)[0]] for k in range(6)])
    model, _ = cluster_centralized(Method.KMEANS, dataset.observations, initial_model(Method.KMEANS, init))

    labels = hard_assignments(Method.KMEANS, dataset.observations, model)
    assert adjusted_rand_score(dataset.labels, labels) >= 0.99


@pytest.mark.parametrize(
    "count, agents, policy, proportions, sizes",
    [
        (1000, 10, PartitionPolicy.EQUAL, None, [100] * 10),
        (5, 2, PartitionPolicy.EQUAL, None, [3, 2]),
        (10, 2, PartitionPolicy.PROPORTIONS, [0.7, 0.3], [7, 3]),
        (10, 3, PartitionPolicy.PROPORTIONS, [0.5, 0.25, 0.25], [5, 3, 2]),
    ],
)
def test_partition_sizes(count, agents, policy, proportions, sizes):
    owners = partition(Dataset(np.zeros((count, 1))), agents, policy, proportions)

    assert owners.shape == (count,)
    assert np.all(np.diff(owners) >= 0)
    assert_array_equal(np.bincount(owners, minlength=agents), sizes)


@pytest.mark.parametrize(
    "count, agents, policy, proportions",
    [
        (3, 4, PartitionPolicy.EQUAL, None),
        (10, 2, PartitionPolicy.PROPORTIONS, [0.5]),
        (10, 2, PartitionPolicy.PROPORTIONS, [0.9, 0.3]),
        (10, 2, PartitionPolicy.PROPORTIONS, [1.2, -0.2]),
        (10, 2, PartitionPolicy.BY_FILE, None),
    ],
)
def test_partition_infeasible(count, agents, policy, proportions):
    with pytest.raises(InfeasiblePolicy):
        partition(Dataset(np.zeros((count, 1))), agents, policy, proportions)
