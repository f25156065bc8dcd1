import numpy as np
import pytest

from consensuscluster import build_topology, retailer_topology
from consensuscluster.enums import Method
from consensuscluster.objects.consensus import DisturbanceParams


@pytest.fixture
def path3():
    return build_topology(3, [(0, 1), (1, 2)])


@pytest.fixture
def retailer():
    return retailer_topology()


@pytest.fixture
def params():
    return DisturbanceParams(2.0, 0.2, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def blobs(rng):
    """Three well separated 2-D groups of 20 points, split over 4 agents."""
    centres = np.array([[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]])
    data = np.vstack([centre + 0.5 * rng.standard_normal((20, 2)) for centre in centres])
    data = data[rng.permutation(len(data))]
    return data, np.array_split(data, 4)


@pytest.fixture(params=[Method.KMEANS, Method.FCA, Method.GMM], ids=lambda method: method.value)
def method(request):
    return request.param
