import numpy as np

from consensuscluster.enums import Method
from consensuscluster.errors import DimensionMismatch, InvalidParameter

# Bump whenever the order of the packed consensus state changes.
STATE_LAYOUT_VERSION = 1


class StopRule:
    """Represents when the outer clustering iterations stop.

    Attributes
    ----------
    tol: :class:`float`
        Iterations stop once no centroid moves farther than this.
    max_iterations: :class:`int`
        The outer iteration budget.
    """

    __slots__ = ("tol", "max_iterations")

    def __init__(self, tol: float = 1e-6, max_iterations: int = 300):
        if not tol > 0:
            raise InvalidParameter("tol", tol, "the displacement tolerance must be positive")

        if max_iterations < 1:
            raise InvalidParameter("max_iterations", max_iterations, "at least one iteration is required")

        self.tol: float = float(tol)
        self.max_iterations: int = int(max_iterations)

    def displacement(self, previous: np.ndarray, current: np.ndarray) -> float:
        """Returns the largest Euclidean move of a centroid."""
        return float(np.max(np.linalg.norm(current - previous, axis=1)))

    def satisfied(self, previous: np.ndarray, current: np.ndarray) -> bool:
        """Checks if the move from ``previous`` to ``current`` centroids is below :attr:`tol`."""
        return self.displacement(previous, current) < self.tol

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON representation of the rule."""
        return {"tol": self.tol, "max_iterations": self.max_iterations}

    def __repr__(self):
        return f"StopRule tol={self.tol:g}, max_iterations={self.max_iterations}"


class ClusterModel:
    """Represents the parameters of a clustering model.

    .. container:: operations

        .. describe:: len(x)

            Returns the number of clusters.

    Attributes
    ----------
    method: :class:`.enums.Method`
        The clustering method.
    centroids: :class:`numpy.ndarray`
        The ``K x D`` centroids, the load patterns of the clusters.
    fuzziness: :class:`float`
        The FCA fuzziness ``m > 1``. Ignored by the other methods.
    weights: :class:`numpy.ndarray` | :class:`None`
        The GMM mixing weights, summing to 1.
    covariances: :class:`numpy.ndarray` | :class:`None`
        The ``K x D x D`` GMM covariances.
    regularization: :class:`float`
        The ridge added to every GMM covariance after an update.
    memberships: :class:`numpy.ndarray` | :class:`None`
        The ``N x K`` memberships or responsibilities of the data the model was
        last fitted on, when recorded.
    degenerate: tuple[:class:`int`, ...]
        The clusters whose total weight vanished in the last update and kept
        their previous parameters.
    """

    __slots__ = (
        "method",
        "centroids",
        "fuzziness",
        "weights",
        "covariances",
        "regularization",
        "memberships",
        "degenerate",
    )

    def __init__(
        self,
        method: Method,
        centroids: np.ndarray,
        fuzziness: float = 2.0,
        weights: np.ndarray | None = None,
        covariances: np.ndarray | None = None,
        regularization: float = 1e-6,
        memberships: np.ndarray | None = None,
        degenerate: tuple[int, ...] = (),
    ):
        centroids = np.atleast_2d(np.asarray(centroids, dtype=float))

        if method == Method.FCA and not fuzziness > 1:
            raise InvalidParameter("m", fuzziness, "the fuzziness must be greater than 1")

        if method == Method.GMM:
            if weights is None or covariances is None:
                raise InvalidParameter("weights", weights, "gmm models need weights and covariances")

            weights = np.asarray(weights, dtype=float)
            covariances = np.asarray(covariances, dtype=float)
            num_clusters, dim = centroids.shape

            if weights.shape != (num_clusters,):
                raise DimensionMismatch((num_clusters,), weights.shape, "gmm weights")

            if covariances.shape != (num_clusters, dim, dim):
                raise DimensionMismatch((num_clusters, dim, dim), covariances.shape, "gmm covariances")

        self.method: Method = method
        self.centroids: np.ndarray = centroids
        self.fuzziness: float = float(fuzziness)
        self.weights: np.ndarray | None = weights
        self.covariances: np.ndarray | None = covariances
        self.regularization: float = float(regularization)
        self.memberships: np.ndarray | None = memberships
        self.degenerate: tuple[int, ...] = tuple(degenerate)

    @property
    def num_clusters(self) -> int:
        """:class:`int`: The number of clusters ``K``."""
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        """:class:`int`: The dimension ``D`` of every observation."""
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON representation of the model."""
        data = {
            "method": self.method.value,
            "centroids": self.centroids.tolist(),
            "degenerate": list(self.degenerate),
        }

        if self.method == Method.FCA:
            data["m"] = self.fuzziness

        if self.method == Method.GMM:
            data["weights"] = self.weights.tolist()
            data["covariances"] = self.covariances.tolist()
            data["regularization"] = self.regularization

        return data

    def __len__(self):
        return self.num_clusters

    def __repr__(self):
        return f"ClusterModel method={self.method.value}, K={self.num_clusters}, D={self.dim}"


class LocalSummary:
    """Represents the local results of one agent for every cluster.

    Inherited by:

    - :class:`GlobalAggregate`

    Attributes
    ----------
    method: :class:`.enums.Method`
        The clustering method the summary was computed for.
    s: :class:`numpy.ndarray`
        The ``K x D`` weighted sums of observations.
    z: :class:`numpy.ndarray`
        The ``K`` total weights (counts for k-means).
    h: :class:`numpy.ndarray` | :class:`None`
        The ``K x D x D`` weighted scatter matrices, gmm only.
    """

    __slots__ = ("method", "s", "z", "h")

    def __init__(self, method: Method, s: np.ndarray, z: np.ndarray, h: np.ndarray | None = None):
        self.method: Method = method
        self.s: np.ndarray = np.asarray(s, dtype=float)
        self.z: np.ndarray = np.asarray(z, dtype=float)
        self.h: np.ndarray | None = None if h is None else np.asarray(h, dtype=float)

    @property
    def num_clusters(self) -> int:
        """:class:`int`: The number of clusters ``K``."""
        return self.s.shape[0]

    @property
    def dim(self) -> int:
        """:class:`int`: The dimension ``D`` of every observation."""
        return self.s.shape[1]

    @property
    def size(self) -> int:
        """:class:`int`: The number of floats the summary packs into."""
        size = self.s.size + self.z.size
        return size + self.h.size if self.h is not None else size

    def __add__(self, other):
        if not isinstance(other, LocalSummary):
            return NotImplemented

        if self.s.shape != other.s.shape or (self.h is None) != (other.h is None):
            raise DimensionMismatch(self.s.shape, other.s.shape, "summaries")

        h = None if self.h is None else self.h + other.h
        return GlobalAggregate(self.method, self.s + other.s, self.z + other.z, h)

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON representation of the summary."""
        return {
            "method": self.method.value,
            "s": self.s.tolist(),
            "z": self.z.tolist(),
            "h": None if self.h is None else self.h.tolist(),
        }

    def __repr__(self):
        return (
            f"{self.__class__.__name__} method={self.method.value}, "
            f"K={self.num_clusters}, D={self.dim}, scatter={self.h is not None}"
        )


class GlobalAggregate(LocalSummary):
    """Represents the network-wide sums of the local results. Inherits from
    :class:`LocalSummary`.

    Shares the same attributes with :class:`LocalSummary`, where ``s``, ``z`` and
    ``h`` hold ``S_k``, ``Z_k`` and ``H_k``.
    """

    __slots__ = ()

    @classmethod
    def from_summaries(cls, summaries: list[LocalSummary]) -> "GlobalAggregate":
        """Sums ``summaries`` in agent order."""
        total = summaries[0]

        for summary in summaries[1:]:
            total = total + summary

        return cls(total.method, total.s, total.z, total.h)


class LocalComparison:
    """Represents one agent's own clustering compared against the global model.

    Attributes
    ----------
    local_model: :class:`ClusterModel`
        The model fitted on the agent's data alone.
    iterations: :class:`int`
        The iterations the local fit took.
    distances: :class:`numpy.ndarray`
        The ``K_global x K_local`` distances between global and local centroids.
    matches: tuple[:class:`int`, ...]
        The nearest local centroid of every global centroid.
    shares: :class:`numpy.ndarray`
        The share of the agent's observations the global model assigns to every
        global cluster.
    missed: tuple[:class:`int`, ...]
        The global clusters with no observation of the agent, which the agent
        cannot discover on its own.
    """

    __slots__ = ("local_model", "iterations", "distances", "matches", "shares", "missed")

    def __init__(
        self,
        local_model: ClusterModel,
        iterations: int,
        distances: np.ndarray,
        shares: np.ndarray,
    ):
        self.local_model: ClusterModel = local_model
        self.iterations: int = iterations
        self.distances: np.ndarray = distances
        self.matches: tuple[int, ...] = tuple(int(k) for k in np.argmin(distances, axis=1))
        self.shares: np.ndarray = shares
        self.missed: tuple[int, ...] = tuple(int(k) for k in np.flatnonzero(shares == 0))

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON representation of the comparison."""
        return {
            "local_model": self.local_model.to_dict(),
            "iterations": self.iterations,
            "distances": self.distances.tolist(),
            "matches": list(self.matches),
            "shares": self.shares.tolist(),
            "missed": list(self.missed),
        }

    def __repr__(self):
        return f"LocalComparison iterations={self.iterations}, missed={self.missed}"
