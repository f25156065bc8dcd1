import networkx as nx
import numpy as np

from consensuscluster.enums import WeightKind


class Topology:
    """Represents an undirected communication graph between agents.

    Instances are produced by :func:`consensuscluster.build_topology`, which
    validates the edges and the connectivity of the graph. A topology is
    immutable once built.

    .. container:: operations

        .. describe:: x == y

            Checks if two topologies have the same agents and edges.

        .. describe:: x != y

            Checks if two topologies are not equal.

        .. describe:: hash(x)

            Returns the topology's hash.

        .. describe:: len(x)

            Returns the number of agents.

    Attributes
    ----------
    num_agents: :class:`int`
        The number of agents ``M``.
    edges: frozenset[tuple[:class:`int`, :class:`int`]]
        The unordered edges, each stored as ``(i, j)`` with ``i < j``.
    adjacency: tuple[frozenset[:class:`int`], ...]
        The neighbourhood of every agent.
    degrees: tuple[:class:`int`, ...]
        The degree of every agent.
    """

    __slots__ = ("num_agents", "edges", "adjacency", "degrees")

    def __init__(self, num_agents: int, edges: frozenset[tuple[int, int]]):
        neighbours: list[set[int]] = [set() for _ in range(num_agents)]

        for i, j in edges:
            neighbours[i].add(j)
            neighbours[j].add(i)

        self.num_agents: int = num_agents
        self.edges: frozenset[tuple[int, int]] = frozenset(edges)
        self.adjacency: tuple[frozenset[int], ...] = tuple(
            frozenset(agent_neighbours) for agent_neighbours in neighbours
        )
        self.degrees: tuple[int, ...] = tuple(
            len(agent_neighbours) for agent_neighbours in neighbours
        )

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        """Builds a validated topology from its JSON document
        ``{"agents": M, "edges": [[i, j], ...]}``."""
        from consensuscluster.topology import build_topology

        return build_topology(
            int(data["agents"]), [tuple(edge) for edge in data.get("edges", [])]
        )

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON document of the topology."""
        return {
            "agents": self.num_agents,
            "edges": [list(edge) for edge in sorted(self.edges)],
        }

    @property
    def graph(self) -> nx.Graph:
        """:class:`networkx.Graph`: A fresh networkx view of the topology."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.num_agents))
        graph.add_edges_from(self.edges)
        return graph

    @property
    def max_degree(self) -> int:
        """:class:`int`: The largest degree of the graph, 0 for a single agent."""
        return max(self.degrees, default=0)

    def neighbours(self, agent: int) -> frozenset[int]:
        """Returns the neighbourhood ``Ω_i`` of ``agent``."""
        return self.adjacency[agent]

    def __eq__(self, other):
        if isinstance(other, self.__class__):
            return self.num_agents == other.num_agents and self.edges == other.edges

        raise NotImplementedError

    def __hash__(self):
        return hash((self.num_agents, self.edges))

    def __len__(self):
        return self.num_agents

    def __repr__(self):
        return f"Topology agents={self.num_agents}, edges={len(self.edges)}"


class WeightMatrix:
    """Represents a symmetric doubly stochastic mixing matrix.

    Attributes
    ----------
    entries: :class:`numpy.ndarray`
        The read-only ``M x M`` matrix.
    kind: :class:`.enums.WeightKind`
        Whether this is the Metropolis matrix ``W`` or the accelerated
        matrix ``W* = (1 + alpha) W - alpha I``.
    alpha: :class:`float` | :class:`None`
        The acceleration coefficient, present only for accelerated matrices.
    """

    __slots__ = ("entries", "kind", "alpha")

    def __init__(self, entries: np.ndarray, kind: WeightKind, alpha: float | None = None):
        entries = np.array(entries, dtype=float)
        entries.setflags(write=False)
        self.entries: np.ndarray = entries
        self.kind: WeightKind = kind
        self.alpha: float | None = alpha if kind == WeightKind.ACCELERATED else None

    @property
    def size(self) -> int:
        """:class:`int`: The number of agents the matrix mixes."""
        return self.entries.shape[0]

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON representation of the matrix."""
        return {
            "kind": self.kind.value,
            "alpha": self.alpha,
            "entries": self.entries.tolist(),
        }

    def __eq__(self, other):
        if isinstance(other, self.__class__):
            return (
                self.kind == other.kind
                and self.alpha == other.alpha
                and np.array_equal(self.entries, other.entries)
            )

        raise NotImplementedError

    def __hash__(self):
        return hash((self.kind, self.alpha, self.entries.tobytes()))

    def __repr__(self):
        return f"WeightMatrix kind={self.kind.value}, size={self.size}, alpha={self.alpha}"


class SpectralSummary:
    """Represents the spectrum of a Metropolis matrix and the optimal acceleration
    derived from it.

    Attributes
    ----------
    eigenvalues: tuple[:class:`float`, ...]
        The eigenvalues of ``W`` in ascending order.
    lambda_2: :class:`float`
        The second largest eigenvalue.
    lambda_m: :class:`float`
        The smallest eigenvalue.
    alpha_opt: :class:`float`
        The acceleration coefficient with the fastest worst-case asymptotic rate.
    radius_gap: :class:`float`
        The spectral radius of ``W* - J`` for ``W*`` built from :attr:`alpha_opt`.
    """

    __slots__ = ("eigenvalues", "lambda_2", "lambda_m", "alpha_opt", "radius_gap")

    def __init__(
        self,
        eigenvalues: tuple[float, ...],
        lambda_2: float,
        lambda_m: float,
        alpha_opt: float,
        radius_gap: float,
    ):
        self.eigenvalues: tuple[float, ...] = eigenvalues
        self.lambda_2: float = lambda_2
        self.lambda_m: float = lambda_m
        self.alpha_opt: float = alpha_opt
        self.radius_gap: float = radius_gap

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON representation used by the report writer."""
        return {
            "eigenvalues": list(self.eigenvalues),
            "lambda_2": self.lambda_2,
            "lambda_m": self.lambda_m,
            "alpha_opt": self.alpha_opt,
            "radius_gap": self.radius_gap,
        }

    def __repr__(self):
        return (
            f"SpectralSummary lambda_2={self.lambda_2:.6g}, lambda_m={self.lambda_m:.6g}, "
            f"alpha_opt={self.alpha_opt:.6g}, radius_gap={self.radius_gap:.6g}"
        )
