import json
import logging
from collections.abc import Iterable
from pathlib import Path

import networkx as nx
import numpy as np
import scipy.linalg

from .enums import WeightKind
from .errors import DisconnectedGraph, EigenFailure, InvalidEdge, InvalidParameter, InvalidWeightMatrix
from .objects.topology import SpectralSummary, Topology, WeightMatrix

__all__ = (
    "build_topology",
    "load_topology",
    "metropolis_weights",
    "accelerated_weights",
    "spectral_summary",
    "mixing_radius",
    "vulnerable_pairs",
    "refuse_vulnerable_links",
    "average_augmented_degree",
    "path_topology",
    "cycle_topology",
    "complete_topology",
    "star_topology",
    "circulant_topology",
    "retailer_topology",
    "random_connected_topology",
    "nested_topologies",
)

logger = logging.getLogger(__name__)

STOCHASTIC_TOLERANCE = 1e-12

# The retailer network: agent 0 has the maximum degree (5), every agent has
# at least two neighbours and there are no triangles.
RETAILER_EDGES = (
    (0, 1), (0, 2), (0, 3), (0, 4), (0, 5),
    (1, 6), (2, 6), (3, 7), (4, 8), (5, 9),
    (6, 7), (7, 8), (8, 9), (6, 9),
)


def build_topology(num_agents: int, edges: Iterable[tuple[int, int]]) -> Topology:
    """Builds a validated communication graph.

    Parameters
    ----------
    num_agents: :class:`int`
        The number of agents ``M``.
    edges: Iterable[tuple[:class:`int`, :class:`int`]]
        The unordered agent pairs that can talk to each other.

    Returns
    -------
    :class:`.objects.topology.Topology`
        The connected topology.

    Raises
    ------
    InvalidParameter
        If there is no agent.
    InvalidEdge
        If an edge is a self-loop, out of range or a duplicate.
    DisconnectedGraph
        If the graph has more than one component.
    """
    if num_agents < 1:
        raise InvalidParameter("num_agents", num_agents, "a topology needs at least one agent")

    seen: set[tuple[int, int]] = set()

    for edge in edges:
        i, j = (int(index) for index in edge)

        if i == j:
            raise InvalidEdge((i, j), "self-loops are not allowed")

        if not (0 <= i < num_agents and 0 <= j < num_agents):
            raise InvalidEdge((i, j), f"agent indices must lie in [0, {num_agents})")

        key = (min(i, j), max(i, j))

        if key in seen:
            raise InvalidEdge((i, j), "the edge is listed more than once")

        seen.add(key)

    topology = Topology(num_agents, frozenset(seen))
    components = nx.number_connected_components(topology.graph)

    if components != 1:
        raise DisconnectedGraph(num_agents, components)

    logger.debug("Built %r with degrees %s", topology, topology.degrees)
    return topology


def load_topology(path: str | Path) -> Topology:
    """Loads a topology from a JSON document ``{"agents": M, "edges": [[i, j], ...]}``."""
    with open(path, "r") as f:
        data = json.load(f)

    return Topology.from_dict(data)


def _check_doubly_stochastic(entries: np.ndarray) -> None:
    ones = np.ones(entries.shape[0])

    if not np.allclose(entries, entries.T, rtol=0, atol=STOCHASTIC_TOLERANCE):
        raise InvalidWeightMatrix("the matrix is not symmetric")

    if not np.allclose(entries @ ones, ones, rtol=0, atol=STOCHASTIC_TOLERANCE):
        raise InvalidWeightMatrix("the rows do not sum to 1")

    if not np.allclose(ones @ entries, ones, rtol=0, atol=STOCHASTIC_TOLERANCE):
        raise InvalidWeightMatrix("the columns do not sum to 1")


def metropolis_weights(topology: Topology) -> WeightMatrix:
    """Computes the Metropolis weight matrix of a topology.

    ``W_ij = 1 / (1 + max(d_i, d_j))`` for neighbours, the diagonal takes the
    remaining mass of each row and every other entry is zero.

    Parameters
    ----------
    topology: :class:`.objects.topology.Topology`
        The communication graph.

    Returns
    -------
    :class:`.objects.topology.WeightMatrix`
        The symmetric doubly stochastic Metropolis matrix.
    """
    size = topology.num_agents
    degrees = topology.degrees
    entries = np.zeros((size, size))

    for i, j in topology.edges:
        weight = 1.0 / (1.0 + max(degrees[i], degrees[j]))
        entries[i, j] = weight
        entries[j, i] = weight

    for i in range(size):
        entries[i, i] = 1.0 - sum(entries[i, j] for j in topology.adjacency[i])

    _check_doubly_stochastic(entries)
    return WeightMatrix(entries, WeightKind.METROPOLIS)


def accelerated_weights(weights: WeightMatrix, alpha: float) -> WeightMatrix:
    """Computes the accelerated Metropolis matrix ``W* = (1 + alpha) W - alpha I``.

    Parameters
    ----------
    weights: :class:`.objects.topology.WeightMatrix`
        The Metropolis matrix.
    alpha: :class:`float`
        The acceleration coefficient.

    Returns
    -------
    :class:`.objects.topology.WeightMatrix`
        The accelerated matrix. It may contain negative entries but remains
        doubly stochastic.
    """
    if not np.isfinite(alpha):
        raise InvalidWeightMatrix(f"alpha={alpha!r} is not finite")

    entries = (1.0 + alpha) * weights.entries - alpha * np.eye(weights.size)
    _check_doubly_stochastic(entries)
    return WeightMatrix(entries, WeightKind.ACCELERATED, float(alpha))


def _symmetric_eigenvalues(entries: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.eigh(entries, eigvals_only=True)

    except (scipy.linalg.LinAlgError, ValueError) as exception:
        raise EigenFailure(str(exception)) from exception


def mixing_radius(weights: WeightMatrix) -> float:
    """Returns the spectral radius of ``W - J``, the worst-case contraction of the
    disagreement per round for any symmetric doubly stochastic mixing matrix."""
    size = weights.size
    gap = _symmetric_eigenvalues(weights.entries - np.full((size, size), 1.0 / size))
    return float(np.max(np.abs(gap)))


def spectral_summary(weights: WeightMatrix) -> SpectralSummary:
    """Computes the spectrum of a Metropolis matrix and its optimal acceleration.

    Parameters
    ----------
    weights: :class:`.objects.topology.WeightMatrix`
        A symmetric doubly stochastic Metropolis matrix.

    Returns
    -------
    :class:`.objects.topology.SpectralSummary`
        ``alpha_opt = (lambda_M + lambda_2) / (2 - lambda_M - lambda_2)`` together
        with the radius gap of the resulting accelerated matrix.

    Raises
    ------
    EigenFailure
        If the eigensolver does not converge.
    """
    _check_doubly_stochastic(weights.entries)
    eigenvalues = _symmetric_eigenvalues(weights.entries)

    if weights.size == 1:
        return SpectralSummary((float(eigenvalues[0]),), 1.0, 1.0, 0.0, 0.0)

    lambda_2 = float(eigenvalues[-2])
    lambda_m = float(eigenvalues[0])
    alpha_opt = (lambda_m + lambda_2) / (2.0 - lambda_m - lambda_2)
    radius_gap = mixing_radius(accelerated_weights(weights, alpha_opt))

    summary = SpectralSummary(
        tuple(float(value) for value in eigenvalues),
        lambda_2,
        lambda_m,
        alpha_opt,
        radius_gap,
    )
    logger.debug("Spectrum of %r: %r", weights, summary)
    return summary


def vulnerable_pairs(topology: Topology) -> list[tuple[int, int]]:
    """Lists the neighbour pairs under which masking can be defeated.

    Parameters
    ----------
    topology: :class:`.objects.topology.Topology`
        The communication graph.

    Returns
    -------
    list[tuple[:class:`int`, :class:`int`]]
        Every ordered pair ``(j, i)`` with ``j`` a neighbour of ``i`` and
        ``Ω_j ⊆ Ω_i ∪ {i}``: agent ``i`` receives everything agent ``j``
        receives. Sorted; empty when no agent is exposed.
    """
    pairs = []

    for i in range(topology.num_agents):
        covered = topology.adjacency[i] | {i}

        for j in topology.adjacency[i]:
            if topology.adjacency[j] <= covered:
                pairs.append((j, i))

    return sorted(pairs)


def refuse_vulnerable_links(topology: Topology) -> Topology:
    """Drops the links of vulnerable pairs as long as the graph stays connected.

    Each exposed agent ``j`` refuses to talk to the neighbour ``i`` that covers
    its neighbourhood. Edges are examined in sorted order and the pass repeats
    until no removable vulnerable edge is left, so the result is deterministic.
    Pairs that would disconnect the graph are kept and remain visible through
    :func:`vulnerable_pairs`.
    """
    edges = set(topology.edges)
    changed = True

    while changed:
        changed = False
        current = Topology(topology.num_agents, frozenset(edges))

        for j, i in vulnerable_pairs(current):
            edge = (min(i, j), max(i, j))
            candidate = Topology(topology.num_agents, frozenset(edges - {edge}))

            if nx.is_connected(candidate.graph):
                logger.info("Agent %s refuses its link to agent %s.", j, i)
                edges.discard(edge)
                changed = True
                break

    return build_topology(topology.num_agents, sorted(edges))


def average_augmented_degree(topology: Topology) -> float:
    """Returns the mean of ``d_i + 1`` over all agents."""
    return float(np.mean(topology.degrees)) + 1.0


def path_topology(num_agents: int) -> Topology:
    """Returns the path ``0 - 1 - ... - (M-1)``."""
    return build_topology(num_agents, [(i, i + 1) for i in range(num_agents - 1)])


def cycle_topology(num_agents: int) -> Topology:
    """Returns the cycle over ``M >= 3`` agents."""
    return circulant_topology(num_agents, 1)


def complete_topology(num_agents: int) -> Topology:
    """Returns the complete graph."""
    return build_topology(
        num_agents,
        [(i, j) for i in range(num_agents) for j in range(i + 1, num_agents)],
    )


def star_topology(num_agents: int) -> Topology:
    """Returns the star centred on agent 0."""
    return build_topology(num_agents, [(0, j) for j in range(1, num_agents)])


def circulant_topology(num_agents: int, reach: int) -> Topology:
    """Returns the circulant graph linking every agent to the ``reach`` nearest
    agents on each side of a ring."""
    edges = {
        (min(i, (i + step) % num_agents), max(i, (i + step) % num_agents))
        for i in range(num_agents)
        for step in range(1, reach + 1)
        if (i + step) % num_agents != i
    }
    return build_topology(num_agents, sorted(edges))


def retailer_topology() -> Topology:
    """Returns the 10-agent, 14-edge retailer network."""
    return build_topology(10, RETAILER_EDGES)


def random_connected_topology(
    num_agents: int, edge_probability: float, seed: int | np.random.Generator
) -> Topology:
    """Draws a random connected graph.

    A random recursive tree guarantees connectivity; every other pair is then
    added independently with probability ``edge_probability``.
    """
    rng = np.random.default_rng(seed)
    edges = {
        (int(rng.integers(0, agent)), agent) for agent in range(1, num_agents)
    }

    for i in range(num_agents):
        for j in range(i + 1, num_agents):
            if (i, j) not in edges and rng.random() < edge_probability:
                edges.add((i, j))

    return build_topology(num_agents, sorted(edges))


def nested_topologies(num_agents: int = 10) -> list[Topology]:
    """Returns a nested sequence of increasingly dense topologies.

    The sequence starts with the path and the cycle. For every reach ``r`` from 2
    up to ``M // 2`` it then adds the chords ``(i, i + r)`` of the even agents,
    then those of the odd agents, which completes the circulant graph of reach
    ``r``. The last graph is complete. On 10 agents this gives 9 graphs whose
    radius gaps strictly decrease.
    """
    edges = {(i, i + 1) for i in range(num_agents - 1)}
    sequence = [build_topology(num_agents, sorted(edges))]

    def extend(chords) -> None:
        chords = {(min(i, j), max(i, j)) for i, j in chords if i != j}

        if not chords <= edges:
            edges.update(chords)
            sequence.append(build_topology(num_agents, sorted(edges)))

    extend([(num_agents - 1, 0)])

    for reach in range(2, num_agents // 2 + 1):
        for start in (0, 1):
            extend([(i, (i + reach) % num_agents) for i in range(start, num_agents, 2)])

    return sequence
