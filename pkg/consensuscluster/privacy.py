import logging

import numpy as np

from .clustering import unpack_state
from .enums import Method
from .errors import InvalidParameter, NotNeighbors
from .objects.clustering import LocalSummary
from .objects.consensus import ConsensusRun
from .objects.privacy import AdversaryView, PrivacySet
from .objects.topology import Topology
from .topology import vulnerable_pairs

__all__ = (
    "infer_privacy_set",
    "inference_errors",
    "received_stream",
    "reconstruct_initial_state",
    "attack_run",
)

logger = logging.getLogger(__name__)


def infer_privacy_set(
    shared: LocalSummary | np.ndarray,
    num_clusters: int | None = None,
    dim: int | None = None,
    scatter: bool = False,
) -> PrivacySet:
    """Infers an agent's private information from its local results.

    ``N = sum_k z_k``, ``r_k = z_k / N`` and ``mu_k = s_k / z_k``. Divisions by
    zero leave the field undefined rather than propagating ``nan``.

    Parameters
    ----------
    shared: :class:`.objects.clustering.LocalSummary` | :class:`numpy.ndarray`
        The local results, or a packed state shaped like them.
    num_clusters: :class:`int` | :class:`None`
        ``K``, required for packed states.
    dim: :class:`int` | :class:`None`
        ``D``, required for packed states.
    scatter: :class:`bool`
        Whether packed states carry scatter matrices.

    Returns
    -------
    :class:`.objects.privacy.PrivacySet`
        The inferred information.
    """
    if not isinstance(shared, LocalSummary):
        if num_clusters is None or dim is None:
            raise InvalidParameter("shared", "packed state", "K and D are needed to read it")

        # The layout does not depend on the method beyond the scatter block.
        shared = unpack_state(shared, Method.KMEANS, num_clusters, dim, scatter)

    count = float(shared.z.sum())
    proportions_defined = count != 0
    patterns_defined = shared.z != 0

    proportions = np.full(shared.z.shape, np.nan)
    patterns = np.full(shared.s.shape, np.nan)

    if proportions_defined:
        proportions = shared.z / count

    patterns[patterns_defined] = shared.s[patterns_defined] / shared.z[patterns_defined, None]
    return PrivacySet(count, proportions, patterns, proportions_defined, patterns_defined)


def inference_errors(inferred: PrivacySet, truth: PrivacySet) -> dict:
    """Measures how far an inference is from the truth.

    Returns
    -------
    dict[:class:`str`, :class:`float` | :class:`None`]
        ``count``: the absolute error of ``N``; ``proportions``: the total
        variation distance; ``patterns``: the RMS error over the clusters
        defined on both sides. ``None`` where nothing can be compared.
    """
    errors = {"count": abs(inferred.count - truth.count), "proportions": None, "patterns": None}

    if inferred.proportions_defined and truth.proportions_defined:
        errors["proportions"] = float(np.abs(inferred.proportions - truth.proportions).sum() / 2)

    both = inferred.patterns_defined & truth.patterns_defined

    if both.any():
        difference = inferred.patterns[both] - truth.patterns[both]
        errors["patterns"] = float(np.sqrt(np.mean(difference**2)))

    return errors


def received_stream(run: ConsensusRun, target: int) -> list[np.ndarray]:
    """Returns every value ``target`` sent during the recorded rounds: masked
    shares for privacy variants, raw states otherwise."""
    if run.variant.is_private:
        return [shares[target].copy() for shares in run.shares]

    sent = run.states[: max(run.rounds, 1)] if run.keep_trajectory else run.states[:1]
    return [states[target].copy() for states in sent]


def _check_neighbours(topology: Topology, observer: int, target: int) -> None:
    if target not in topology.neighbours(observer):
        raise NotNeighbors(observer, target)


def reconstruct_initial_state(
    run: ConsensusRun, topology: Topology, observer: int, target: int
) -> np.ndarray | None:
    """Recovers a neighbour's initial state when its neighbourhood is covered.

    If every neighbour of ``target`` is also a neighbour of ``observer`` (or the
    observer itself), the observer sees every share that enters the target's
    update. It recomputes ``x_j(t)`` for ``t >= 1``, reads off the masks
    ``theta_j(t) = x_j+(t) - x_j(t)`` and returns
    ``x_j+(0) + sum_{t >= 1} theta_j(t)``, which misses ``x_j(0)`` only by the
    final ``delta_j(T - 1)``.

    Returns
    -------
    :class:`numpy.ndarray` | :class:`None`
        The estimate of ``x_j(0)``, or ``None`` when the run did not keep its
        trajectory.

    Raises
    ------
    NotNeighbors
        If the two agents are not neighbours.
    InvalidParameter
        If the target's neighbourhood is not covered by the observer's.
    """
    _check_neighbours(topology, observer, target)

    if (target, observer) not in vulnerable_pairs(topology):
        raise InvalidParameter(
            "target", target, f"agent {observer} does not see every share agent {target} receives"
        )

    if not run.variant.is_private:
        return run.states[0][target].copy()

    if not run.keep_trajectory:
        logger.warning(
            "Agent %s cannot reconstruct agent %s: the run kept only round 0.", observer, target
        )
        return None

    row = run.weights.entries[target]
    estimate = run.shares[0][target].copy()

    for t in range(1, len(run.shares)):
        state = row @ run.shares[t - 1]
        estimate += run.shares[t][target] - state

    return estimate


def attack_run(
    run: ConsensusRun,
    topology: Topology,
    observer: int,
    target: int,
    truth: LocalSummary,
) -> AdversaryView:
    """Plays an honest-but-curious agent against one of its neighbours.

    Parameters
    ----------
    run: :class:`.objects.consensus.ConsensusRun`
        A consensus run over packed local results.
    topology: :class:`.objects.topology.Topology`
        The communication graph of the run.
    observer: :class:`int`
        The curious agent ``i``.
    target: :class:`int`
        The neighbour ``j``.
    truth: :class:`.objects.clustering.LocalSummary`
        The target's true local results.

    Returns
    -------
    :class:`.objects.privacy.AdversaryView`
        The values received from the target, the round-0 inference and its
        errors. For vulnerable pairs the linear reconstruction is attached.

    Raises
    ------
    NotNeighbors
        If the two agents are not neighbours.
    """
    _check_neighbours(topology, observer, target)

    received = received_stream(run, target)

    if not received:
        raise InvalidParameter("run", run, "the run terminated before any value was exchanged")

    scatter = truth.h is not None
    inferred = infer_privacy_set(received[0], truth.num_clusters, truth.dim, scatter)
    actual = infer_privacy_set(truth)
    errors = inference_errors(inferred, actual)
    vulnerable = (target, observer) in vulnerable_pairs(topology)

    reconstruction = error = None

    if vulnerable:
        reconstruction = reconstruct_initial_state(run, topology, observer, target)

        if reconstruction is not None:
            error = float(np.max(np.abs(reconstruction - run.initial[target])))

    logger.info(
        "Agent %s inferred agent %s's consumer count with error %s (vulnerable: %s).",
        observer,
        target,
        errors["count"],
        vulnerable,
    )
    return AdversaryView(
        observer,
        target,
        received,
        run.variant.is_private,
        inferred,
        actual,
        errors,
        vulnerable,
        reconstruction,
        error,
    )
