import logging
import math

import numpy as np

from .enums import BudgetMode, Termination, Variant
from .errors import BudgetExhausted, DimensionMismatch, InvalidParameter
from .objects.consensus import ConsensusConfig, ConsensusRun, DisturbanceParams, DisturbanceStream
from .objects.topology import Topology, WeightMatrix
from .topology import accelerated_weights, metropolis_weights, mixing_radius, spectral_summary
from .utils import as_float_matrix

__all__ = (
    "sample_disturbance",
    "mixing_matrix",
    "step",
    "predictor_update",
    "run_consensus",
    "run_with_config",
    "convergence_curve",
    "round_budget",
    "tail_slope",
    "sum_drift",
    "drift_bound",
)

logger = logging.getLogger(__name__)

FLOAT_ALLOWANCE = 1e-10
MAX_BUDGET = 1_000_000


def sample_disturbance(stream: DisturbanceStream, agent: int, t: int) -> np.ndarray:
    """Draws the masking disturbance of one agent for round ``t``.

    Parameters
    ----------
    stream: :class:`.objects.consensus.DisturbanceStream`
        The private streams of the network.
    agent: :class:`int`
        The agent drawing.
    t: :class:`int`
        The round, starting at 0.

    Returns
    -------
    :class:`numpy.ndarray`
        ``theta_i(t) = delta_i(t) - delta_i(t - 1)`` where every entry of
        ``delta_i(t)`` is uniform in ``[-(sigma/2) beta^(t+1), (sigma/2) beta^(t+1)]``
        and ``delta_i(-1) = 0``.
    """
    if t < 0:
        raise InvalidParameter("t", t, "rounds start at 0")

    return stream.sample(agent, t)


def mixing_matrix(
    variant: Variant, topology: Topology, alpha: float | None = None
) -> WeightMatrix:
    """Returns the matrix a variant mixes with.

    AC mixes with the Metropolis matrix. AAC and PP-AAC use the accelerated
    matrix built from the optimal coefficient unless ``alpha`` overrides it.
    PP-AC is PP-AAC with the coefficient forced to 0.
    """
    weights = metropolis_weights(topology)

    if variant == Variant.AC:
        return weights

    if variant == Variant.PP_AC:
        return accelerated_weights(weights, 0.0)

    if alpha is None:
        alpha = spectral_summary(weights).alpha_opt

    return accelerated_weights(weights, alpha)


def step(
    variant: Variant,
    weights: WeightMatrix,
    states: np.ndarray,
    masks: np.ndarray | None = None,
) -> np.ndarray:
    """Executes one synchronous consensus round.

    Parameters
    ----------
    variant: :class:`.enums.Variant`
        The algorithm variant.
    weights: :class:`.objects.topology.WeightMatrix`
        ``W`` for AC, ``W*`` for the other variants.
    states: :class:`numpy.ndarray`
        The ``M x D`` states ``X(t)``.
    masks: :class:`numpy.ndarray` | :class:`None`
        The ``M x D`` disturbances ``theta(t)`` of privacy variants. Missing
        masks are treated as zero.

    Returns
    -------
    :class:`numpy.ndarray`
        ``X(t + 1)``: the mixed states, or for privacy variants the mixed
        masked shares ``X(t) + theta(t)``.

    Raises
    ------
    DimensionMismatch
        If the shapes of the matrix, states and masks disagree.
    """
    states = as_float_matrix(states, "states")

    if states.shape[0] != weights.size:
        raise DimensionMismatch((weights.size, "D"), states.shape, "states")

    if variant.is_private and masks is not None:
        if masks.shape != states.shape:
            raise DimensionMismatch(states.shape, masks.shape, "masks")

        states = states + masks

    return weights.entries @ states


def predictor_update(weights: WeightMatrix, alpha: float, states: np.ndarray) -> np.ndarray:
    """Executes one AAC round in per-agent form.

    Every agent computes its AC value ``x_w = sum_j W_ij x_j``, extrapolates the
    predictor ``x_p = 2 x_w - x_i`` and moves to ``alpha x_p + (1 - alpha) x_w``.
    The result equals ``W* X`` with ``W* = (1 + alpha) W - alpha I``.
    """
    states = as_float_matrix(states, "states")
    averaged = weights.entries @ states
    predicted = 2 * averaged - states
    return alpha * predicted + (1 - alpha) * averaged


def _validate_run(
    variant: Variant,
    num_agents: int,
    states: np.ndarray,
    params: DisturbanceParams | None,
    tol: float,
    budget: int,
) -> None:
    if states.shape[0] != num_agents:
        raise DimensionMismatch((num_agents, "D"), states.shape, "initial states")

    if states.shape[1] < 1:
        raise DimensionMismatch((num_agents, "D >= 1"), states.shape, "initial states")

    if not np.all(np.isfinite(states)):
        raise InvalidParameter("initial_states", "non-finite", "every entry must be finite")

    if not tol > 0:
        raise InvalidParameter("tol", tol, "the tolerance must be positive")

    if budget < 1:
        raise InvalidParameter("budget", budget, "at least one round is required")

    if variant.is_private and params is None:
        raise InvalidParameter("params", None, f"{variant.value} needs disturbance parameters")

    if not variant.is_private and params is not None:
        raise InvalidParameter("params", params, f"{variant.value} does not mask its shares")


def run_consensus(
    variant: Variant,
    topology: Topology,
    initial_states,
    params: DisturbanceParams | None = None,
    tol: float = 1e-9,
    budget: int = 2000,
    *,
    budget_mode: BudgetMode = BudgetMode.TOLERANCE,
    relative_tol: bool = False,
    keep_trajectory: bool = True,
    alpha: float | None = None,
    weights: WeightMatrix | None = None,
) -> ConsensusRun:
    """Runs average consensus until every agent holds the network average.

    The error against the true average is checked before each round, so a
    network that already agrees terminates at round 0.

    Parameters
    ----------
    variant: :class:`.enums.Variant`
        The algorithm variant.
    topology: :class:`.objects.topology.Topology`
        The communication graph.
    initial_states: array-like
        The ``M x D`` initial states. Vectors are treated as ``D = 1``.
    params: :class:`.objects.consensus.DisturbanceParams` | :class:`None`
        Required for privacy variants, rejected otherwise.
    tol: :class:`float`
        The tolerance on the max per-agent deviation from the true average.
    budget: :class:`int`
        The maximum number of rounds, or the exact number in radius mode.
    budget_mode: :class:`.enums.BudgetMode`
        ``radius`` runs exactly ``budget`` rounds without consulting the error.
    relative_tol: :class:`bool`
        Scales ``tol`` by ``max(1, |mean|_inf)``.
    keep_trajectory: :class:`bool`
        Whether every round's states and shares are retained.
    alpha: :class:`float` | :class:`None`
        Overrides the optimal acceleration coefficient.
    weights: :class:`.objects.topology.WeightMatrix` | :class:`None`
        A precomputed mixing matrix, skipping the spectral analysis.

    Returns
    -------
    :class:`.objects.consensus.ConsensusRun`
        The recorded run. ``run.sums`` holds every agent's estimate of the sum.

    Raises
    ------
    BudgetExhausted
        If the tolerance is not met within the budget in tolerance mode. The
        partial run is attached to the exception.
    """
    states = as_float_matrix(initial_states, "initial states")
    _validate_run(variant, topology.num_agents, states, params, tol, budget)

    if weights is None:
        weights = mixing_matrix(variant, topology, alpha)

    run = ConsensusRun(variant, weights, states, params, tol, keep_trajectory)

    if relative_tol:
        run.tol = tol * max(1.0, float(np.max(np.abs(run.target))))

    stream = None

    if variant.is_private:
        stream = DisturbanceStream(params, topology.num_agents, states.shape[1], keep_trajectory)

    t = 0

    while True:
        error = run.measure(states)
        logger.debug("Round %s of %s: max error %s", t, variant.value, error)

        if budget_mode == BudgetMode.TOLERANCE and error <= run.tol:
            run.termination = Termination.TOLERANCE
            break

        if t == budget:
            run.termination = Termination.BUDGET
            break

        masks = stream.draw_round(t) if stream is not None else None
        shares = states + masks if masks is not None else None
        states = step(variant, weights, states, masks)
        run.record(states, shares)
        t += 1

    if stream is not None:
        run.deltas = stream.deltas
        run.last_deltas = stream.last_deltas if t else np.zeros_like(states)

    if run.termination == Termination.BUDGET and budget_mode == BudgetMode.TOLERANCE:
        raise BudgetExhausted(run, run.tol)

    logger.debug(
        "Consensus %s stopped on %s after %s rounds with max error %s",
        variant.value,
        run.termination.value,
        run.rounds,
        run.max_error,
    )
    return run


def run_with_config(
    config: ConsensusConfig,
    topology: Topology,
    initial_states,
    weights: WeightMatrix | None = None,
) -> ConsensusRun:
    """Runs :func:`run_consensus` with the settings of a
    :class:`.objects.consensus.ConsensusConfig`. In radius mode the number of
    rounds is derived with :func:`round_budget`."""
    states = as_float_matrix(initial_states, "initial states")

    if weights is None:
        weights = mixing_matrix(config.variant, topology, config.alpha)

    budget = config.budget

    if config.budget_mode == BudgetMode.RADIUS:
        tol = config.tol

        if config.relative_tol:
            tol *= max(1.0, float(np.max(np.abs(states.mean(axis=0)))))

        budget = round_budget(weights, tol, states, config.params)

    return run_consensus(
        config.variant,
        topology,
        states,
        config.params,
        config.tol,
        budget,
        budget_mode=config.budget_mode,
        relative_tol=config.relative_tol,
        keep_trajectory=config.keep_trajectory,
        weights=weights,
    )


def convergence_curve(run: ConsensusRun) -> np.ndarray:
    """Returns the mean absolute error against the true average per round."""
    return np.array(run.errors)


def round_budget(
    weights: WeightMatrix,
    tol: float,
    initial_states,
    params: DisturbanceParams | None = None,
) -> int:
    """Derives a fixed number of rounds that guarantees the tolerance.

    With ``rho`` the mixing radius of ``weights`` and ``e0`` the largest column
    2-norm of the initial deviation from the average, returns the smallest
    ``T >= 1`` with

    ``rho^T e0 + (sigma/2) beta^T + sqrt(M) (sigma/2) (1 + beta) T max(rho, beta)^T <= tol``.

    Without disturbance this is ``ceil(log(tol / e0) / log(rho))``.

    Raises
    ------
    InvalidParameter
        If the bound cannot be met within a million rounds.
    """
    if not tol > 0:
        raise InvalidParameter("tol", tol, "the tolerance must be positive")

    states = as_float_matrix(initial_states, "initial states")
    num_agents = states.shape[0]
    spread = float(np.max(np.linalg.norm(states - states.mean(axis=0), axis=0)))
    rho = mixing_radius(weights) if num_agents > 1 else 0.0

    if params is None:
        if spread <= tol or rho == 0.0:
            return 1

        if rho >= 1.0:
            raise InvalidParameter("weights", weights, "the mixing radius is not below 1")

        return max(1, math.ceil(math.log(tol / spread) / math.log(rho)))

    half = params.sigma / 2
    decay = max(rho, params.beta)

    for rounds in range(1, MAX_BUDGET + 1):
        bound = (
            rho**rounds * spread
            + half * params.beta**rounds
            + math.sqrt(num_agents) * half * (1 + params.beta) * rounds * decay**rounds
        )

        if bound <= tol:
            return rounds

    raise InvalidParameter("tol", tol, "the tolerance cannot be guaranteed")


def tail_slope(curve, upper: float = 1e-4, lower: float = 1e-10) -> float:
    """Fits the asymptotic rate of an error curve.

    Returns the least-squares slope of ``log10(error)`` against the round index,
    over the rounds between the first one below ``upper`` and the first one
    below ``lower``.

    Raises
    ------
    InvalidParameter
        If the curve never drops below both thresholds.
    """
    curve = np.asarray(curve, dtype=float)
    below_upper = np.flatnonzero(curve < upper)
    below_lower = np.flatnonzero(curve < lower)

    if not below_upper.size or not below_lower.size:
        raise InvalidParameter("curve", f"min={curve.min():g}", "the window is never reached")

    start, stop = below_upper[0], below_lower[0]

    if stop - start < 1:
        raise InvalidParameter("curve", f"window={start}..{stop}", "the window is too short")

    rounds = np.arange(start, stop + 1)
    slope, _ = np.polyfit(rounds, np.log10(curve[start : stop + 1]), 1)
    return float(slope)


def sum_drift(run: ConsensusRun) -> float:
    """Returns the largest entrywise change of the network sum over the run."""
    return float(np.max(np.abs(run.final.sum(axis=0) - run.initial.sum(axis=0))))


def drift_bound(run: ConsensusRun) -> float:
    """Returns the bound on :func:`sum_drift`.

    After ``T`` rounds the sum has moved by the last disturbances
    ``sum_i delta_i(T - 1)``, bounded by ``M (sigma/2) beta^T``, plus a floating
    point allowance.
    """
    if run.params is None or run.rounds == 0:
        return FLOAT_ALLOWANCE

    return run.num_agents * run.params.radius(run.rounds - 1) + FLOAT_ALLOWANCE
