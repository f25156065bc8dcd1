import numpy as np
import pandas as pd

from consensuscluster.enums import BudgetMode, Termination, Variant
from consensuscluster.errors import InvalidParameter
from consensuscluster.objects.topology import WeightMatrix
from consensuscluster.utils import spawn_generators


class DisturbanceParams:
    """Represents the parameters of the decaying masking disturbance.

    .. container:: operations

        .. describe:: x == y

            Checks if two parameter sets are equal.

        .. describe:: hash(x)

            Returns the parameters' hash.

    Attributes
    ----------
    sigma: :class:`float`
        The width of the round-0 sampling interval. Must be positive.
    beta: :class:`float`
        The decay factor of the interval, in ``[0, 1)``.
    seed: :class:`int` | tuple[:class:`int`, ...]
        The master seed every agent's private stream is split from. Tuples are
        used by the clustering driver to derive one seed per outer iteration.
    """

    __slots__ = ("sigma", "beta", "seed")

    def __init__(self, sigma: float = 2.0, beta: float = 0.2, seed: int | tuple[int, ...] = 0):
        if not sigma > 0 or not np.isfinite(sigma):
            raise InvalidParameter("sigma", sigma, "sigma must be a positive number")

        if not 0 <= beta < 1:
            raise InvalidParameter("beta", beta, "beta must lie in [0, 1)")

        self.sigma: float = float(sigma)
        self.beta: float = float(beta)
        self.seed: int | tuple[int, ...] = (
            tuple(int(part) for part in seed) if isinstance(seed, (tuple, list)) else int(seed)
        )

    def radius(self, t: int) -> float:
        """Returns the half-width ``(sigma / 2) * beta ** (t + 1)`` of the
        interval ``delta(t)`` is drawn from."""
        return self.sigma / 2 * self.beta ** (t + 1)

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON representation of the parameters."""
        seed = list(self.seed) if isinstance(self.seed, tuple) else self.seed
        return {"sigma": self.sigma, "beta": self.beta, "seed": seed}

    def __eq__(self, other):
        if isinstance(other, self.__class__):
            return (self.sigma, self.beta, self.seed) == (other.sigma, other.beta, other.seed)

        raise NotImplementedError

    def __hash__(self):
        return hash((self.sigma, self.beta, self.seed))

    def __repr__(self):
        return f"DisturbanceParams sigma={self.sigma}, beta={self.beta}, seed={self.seed}"


class DisturbanceStream:
    """Represents the private disturbance generators of every agent.

    Each agent draws from its own generator, split from
    :attr:`DisturbanceParams.seed`. The stream remembers the last ``delta`` of
    every agent so that ``theta(t) = delta(t) - delta(t - 1)`` telescopes.

    Attributes
    ----------
    params: :class:`DisturbanceParams`
        The disturbance parameters.
    num_agents: :class:`int`
        The number of agents.
    dim: :class:`int`
        The length of every state vector.
    keep_history: :class:`bool`
        Whether every drawn ``delta`` is kept in :attr:`deltas`.
    deltas: list[:class:`numpy.ndarray`]
        The ``M x D`` matrices ``delta(t)`` per round, when history is kept.
    """

    __slots__ = (
        "params",
        "num_agents",
        "dim",
        "keep_history",
        "deltas",
        "_generators",
        "_previous",
        "_next_round",
    )

    def __init__(
        self, params: DisturbanceParams, num_agents: int, dim: int, keep_history: bool = True
    ):
        self.params: DisturbanceParams = params
        self.num_agents: int = num_agents
        self.dim: int = dim
        self.keep_history: bool = keep_history
        self.deltas: list[np.ndarray] = []

        self._generators = spawn_generators(params.seed, num_agents)
        self._previous = np.zeros((num_agents, dim))
        self._next_round = [0] * num_agents

    def sample(self, agent: int, t: int) -> np.ndarray:
        """Draws ``delta_i(t)`` entrywise and returns ``theta_i(t)``.

        Rounds must be drawn in order for every agent, starting at 0.

        Raises
        ------
        InvalidParameter
            If ``t`` is not the next round of ``agent``.
        """
        if t != self._next_round[agent]:
            raise InvalidParameter(
                "t", t, f"agent {agent} expects round {self._next_round[agent]} next"
            )

        radius = self.params.radius(t)
        delta = self._generators[agent].uniform(-radius, radius, self.dim)
        theta = delta - self._previous[agent]

        self._previous[agent] = delta
        self._next_round[agent] += 1
        return theta

    def draw_round(self, t: int) -> np.ndarray:
        """Returns the ``M x D`` masks ``theta(t)`` of all agents."""
        thetas = np.vstack([self.sample(agent, t) for agent in range(self.num_agents)])

        if self.keep_history:
            self.deltas.append(self._previous.copy())

        return thetas

    @property
    def last_deltas(self) -> np.ndarray:
        """:class:`numpy.ndarray`: The most recent ``delta`` of every agent."""
        return self._previous.copy()

    def __repr__(self):
        return f"DisturbanceStream agents={self.num_agents}, dim={self.dim}, {self.params!r}"


class ConsensusConfig:
    """Represents how a consensus run is executed.

    Attributes
    ----------
    variant: :class:`.enums.Variant`
        The algorithm variant.
    tol: :class:`float`
        The tolerance on the max per-agent deviation from the true average.
    budget: :class:`int`
        The maximum number of rounds in tolerance mode.
    budget_mode: :class:`.enums.BudgetMode`
        ``tolerance`` stops on the simulator-observed error; ``radius`` runs the
        fixed number of rounds derived from the spectral radius.
    relative_tol: :class:`bool`
        Whether :attr:`tol` is scaled by ``max(1, |mean|_inf)``.
    keep_trajectory: :class:`bool`
        Whether every round's states and shares are retained.
    params: :class:`DisturbanceParams` | :class:`None`
        The disturbance parameters, required for privacy variants.
    alpha: :class:`float` | :class:`None`
        Overrides the optimal acceleration coefficient.
    """

    __slots__ = (
        "variant",
        "tol",
        "budget",
        "budget_mode",
        "relative_tol",
        "keep_trajectory",
        "params",
        "alpha",
    )

    def __init__(
        self,
        variant: Variant = Variant.PP_AAC,
        tol: float = 1e-9,
        budget: int = 2000,
        budget_mode: BudgetMode = BudgetMode.TOLERANCE,
        relative_tol: bool = False,
        keep_trajectory: bool = True,
        params: DisturbanceParams | None = None,
        alpha: float | None = None,
    ):
        if not tol > 0:
            raise InvalidParameter("tol", tol, "the tolerance must be positive")

        if budget < 1:
            raise InvalidParameter("budget", budget, "at least one round is required")

        if variant.is_private and params is None:
            params = DisturbanceParams()

        self.variant: Variant = variant
        self.tol: float = float(tol)
        self.budget: int = int(budget)
        self.budget_mode: BudgetMode = budget_mode
        self.relative_tol: bool = relative_tol
        self.keep_trajectory: bool = keep_trajectory
        self.params: DisturbanceParams | None = params if variant.is_private else None
        self.alpha: float | None = alpha

    def with_seed(self, seed: int | tuple[int, ...]) -> "ConsensusConfig":
        """Returns a copy whose disturbance parameters use ``seed``."""
        params = self.params

        if params is not None:
            params = DisturbanceParams(params.sigma, params.beta, seed)

        return ConsensusConfig(
            self.variant,
            self.tol,
            self.budget,
            self.budget_mode,
            self.relative_tol,
            self.keep_trajectory,
            params,
            self.alpha,
        )

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON representation of the configuration."""
        return {
            "variant": self.variant.value,
            "tol": self.tol,
            "budget": self.budget,
            "budget_mode": self.budget_mode.value,
            "relative_tol": self.relative_tol,
            "keep_trajectory": self.keep_trajectory,
            "params": self.params.to_dict() if self.params else None,
            "alpha": self.alpha,
        }

    def __repr__(self):
        return (
            f"ConsensusConfig variant={self.variant.value}, tol={self.tol:g}, "
            f"budget={self.budget}, budget_mode={self.budget_mode.value}"
        )


class ConsensusRun:
    """Represents an executed (or partially executed) consensus run.

    Attributes
    ----------
    variant: :class:`.enums.Variant`
        The algorithm variant.
    weights: :class:`.objects.topology.WeightMatrix`
        The mixing matrix used every round.
    params: :class:`DisturbanceParams` | :class:`None`
        The disturbance parameters of privacy variants.
    target: :class:`numpy.ndarray`
        The true average of the initial states.
    initial: :class:`numpy.ndarray`
        The ``M x D`` initial states.
    states: list[:class:`numpy.ndarray`]
        The recorded states. Holds every round when the trajectory is kept,
        otherwise only the initial and final states.
    shares: list[:class:`numpy.ndarray`]
        The masked shares ``x+(t)`` that were sent, privacy variants only.
        Holds only round 0 when the trajectory is not kept.
    deltas: list[:class:`numpy.ndarray`]
        The disturbances ``delta(t)`` per round when the trajectory is kept.
    errors: list[:class:`float`]
        The mean absolute error against :attr:`target` per round.
    max_errors: list[:class:`float`]
        The max absolute error against :attr:`target` per round.
    termination: :class:`.enums.Termination`
        Why the run stopped.
    tol: :class:`float`
        The effective tolerance the run was checked against.
    last_deltas: :class:`numpy.ndarray` | :class:`None`
        ``delta(T - 1)`` of every agent, privacy variants only.
    """

    __slots__ = (
        "variant",
        "weights",
        "params",
        "target",
        "initial",
        "states",
        "shares",
        "deltas",
        "errors",
        "max_errors",
        "termination",
        "tol",
        "last_deltas",
        "keep_trajectory",
    )

    def __init__(
        self,
        variant: Variant,
        weights: WeightMatrix,
        initial: np.ndarray,
        params: DisturbanceParams | None = None,
        tol: float = 0.0,
        keep_trajectory: bool = True,
    ):
        self.variant: Variant = variant
        self.weights: WeightMatrix = weights
        self.params: DisturbanceParams | None = params
        self.initial: np.ndarray = initial
        self.target: np.ndarray = initial.mean(axis=0)
        self.states: list[np.ndarray] = [initial]
        self.shares: list[np.ndarray] = []
        self.deltas: list[np.ndarray] = []
        self.errors: list[float] = []
        self.max_errors: list[float] = []
        self.termination: Termination = Termination.BUDGET
        self.tol: float = tol
        self.last_deltas: np.ndarray | None = None
        self.keep_trajectory: bool = keep_trajectory

    @property
    def num_agents(self) -> int:
        """:class:`int`: The number of agents."""
        return self.initial.shape[0]

    @property
    def dim(self) -> int:
        """:class:`int`: The length of every state vector."""
        return self.initial.shape[1]

    @property
    def rounds(self) -> int:
        """:class:`int`: The number of rounds executed."""
        return len(self.errors) - 1

    @property
    def final(self) -> np.ndarray:
        """:class:`numpy.ndarray`: The ``M x D`` states after the last round."""
        return self.states[-1]

    @property
    def sums(self) -> np.ndarray:
        """:class:`numpy.ndarray`: Every agent's estimate of the network sum,
        ``M`` times its final state."""
        return self.num_agents * self.final

    @property
    def max_error(self) -> float:
        """:class:`float`: The max absolute error after the last round."""
        return self.max_errors[-1]

    @property
    def converged(self) -> bool:
        """:class:`bool`: Whether the run stopped on its tolerance."""
        return self.termination == Termination.TOLERANCE

    def record(self, states: np.ndarray, shares: np.ndarray | None = None) -> None:
        """Appends the states of a new round and the shares that produced them."""
        if shares is not None:
            if self.keep_trajectory or not self.shares:
                self.shares.append(shares)

        if self.keep_trajectory or len(self.states) == 1:
            self.states.append(states)

        else:
            self.states[-1] = states

    def measure(self, states: np.ndarray) -> float:
        """Appends the errors of ``states`` and returns the max error."""
        deviation = np.abs(states - self.target)
        self.errors.append(float(deviation.mean()))
        self.max_errors.append(float(deviation.max()))
        return self.max_errors[-1]

    def to_frame(self) -> pd.DataFrame:
        """Exports the recorded trajectory as a long table.

        Returns
        -------
        :class:`pandas.DataFrame`
            One row per recorded round, agent and entry with the columns
            ``round``, ``agent``, ``entry``, ``value``, ``masked_value`` and
            ``error``. ``masked_value`` is empty where no share was sent.
        """
        if self.keep_trajectory:
            rounds = list(range(len(self.states)))

        else:
            rounds = [0, self.rounds] if self.rounds else [0]

        frames = []

        for position, t in enumerate(rounds):
            states = self.states[position]
            masked = self.shares[position] if position < len(self.shares) else None
            agents, entries = np.indices(states.shape)
            frames.append(
                pd.DataFrame(
                    {
                        "round": t,
                        "agent": agents.ravel(),
                        "entry": entries.ravel(),
                        "value": states.ravel(),
                        "masked_value": masked.ravel() if masked is not None else np.nan,
                        "error": np.abs(states - self.target).ravel(),
                    }
                )
            )

        return pd.concat(frames, ignore_index=True)

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON summary of the run."""
        from consensuscluster.consensus import drift_bound, sum_drift

        drift = sum_drift(self)
        bound = drift_bound(self)
        return {
            "variant": self.variant.value,
            "rounds": self.rounds,
            "termination": self.termination.value,
            "tol": self.tol,
            "final_error": self.max_error,
            "final_mean_error": self.errors[-1],
            "alpha": self.weights.alpha,
            "params": self.params.to_dict() if self.params else None,
            "sum_drift": drift,
            "drift_bound": bound,
            "drift_within_bound": drift <= bound,
        }

    def __len__(self):
        return self.rounds

    def __repr__(self):
        return (
            f"ConsensusRun variant={self.variant.value}, rounds={self.rounds}, "
            f"termination={self.termination.value}"
        )
