import copy
import json
from pathlib import Path

import numpy as np
import pandas as pd

from consensuscluster.enums import (
    BudgetMode,
    CovarianceCentre,
    InitStrategy,
    Method,
    PartitionPolicy,
    Recipe,
    Standardization,
    Variant,
)
from consensuscluster.errors import DimensionMismatch, InvalidConfig


class Dataset:
    """Represents the observations of the whole network.

    .. container:: operations

        .. describe:: len(x)

            Returns the number of observations.

    Attributes
    ----------
    observations: :class:`numpy.ndarray`
        The ``N x D`` profiles, standardized when :attr:`mean` is set.
    mean: :class:`numpy.ndarray` | :class:`None`
        The per-dimension mean removed by standardization.
    scale: :class:`numpy.ndarray` | :class:`None`
        The per-dimension scale divided out by standardization.
    owners: :class:`numpy.ndarray` | :class:`None`
        The agent owning every observation, once partitioned.
    labels: :class:`numpy.ndarray` | :class:`None`
        The planted component of every observation, synthetic data only.
    source: :class:`str`
        Where the observations came from.
    """

    __slots__ = ("observations", "mean", "scale", "owners", "labels", "source")

    def __init__(
        self,
        observations: np.ndarray,
        mean: np.ndarray | None = None,
        scale: np.ndarray | None = None,
        owners: np.ndarray | None = None,
        labels: np.ndarray | None = None,
        source: str = "memory",
    ):
        self.observations: np.ndarray = np.asarray(observations, dtype=float)
        self.mean: np.ndarray | None = mean
        self.scale: np.ndarray | None = scale
        self.owners: np.ndarray | None = None if owners is None else np.asarray(owners, dtype=int)
        self.labels: np.ndarray | None = labels
        self.source: str = source

        if self.owners is not None and self.owners.shape != (self.num_observations,):
            raise DimensionMismatch((self.num_observations,), self.owners.shape, "owners")

    @property
    def num_observations(self) -> int:
        """:class:`int`: The number of observations ``N``."""
        return self.observations.shape[0]

    @property
    def dim(self) -> int:
        """:class:`int`: The dimension ``D`` of every observation."""
        return self.observations.shape[1]

    @property
    def num_agents(self) -> int:
        """:class:`int`: The number of agents owning observations, 0 before partitioning."""
        return 0 if self.owners is None else int(self.owners.max(initial=-1)) + 1

    @property
    def standardized(self) -> bool:
        """:class:`bool`: Whether the observations were standardized."""
        return self.mean is not None

    def inverse_transform(self, values) -> np.ndarray:
        """Maps standardized values back to the original units."""
        values = np.asarray(values, dtype=float)

        if not self.standardized:
            return values.copy()

        return values * self.scale + self.mean

    def replace(self, **fields) -> "Dataset":
        """Returns a copy with some fields replaced."""
        values = {name: getattr(self, name) for name in self.__slots__}
        values.update(fields)
        return Dataset(**values)

    def agent_data(self, agent: int) -> np.ndarray:
        """Returns the observations owned by ``agent``."""
        return self.observations[self.owners == agent]

    def local_ids(self) -> np.ndarray:
        """Returns the position of every observation among its owner's observations."""
        ids = np.zeros(self.num_observations, dtype=int)

        for agent in range(self.num_agents):
            mask = self.owners == agent
            ids[mask] = np.arange(mask.sum())

        return ids

    def split(self) -> list[np.ndarray]:
        """Returns the observations of every agent, in agent order."""
        return [self.agent_data(agent) for agent in range(self.num_agents)]

    def __len__(self):
        return self.num_observations

    def __repr__(self):
        return (
            f"Dataset N={self.num_observations}, D={self.dim}, agents={self.num_agents}, "
            f"source={self.source}"
        )


DEFAULT_CONFIG: dict = {
    "recipe": Recipe.CLUSTER.value,
    "method": Method.KMEANS.value,
    "clusters": 6,
    "fuzziness": 2.0,
    "variant": Variant.PP_AAC.value,
    "sigma": 2.0,
    "beta": 0.2,
    "consensus_tol": 1e-12,
    "consensus_budget": 5000,
    "budget_mode": BudgetMode.TOLERANCE.value,
    "covariance_centre": CovarianceCentre.PREVIOUS.value,
    "stop_tol": 1e-6,
    "max_iterations": 300,
    "init": InitStrategy.PLUS_PLUS.value,
    "restarts": 10,
    "topology": "retailer",
    "topologies": [],
    "refuse_vulnerable": False,
    "agents": 10,
    "seed": 0,
    "data": None,
    "agent_files": [],
    "synthetic": {"components": 6, "per_component": 100, "dim": 48, "spread": 0.3},
    "partition": PartitionPolicy.EQUAL.value,
    "proportions": [],
    "standardize": Standardization.GLOBAL.value,
    "k_min": 2,
    "k_max": 10,
    "sweep_distributed": False,
    "rounds": 80,
    "observer": 0,
    "target": None,
    "local_agent": 0,
    "local_clusters": 6,
    "bytes_per_float": 4,
    "output": "results",
}

NAMED_TOPOLOGIES = ("retailer", "path", "cycle", "complete", "star")


def _choice(data: dict, field: str, enum):
    try:
        return enum(data[field])

    except ValueError:
        choices = ", ".join(member.value for member in enum)
        raise InvalidConfig(field, f"{data[field]!r} is not one of {choices}") from None


def _number(data: dict, field: str, kind, minimum=None, maximum=None, strict: bool = False):
    value = data[field]

    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidConfig(field, f"{value!r} is not a number")

    if kind is int and value != int(value):
        raise InvalidConfig(field, f"{value!r} is not an integer")

    value = kind(value)

    if minimum is not None and (value <= minimum if strict else value < minimum):
        raise InvalidConfig(field, f"{value!r} must be {'>' if strict else '>='} {minimum}")

    if maximum is not None and value >= maximum:
        raise InvalidConfig(field, f"{value!r} must be < {maximum}")

    return value


class ExperimentConfig:
    """Represents a validated experiment configuration.

    Built from the JSON configuration document. Missing keys take their value
    from :data:`DEFAULT_CONFIG` and unknown keys are rejected.

    Attributes
    ----------
    data: :class:`dict`
        The effective configuration document.
    recipe: :class:`.enums.Recipe`
        The experiment to run.
    method: :class:`.enums.Method`
        The clustering method.
    clusters: :class:`int`
        The number of clusters ``K``.
    fuzziness: :class:`float`
        The FCA fuzziness ``m``.
    variant: :class:`.enums.Variant`
        The consensus variant of the distributed runs.
    sigma: :class:`float`
        The disturbance width.
    beta: :class:`float`
        The disturbance decay.
    consensus_tol: :class:`float`
        The consensus tolerance, relative to the magnitude of the average.
    consensus_budget: :class:`int`
        The consensus round budget.
    budget_mode: :class:`.enums.BudgetMode`
        How the number of consensus rounds is decided.
    covariance_centre: :class:`.enums.CovarianceCentre`
        The centre of the gmm scatter matrices.
    stop_tol: :class:`float`
        The centroid displacement tolerance.
    max_iterations: :class:`int`
        The outer iteration budget.
    init: :class:`.enums.InitStrategy`
        How the public initial centroids are drawn.
    restarts: :class:`int`
        The seeded initializations tried for every ``K`` of the K sweep. The
        one with the best objective is kept.
    topology: :class:`str`
        A named topology or the path to a topology JSON document.
    topologies: list[:class:`str`]
        The topology JSON documents of the topology sweep, in order.
    refuse_vulnerable: :class:`bool`
        Whether agents refuse links under which masking can be defeated.
    agents: :class:`int`
        The number of agents of generated topologies.
    seed: :class:`int`
        The master seed.
    data_path: :class:`str` | :class:`None`
        The ``data`` field: a profile CSV, or ``None`` for synthetic profiles.
    agent_files: list[:class:`str`]
        One profile CSV per agent, for the ``by-file`` partition.
    synthetic: :class:`dict`
        The synthetic generator settings.
    partition: :class:`.enums.PartitionPolicy`
        How observations are split across agents.
    proportions: list[:class:`float`]
        The agent shares of the ``proportions`` partition.
    standardize: :class:`.enums.Standardization`
        How profiles are standardized.
    k_min: :class:`int`
        The smallest ``K`` of the K sweep.
    k_max: :class:`int`
        The largest ``K`` of the K sweep.
    sweep_distributed: :class:`bool`
        Whether the K sweep also runs the distributed algorithm.
    rounds: :class:`int`
        The fixed round count of the consensus comparison.
    observer: :class:`int`
        The curious agent of the attack.
    target: :class:`int` | :class:`None`
        The attacked neighbour, defaulting to the observer's first neighbour.
    local_agent: :class:`int`
        The agent of the local-vs-global comparison.
    local_clusters: :class:`int`
        The clusters the local agent fits on its own.
    bytes_per_float: :class:`int`
        The size of one transmitted float.
    output: :class:`str`
        The output directory.
    """

    __slots__ = (
        "data",
        "data_path",
        *(field for field in DEFAULT_CONFIG if field != "data"),
    )

    def __init__(self, data: dict | None = None):
        data = dict(data or {})
        unknown = sorted(set(data) - set(DEFAULT_CONFIG))

        if unknown:
            raise InvalidConfig(unknown[0], "unknown configuration field")

        effective = copy.deepcopy(DEFAULT_CONFIG)
        effective.update(data)
        self.data: dict = effective

        self.recipe: Recipe = _choice(effective, "recipe", Recipe)
        self.method: Method = _choice(effective, "method", Method)
        self.clusters: int = _number(effective, "clusters", int, 1)
        self.fuzziness: float = _number(effective, "fuzziness", float, 1, strict=True)
        self.variant: Variant = _choice(effective, "variant", Variant)
        self.sigma: float = _number(effective, "sigma", float, 0, strict=True)
        self.beta: float = _number(effective, "beta", float, 0, 1)
        self.consensus_tol: float = _number(effective, "consensus_tol", float, 0, strict=True)
        self.consensus_budget: int = _number(effective, "consensus_budget", int, 1)
        self.budget_mode: BudgetMode = _choice(effective, "budget_mode", BudgetMode)
        self.covariance_centre: CovarianceCentre = _choice(
            effective, "covariance_centre", CovarianceCentre
        )
        self.stop_tol: float = _number(effective, "stop_tol", float, 0, strict=True)
        self.max_iterations: int = _number(effective, "max_iterations", int, 1)
        self.init: InitStrategy = _choice(effective, "init", InitStrategy)
        self.restarts: int = _number(effective, "restarts", int, 1)
        self.topology: str = str(effective["topology"])
        self.topologies: list[str] = [str(path) for path in effective["topologies"]]
        self.refuse_vulnerable: bool = bool(effective["refuse_vulnerable"])
        self.agents: int = _number(effective, "agents", int, 1)
        self.seed: int = _number(effective, "seed", int, 0)
        self.data_path: str | None = effective["data"]
        self.agent_files: list[str] = [str(path) for path in effective["agent_files"]]
        self.synthetic: dict = dict(effective["synthetic"])
        self.partition: PartitionPolicy = _choice(effective, "partition", PartitionPolicy)
        self.proportions: list[float] = [float(share) for share in effective["proportions"]]
        self.standardize: Standardization = _choice(effective, "standardize", Standardization)
        self.k_min: int = _number(effective, "k_min", int, 2)
        self.k_max: int = _number(effective, "k_max", int, self.k_min)
        self.sweep_distributed: bool = bool(effective["sweep_distributed"])
        self.rounds: int = _number(effective, "rounds", int, 1)
        self.observer: int = _number(effective, "observer", int, 0)
        self.target: int | None = (
            None if effective["target"] is None else _number(effective, "target", int, 0)
        )
        self.local_agent: int = _number(effective, "local_agent", int, 0)
        self.local_clusters: int = _number(effective, "local_clusters", int, 1)
        self.bytes_per_float: int = _number(effective, "bytes_per_float", int, 1)
        self.output: str = str(effective["output"])

        self._validate()

    def _validate(self) -> None:
        if self.topology not in NAMED_TOPOLOGIES and not self.topology.endswith(".json"):
            raise InvalidConfig(
                "topology", f"{self.topology!r} is neither a named topology nor a JSON file"
            )

        if self.partition == PartitionPolicy.PROPORTIONS:
            if len(self.proportions) != self.agents:
                raise InvalidConfig("proportions", f"{self.agents} shares are required")

            if any(share < 0 for share in self.proportions) or not np.isclose(
                sum(self.proportions), 1.0
            ):
                raise InvalidConfig("proportions", "shares must be nonnegative and sum to 1")

        if self.partition == PartitionPolicy.BY_FILE and not self.agent_files:
            raise InvalidConfig("agent_files", "the by-file partition needs one file per agent")

        unknown = sorted(set(self.synthetic) - set(DEFAULT_CONFIG["synthetic"]))

        if unknown:
            raise InvalidConfig("synthetic", f"unknown field {unknown[0]!r}")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        """Loads a JSON configuration document, applying the non-``None`` overrides."""
        with open(path, "r") as f:
            data = json.load(f)

        data.update({key: value for key, value in overrides.items() if value is not None})
        return cls(data)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Returns a copy with the non-``None`` overrides applied."""
        data = copy.deepcopy(self.data)
        data.update({key: value for key, value in overrides.items() if value is not None})
        return ExperimentConfig(data)

    def to_dict(self) -> dict:
        """:class:`dict`: The effective configuration document."""
        return copy.deepcopy(self.data)

    def __repr__(self):
        return (
            f"ExperimentConfig recipe={self.recipe.value}, method={self.method.value}, "
            f"K={self.clusters}, seed={self.seed}"
        )


class ExperimentReport:
    """Represents the outcome of one experiment recipe.

    Attributes
    ----------
    recipe: :class:`.enums.Recipe`
        The recipe that produced the report.
    config: :class:`ExperimentConfig`
        The configuration the recipe ran with.
    results: :class:`dict`
        The JSON-ready results.
    tables: dict[:class:`str`, :class:`pandas.DataFrame`]
        The plot-ready tables, written as ``<name>.csv``.
    passed: :class:`bool`
        Whether the checks of the recipe held.
    """

    __slots__ = ("recipe", "config", "results", "tables", "passed")

    def __init__(
        self,
        recipe: Recipe,
        config: ExperimentConfig,
        results: dict,
        tables: dict[str, pd.DataFrame] | None = None,
        passed: bool = True,
    ):
        self.recipe: Recipe = recipe
        self.config: ExperimentConfig = config
        self.results: dict = results
        self.tables: dict[str, pd.DataFrame] = tables or {}
        self.passed: bool = passed

    def to_dict(self) -> dict:
        """:class:`dict`: The content of ``report.json``."""
        return {
            "recipe": self.recipe.value,
            "passed": self.passed,
            "config": self.config.to_dict(),
            "results": self.results,
            "tables": sorted(self.tables),
        }

    def __repr__(self):
        return f"ExperimentReport recipe={self.recipe.value}, passed={self.passed}"
