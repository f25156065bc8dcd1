import logging

import numpy as np
import pandas as pd
from scipy.stats import spearmanr
from sklearn.metrics import adjusted_rand_score

from .clustering import (
    cluster_centralized,
    cluster_distributed,
    hard_assignments,
    initial_centroids,
    initial_model,
    local_summaries,
    local_vs_global,
    pack_summary,
    soft_assignments,
)
from .consensus import convergence_curve, run_consensus, run_with_config, tail_slope
from .enums import BudgetMode, CovarianceCentre, Method, Recipe, Standardization, Variant
from .errors import (
    ConsensusClusterException,
    DegenerateClustering,
    EquivalenceFailure,
    InvalidConfig,
    InvalidParameter,
    RecipeFailed,
)
from .loader import (
    default_components,
    distributed_standardize,
    load_agent_files,
    load_profiles,
    partition,
    standardize,
    synth_profiles,
)
from .metrics import elbow, fca_objective, gmm_log_likelihood, record_telemetry, silhouette, sse
from .objects.clustering import ClusterModel, StopRule
from .objects.consensus import ConsensusConfig, DisturbanceParams
from .objects.experiment import Dataset, ExperimentConfig, ExperimentReport
from .objects.topology import Topology
from .privacy import attack_run
from .report import write_manifest, write_report
from .topology import (
    average_augmented_degree,
    complete_topology,
    cycle_topology,
    load_topology,
    metropolis_weights,
    nested_topologies,
    path_topology,
    refuse_vulnerable_links,
    retailer_topology,
    spectral_summary,
    star_topology,
    vulnerable_pairs,
)
from .utils import MISSING, spawn_seeds

__all__ = (
    "EQUIVALENCE_TOLERANCE",
    "ExperimentHarness",
    "run_experiment",
)

logger = logging.getLogger(__name__)

EQUIVALENCE_TOLERANCE = 1e-6

_GENERATED_TOPOLOGIES = {
    "path": path_topology,
    "cycle": cycle_topology,
    "complete": complete_topology,
    "star": star_topology,
}


class ExperimentHarness:
    """Runs the experiment recipes of one configuration.

    Topologies, the partitioned dataset and the public initial model are built
    once and shared between the steps of a recipe.

    Attributes
    ----------
    config: :class:`.objects.experiment.ExperimentConfig`
        The validated configuration.
    """

    def __init__(self, config: ExperimentConfig):
        self.config: ExperimentConfig = config
        self.__cache: _ExperimentCache = _ExperimentCache()

    @property
    def stop_rule(self) -> StopRule:
        """:class:`.objects.clustering.StopRule`: The public outer stop rule."""
        return StopRule(self.config.stop_tol, self.config.max_iterations)

    @property
    def disturbance(self) -> DisturbanceParams:
        """:class:`.objects.consensus.DisturbanceParams`: The configured disturbance."""
        return DisturbanceParams(self.config.sigma, self.config.beta, self.config.seed)

    def consensus_config(
        self, variant: Variant | None = None, keep_trajectory: bool = False
    ) -> ConsensusConfig:
        """Returns how the configured consensus runs are executed.

        The tolerance is relative to the magnitude of the average because the
        packed local results grow with the number of observations.
        """
        variant = variant or self.config.variant
        return ConsensusConfig(
            variant,
            self.config.consensus_tol,
            self.config.consensus_budget,
            self.config.budget_mode,
            relative_tol=True,
            keep_trajectory=keep_trajectory,
            params=self.disturbance if variant.is_private else None,
        )

    def topology(self) -> Topology:
        """Builds the configured communication graph."""
        if self.__cache.topology is not MISSING:
            return self.__cache.topology

        name = self.config.topology

        if name == "retailer":
            topology = retailer_topology()

        elif name in _GENERATED_TOPOLOGIES:
            topology = _GENERATED_TOPOLOGIES[name](self.config.agents)

        else:
            topology = load_topology(name)

        if self.config.refuse_vulnerable:
            topology = refuse_vulnerable_links(topology)

        logger.info("Using topology %s: %r.", name, topology)
        self.__cache.topology = topology
        return topology

    def raw_dataset(self) -> Dataset:
        """Loads or generates the profiles, standardized globally when configured."""
        if self.__cache.raw_dataset is not MISSING:
            return self.__cache.raw_dataset

        config = self.config

        if config.agent_files:
            dataset = load_agent_files(config.agent_files, config.standardize)

        elif config.data_path is not None:
            dataset = load_profiles(config.data_path, config.standardize)

        else:
            synthetic = config.synthetic
            components = default_components(
                synthetic.get("components", 6),
                synthetic.get("per_component", 100),
                synthetic.get("spread", 0.3),
            )
            dataset = synth_profiles(components, synthetic.get("dim", 48), config.seed)

            if config.standardize == Standardization.GLOBAL:
                dataset = standardize(dataset)

        self.__cache.raw_dataset = dataset
        return dataset

    def dataset(self, topology: Topology | None = None) -> Dataset:
        """Returns the profiles partitioned across the agents of ``topology``.

        Defaults to the configured topology. With ``distributed``
        standardization the agents standardize their rows by consensus once
        partitioned.
        """
        topology = topology or self.topology()
        cached = self.__cache.datasets.get(topology.num_agents)

        if cached is not None:
            return cached

        dataset = self.raw_dataset()
        owners = partition(dataset, topology.num_agents, self.config.partition, self.config.proportions)
        dataset = dataset.replace(owners=owners)

        if self.config.standardize == Standardization.DISTRIBUTED:
            config = self.consensus_config(Variant.PP_AAC if self.config.variant.is_private else Variant.AAC)
            dataset = distributed_standardize(dataset, topology, config)

        self.__cache.datasets[topology.num_agents] = dataset
        return dataset

    def initial_model(
        self,
        num_clusters: int | None = None,
        data: np.ndarray | None = None,
        seed: int | np.random.SeedSequence | None = None,
    ) -> ClusterModel:
        """Returns the public initial model, drawn from the pooled profiles."""
        num_clusters = num_clusters or self.config.clusters
        data = self.dataset().observations if data is None else data
        seed = self.config.seed if seed is None else seed
        variance = float(np.mean(np.var(data, axis=0))) or 1.0
        centroids = initial_centroids(data, num_clusters, seed, self.config.init)
        return initial_model(self.config.method, centroids, variance, self.config.fuzziness)

    def _packed_states(self, topology: Topology, dataset: Dataset) -> tuple[np.ndarray, list]:
        method = self.config.method
        model = self.initial_model(data=dataset.observations)
        scatter = method == Method.GMM and self.config.covariance_centre == CovarianceCentre.PREVIOUS
        summaries = [
            local_summaries(method, dataset.agent_data(agent), model, scatter)
            for agent in range(topology.num_agents)
        ]
        return np.vstack([pack_summary(summary) for summary in summaries]), summaries

    def run(self) -> ExperimentReport:
        """Runs the configured recipe.

        Raises
        ------
        RecipeFailed
            If any step of the recipe fails. The cause is attached.
        """
        recipe = self.config.recipe
        logger.info("Running the %s recipe with %r.", recipe.value, self.config)

        try:
            report = getattr(self, recipe.value.replace("-", "_"))()

        except ConsensusClusterException as exception:
            self.on_exception(exception)
            raise RecipeFailed(recipe.value, exception) from exception

        self.on_report(report)
        return report

    def consensus_compare(self) -> ExperimentReport:
        """Runs the four consensus variants for the same fixed number of rounds
        on scalar agent states and records their error curves."""
        topology = self.topology()
        rng = np.random.default_rng(self.config.seed)
        states = rng.uniform(0.0, 10.0, (topology.num_agents, 1))
        results = {"spectral": spectral_summary(metropolis_weights(topology)).to_dict(), "variants": {}}
        curves = []
        trajectory = None

        for variant in Variant:
            run = run_consensus(
                variant,
                topology,
                states,
                self.disturbance if variant.is_private else None,
                self.config.consensus_tol,
                self.config.rounds,
                budget_mode=BudgetMode.RADIUS,
            )
            curve = convergence_curve(run)
            summary = run.to_dict()

            try:
                summary["tail_slope"] = tail_slope(curve)

            except InvalidParameter:
                summary["tail_slope"] = None

            results["variants"][variant.value] = summary
            curves.append(
                pd.DataFrame(
                    {
                        "variant": variant.value,
                        "round": np.arange(len(curve)),
                        "mean_error": curve,
                        "max_error": run.max_errors,
                    }
                )
            )

            if variant == Variant.PP_AAC:
                trajectory = run.to_frame()

        private, exact = results["variants"]["pp-aac"], results["variants"]["pp-ac"]
        results["pp_aac_faster"] = private["final_mean_error"] < exact["final_mean_error"]
        tables = {"curves": pd.concat(curves, ignore_index=True), "trajectory": trajectory}
        return ExperimentReport(Recipe.CONSENSUS_COMPARE, self.config, results, tables)

    def _assignment_table(self, dataset: Dataset, models: list[ClusterModel]) -> tuple[pd.DataFrame, np.ndarray]:
        method = self.config.method
        num_clusters = models[0].num_clusters
        labels = np.zeros(dataset.num_observations, dtype=int)
        memberships = np.zeros((dataset.num_observations, num_clusters))

        for agent, model in enumerate(models):
            mask = dataset.owners == agent

            if mask.any():
                labels[mask] = hard_assignments(method, dataset.observations[mask], model)
                memberships[mask] = soft_assignments(method, dataset.observations[mask], model)

        table = pd.DataFrame(
            {
                "observation": np.arange(dataset.num_observations),
                "agent": dataset.owners,
                "local_id": dataset.local_ids(),
                "cluster": labels,
            }
        )

        for k in range(num_clusters):
            table[f"membership_{k}"] = memberships[:, k]

        if dataset.labels is not None:
            table["planted"] = dataset.labels

        return table, labels

    def _quality(self, dataset: Dataset, model: ClusterModel, labels: np.ndarray) -> dict:
        quality = {"sse": sse(dataset.observations, model.centroids, labels)}

        try:
            quality["sci"] = silhouette(dataset.observations, labels)

        except DegenerateClustering:
            quality["sci"] = None

        if dataset.labels is not None:
            quality["planted_agreement"] = float(adjusted_rand_score(dataset.labels, labels))

        return quality

    def _distributed(self, dataset: Dataset, init: ClusterModel, topology: Topology):
        return cluster_distributed(
            self.config.method,
            topology,
            dataset.split(),
            init,
            self.consensus_config(),
            self.stop_rule,
            centre=self.config.covariance_centre,
        )

    def cluster(self) -> ExperimentReport:
        """Clusters the partitioned profiles without pooling them."""
        topology = self.topology()
        dataset = self.dataset()
        models, iterations, runs = self._distributed(dataset, self.initial_model(), topology)
        telemetry = record_telemetry(topology, runs, iterations, self.config.bytes_per_float)
        assignments, labels = self._assignment_table(dataset, models)
        disagreement = max(
            float(np.max(np.abs(model.centroids - models[0].centroids))) for model in models
        )

        results = {
            "iterations": iterations,
            "consensus_rounds": [run.rounds for run in runs],
            "agent_disagreement": disagreement,
            "model": models[0].to_dict(),
            "profiles": dataset.inverse_transform(models[0].centroids).tolist(),
            "telemetry": telemetry.to_dict(),
            **self._quality(dataset, models[0], labels),
        }
        tables = {"assignments": assignments, "telemetry": telemetry.to_frame()}
        return ExperimentReport(Recipe.CLUSTER, self.config, results, tables)

    def compare_centralized(self) -> ExperimentReport:
        """Runs the centralized and the distributed algorithm from the same
        public initial model and checks that they agree."""
        topology = self.topology()
        dataset = self.dataset()
        init = self.initial_model()
        central, central_iterations = cluster_centralized(
            self.config.method,
            dataset.observations,
            init,
            self.stop_rule,
            centre=self.config.covariance_centre,
        )
        models, iterations, runs = self._distributed(dataset, init, topology)
        discrepancy = max(
            float(np.max(np.abs(model.centroids - central.centroids))) for model in models
        )
        passed = discrepancy <= EQUIVALENCE_TOLERANCE and iterations == central_iterations

        central_labels = hard_assignments(self.config.method, dataset.observations, central)
        assignments, labels = self._assignment_table(dataset, models)
        assignments["centralized_cluster"] = central_labels
        telemetry = record_telemetry(topology, runs, iterations, self.config.bytes_per_float)

        results = {
            "discrepancy": discrepancy,
            "tolerance": EQUIVALENCE_TOLERANCE,
            "centralized": {
                "iterations": central_iterations,
                **self._quality(dataset, central, central_labels),
            },
            "distributed": {
                "iterations": iterations,
                "consensus_rounds": [run.rounds for run in runs],
                **self._quality(dataset, models[0], labels),
            },
            "telemetry": telemetry.to_dict(),
        }
        logger.info(
            "Centralized and distributed %s differ by %s after %s and %s iterations.",
            self.config.method.value,
            discrepancy,
            central_iterations,
            iterations,
        )
        tables = {"assignments": assignments, "telemetry": telemetry.to_frame()}
        return ExperimentReport(Recipe.COMPARE_CENTRALIZED, self.config, results, tables, passed)

    def _objective(self, data: np.ndarray, model: ClusterModel) -> float:
        if self.config.method == Method.FCA:
            return fca_objective(data, model)

        if self.config.method == Method.GMM:
            return -gmm_log_likelihood(data, model)

        return sse(data, model.centroids)

    def best_start(self, num_clusters: int) -> tuple[ClusterModel, ClusterModel, int]:
        """Clusters the pooled profiles from ``restarts`` seeded initial models
        and keeps the run with the best objective.

        Returns
        -------
        tuple[:class:`.objects.clustering.ClusterModel`, :class:`.objects.clustering.ClusterModel`, :class:`int`]
            The kept initial model, its fitted model and its iteration count.
        """
        data = self.dataset().observations
        best = None

        for seed in spawn_seeds((self.config.seed, num_clusters), self.config.restarts):
            init = self.initial_model(num_clusters, seed=seed)
            model, iterations = cluster_centralized(
                self.config.method, data, init, self.stop_rule, centre=self.config.covariance_centre
            )
            objective = self._objective(data, model)

            if best is None or objective < best[0]:
                best = (objective, init, model, iterations)

        logger.debug("Best of %s starts at K=%s: objective %s.", self.config.restarts, num_clusters, best[0])
        return best[1:]

    def ksweep(self) -> ExperimentReport:
        """Clusters the profiles for every ``K`` of the sweep and locates the
        elbow of the SSE curve."""
        topology = self.topology()
        dataset = self.dataset()
        rows = []

        for num_clusters in range(self.config.k_min, self.config.k_max + 1):
            init, model, iterations = self.best_start(num_clusters)
            labels = hard_assignments(self.config.method, dataset.observations, model)
            row = {"k": num_clusters, "iterations": iterations, **self._quality(dataset, model, labels)}

            if self.config.sweep_distributed:
                models, distributed_iterations, _ = self._distributed(dataset, init, topology)
                _, distributed_labels = self._assignment_table(dataset, models)
                distributed = self._quality(dataset, models[0], distributed_labels)
                row["distributed_iterations"] = distributed_iterations
                row["distributed_sse"] = distributed["sse"]
                row["distributed_sci"] = distributed["sci"]

            logger.debug("K sweep at K=%s: %s", num_clusters, row)
            rows.append(row)

        curves = pd.DataFrame(rows)
        ks = curves["k"].tolist()
        results = {
            "rows": rows,
            "elbow": elbow(ks, curves["sse"]) if len(ks) >= 3 else None,
        }
        return ExperimentReport(Recipe.KSWEEP, self.config, results, {"curves": curves})

    def sweep_topologies(self) -> list[Topology]:
        """Returns the topology sequence of the sweep: the configured files, or
        the nested sequence on the configured number of agents."""
        if self.config.topologies:
            return [load_topology(path) for path in self.config.topologies]

        return nested_topologies(self.config.agents)

    def topology_sweep(self) -> ExperimentReport:
        """Measures the consensus rounds of the first clustering iteration on
        every topology of the sweep."""
        rows = []

        for index, topology in enumerate(self.sweep_topologies()):
            dataset = self.dataset(topology)
            states, _ = self._packed_states(topology, dataset)
            spectral = spectral_summary(metropolis_weights(topology))
            run = run_with_config(self.consensus_config(), topology, states)
            rows.append(
                {
                    "topology": index,
                    "agents": topology.num_agents,
                    "edges": len(topology.edges),
                    "augmented_degree": average_augmented_degree(topology),
                    "lambda_2": spectral.lambda_2,
                    "lambda_m": spectral.lambda_m,
                    "alpha": spectral.alpha_opt,
                    "radius_gap": spectral.radius_gap,
                    "rounds": run.rounds,
                }
            )
            logger.info("Topology %s: %s rounds, radius gap %s.", index, run.rounds, spectral.radius_gap)

        curves = pd.DataFrame(rows)
        correlation = None

        if len(rows) > 1 and curves["rounds"].nunique() > 1 and curves["radius_gap"].nunique() > 1:
            correlation = float(spearmanr(curves["radius_gap"], curves["rounds"])[0])

        rounds = curves["rounds"].to_numpy()
        results = {
            "rows": rows,
            "spearman": correlation,
            "rounds_nonincreasing": bool(np.all(np.diff(rounds) <= 0)),
        }
        return ExperimentReport(Recipe.TOPOLOGY_SWEEP, self.config, results, {"curves": curves})

    def attack(self) -> ExperimentReport:
        """Plays an honest-but-curious agent against a neighbour, once under the
        configured variant and once under unmasked accelerated consensus."""
        topology = self.topology()
        dataset = self.dataset()
        observer = self.config.observer

        if observer >= topology.num_agents:
            raise InvalidConfig("observer", f"agent {observer} is not in the topology")

        target = self.config.target

        if target is None:
            target = min(topology.neighbours(observer))

        states, summaries = self._packed_states(topology, dataset)
        results = {"vulnerable_pairs": [list(pair) for pair in vulnerable_pairs(topology)], "views": {}}
        frames = []

        for variant in dict.fromkeys((self.config.variant, Variant.AAC)):
            run = run_with_config(self.consensus_config(variant, keep_trajectory=True), topology, states)
            view = attack_run(run, topology, observer, target, summaries[target])
            results["views"][variant.value] = {**view.to_dict(), "run": run.to_dict()}
            frame = run.to_frame()
            frames.append(frame[frame["agent"] == target].assign(variant=variant.value))

        results["observer"], results["target"] = observer, target
        tables = {"shares": pd.concat(frames, ignore_index=True)}
        return ExperimentReport(Recipe.ATTACK, self.config, results, tables)

    def local_vs_global(self) -> ExperimentReport:
        """Compares one agent's own clustering with the clustering of the union."""
        dataset = self.dataset()
        agent = self.config.local_agent

        if agent >= dataset.num_agents:
            raise InvalidConfig("local_agent", f"agent {agent} owns no observation")

        global_model, iterations = cluster_centralized(
            self.config.method,
            dataset.observations,
            self.initial_model(),
            self.stop_rule,
            centre=self.config.covariance_centre,
        )
        comparison = local_vs_global(
            dataset.agent_data(agent),
            global_model,
            self.config.local_clusters,
            self.config.seed,
            self.stop_rule,
            self.config.init,
        )
        distances = pd.DataFrame(
            [
                {"global_cluster": k, "local_cluster": j, "distance": comparison.distances[k, j]}
                for k in range(comparison.distances.shape[0])
                for j in range(comparison.distances.shape[1])
            ]
        )
        results = {
            "agent": agent,
            "global_iterations": iterations,
            "global_model": global_model.to_dict(),
            "comparison": comparison.to_dict(),
        }
        return ExperimentReport(Recipe.LOCAL_VS_GLOBAL, self.config, results, {"curves": distances})

    def on_report(self, report: ExperimentReport) -> None:
        """This method is called when a recipe finishes.
        You can overwrite this method to do what you want with the report.
        """

    def on_exception(self, exception: Exception) -> None:
        """This method is called when a recipe fails.
        You can overwrite this method to do what you want with the exception.
        By default, an exception message is logged.
        """
        logger.exception(exception)


class _ExperimentCache:
    def __init__(self):
        self.topology: Topology = MISSING
        self.raw_dataset: Dataset = MISSING
        self.datasets: dict[int, Dataset] = {}


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Runs the configured recipe and writes its report.

    Parameters
    ----------
    config: :class:`.objects.experiment.ExperimentConfig`
        The validated configuration.
    write: :class:`bool`
        Whether ``report.json``, the tables and ``manifest.json`` are written to
        the output directory.

    Returns
    -------
    :class:`.objects.experiment.ExperimentReport`
        The report.

    Raises
    ------
    RecipeFailed
        If the recipe fails, or if the centralized comparison finds that the
        two algorithms disagree. The report is written first in that case.
    """
    report = ExperimentHarness(config).run()

    if write:
        paths = write_report(report, config.output)
        write_manifest(report, config.output, paths)

    if report.recipe == Recipe.COMPARE_CENTRALIZED and not report.passed:
        results = report.results
        failure = EquivalenceFailure(
            results["discrepancy"],
            results["centralized"]["iterations"],
            results["distributed"]["iterations"],
        )
        raise RecipeFailed(report.recipe.value, failure) from failure

    return report
