"""Command line entry point of the experiment harness."""

import logging

import click

from .enums import (
    BudgetMode,
    CovarianceCentre,
    InitStrategy,
    Method,
    PartitionPolicy,
    Recipe,
    Standardization,
    Variant,
)
from .errors import ConsensusClusterException
from .harness import run_experiment
from .objects.experiment import ExperimentConfig

logger = logging.getLogger(__name__)


def _values(enum) -> click.Choice:
    return click.Choice([member.value for member in enum])


_OPTIONS = (
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON configuration file."),
    click.option("--verbose", "-v", is_flag=True, help="Log every consensus round and outer iteration."),
    click.option("--method", type=_values(Method), default=None, help="Clustering method."),
    click.option("--clusters", "-k", type=int, default=None, help="Number of clusters."),
    click.option("--fuzziness", type=float, default=None, help="FCA fuzziness m > 1."),
    click.option("--variant", type=_values(Variant), default=None, help="Consensus variant."),
    click.option("--sigma", type=float, default=None, help="Disturbance width."),
    click.option("--beta", type=float, default=None, help="Disturbance decay in [0, 1)."),
    click.option("--consensus-tol", type=float, default=None, help="Consensus tolerance, relative to the average."),
    click.option("--consensus-budget", type=int, default=None, help="Consensus round budget."),
    click.option("--budget-mode", type=_values(BudgetMode), default=None, help="How consensus rounds are decided."),
    click.option("--covariance-centre", type=_values(CovarianceCentre), default=None, help="Centre of the gmm scatter matrices."),
    click.option("--stop-tol", type=float, default=None, help="Centroid displacement tolerance."),
    click.option("--max-iterations", type=int, default=None, help="Outer iteration budget."),
    click.option("--init", type=_values(InitStrategy), default=None, help="How initial centroids are drawn."),
    click.option("--restarts", type=int, default=None, help="Initial models tried per K of the sweep."),
    click.option("--topology", default=None, help="retailer, path, cycle, complete, star or a topology JSON file."),
    click.option("--topologies", multiple=True, help="Topology JSON files of the sweep, in order."),
    click.option("--refuse-vulnerable/--keep-vulnerable", default=None, help="Drop links under which masking can be defeated."),
    click.option("--agents", type=int, default=None, help="Number of agents of generated topologies."),
    click.option("--seed", type=int, default=None, help="Master seed."),
    click.option("--data", type=click.Path(exists=True, dir_okay=False), default=None, help="Profile CSV file."),
    click.option("--agent-files", multiple=True, help="One profile CSV file per agent."),
    click.option("--partition", type=_values(PartitionPolicy), default=None, help="How profiles are split across agents."),
    click.option("--proportions", type=float, multiple=True, help="Agent shares of the proportions partition."),
    click.option("--standardize", type=_values(Standardization), default=None, help="How profiles are standardized."),
    click.option("--k-min", type=int, default=None, help="Smallest K of the sweep."),
    click.option("--k-max", type=int, default=None, help="Largest K of the sweep."),
    click.option("--sweep-distributed/--sweep-centralized", default=None, help="Also run the distributed sweep."),
    click.option("--rounds", type=int, default=None, help="Rounds of the consensus comparison."),
    click.option("--observer", type=int, default=None, help="Curious agent of the attack."),
    click.option("--target", type=int, default=None, help="Attacked neighbour."),
    click.option("--local-agent", type=int, default=None, help="Agent of the local-vs-global comparison."),
    click.option("--local-clusters", type=int, default=None, help="Clusters the local agent fits alone."),
    click.option("--bytes-per-float", type=int, default=None, help="Size of one transmitted float."),
    click.option("--output", "-o", type=click.Path(file_okay=False), default=None, help="Output directory."),
)


def experiment_options(command):
    """Adds a flag for every configuration field to ``command``."""
    for option in reversed(_OPTIONS):
        command = option(command)

    return command


def build_config(recipe: Recipe, config_path: str | None, overrides: dict) -> ExperimentConfig:
    """Builds the configuration of ``recipe`` from the file and the given flags.

    Flags left unset, and empty repeated flags, keep the file's values.
    """
    overrides = {
        field: list(value) if isinstance(value, tuple) else value
        for field, value in overrides.items()
        if value is not None and value != ()
    }
    overrides["recipe"] = recipe.value

    if config_path is not None:
        return ExperimentConfig.from_file(config_path, **overrides)

    return ExperimentConfig(overrides)


def _run(recipe: Recipe, config_path: str | None, verbose: bool, overrides: dict) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = build_config(recipe, config_path, overrides)
        report = run_experiment(config)

    except ConsensusClusterException as exception:
        raise click.ClickException(str(exception)) from exception

    click.echo(f"{recipe.value}: {'passed' if report.passed else 'failed'}, written to {config.output}")


@click.group()
@click.version_option(package_name="ConsensusCluster.py")
def main():
    """Privacy-preserving distributed clustering experiments."""


@main.command("consensus-compare")
@experiment_options
def consensus_compare(config_path, verbose, **overrides):
    """Compare the error curves of the four consensus variants."""
    _run(Recipe.CONSENSUS_COMPARE, config_path, verbose, overrides)


@main.command()
@experiment_options
def cluster(config_path, verbose, **overrides):
    """Cluster partitioned profiles without pooling them."""
    _run(Recipe.CLUSTER, config_path, verbose, overrides)


@main.command("compare-centralized")
@experiment_options
def compare_centralized(config_path, verbose, **overrides):
    """Check that distributed and centralized clustering agree."""
    _run(Recipe.COMPARE_CENTRALIZED, config_path, verbose, overrides)


@main.command()
@experiment_options
def ksweep(config_path, verbose, **overrides):
    """Sweep the number of clusters and locate the SSE elbow."""
    _run(Recipe.KSWEEP, config_path, verbose, overrides)


@main.command("topology-sweep")
@experiment_options
def topology_sweep(config_path, verbose, **overrides):
    """Measure consensus rounds against the spectral radius gap of topologies."""
    _run(Recipe.TOPOLOGY_SWEEP, config_path, verbose, overrides)


@main.command()
@experiment_options
def attack(config_path, verbose, **overrides):
    """Play an honest-but-curious agent against a neighbour."""
    _run(Recipe.ATTACK, config_path, verbose, overrides)


@main.command("local-vs-global")
@experiment_options
def local_vs_global(config_path, verbose, **overrides):
    """Compare one agent's own clustering with the clustering of the union."""
    _run(Recipe.LOCAL_VS_GLOBAL, config_path, verbose, overrides)
