import csv
import logging
import math
from pathlib import Path

import numpy as np
from sklearn.preprocessing import StandardScaler

from .consensus import run_with_config
from .enums import PartitionPolicy, Standardization
from .errors import (
    DimensionMismatch,
    EmptyDataset,
    InfeasiblePolicy,
    InvalidParameter,
    NonFiniteValue,
    ParseError,
    RaggedRows,
)
from .objects.consensus import ConsensusConfig
from .objects.experiment import Dataset
from .objects.topology import Topology

__all__ = (
    "DAILY_PEAK_SHAPES",
    "PROFILE_SHAPES",
    "load_profiles",
    "load_agent_files",
    "standardize",
    "distributed_standardize",
    "profile_template",
    "default_components",
    "synth_profiles",
    "partition",
)

logger = logging.getLogger(__name__)

# Single-peak shapes four hours apart, so that every pair of neighbours in the
# day is equally far apart.
DAILY_PEAK_SHAPES = (
    "night",
    "morning-peak",
    "late-morning",
    "afternoon",
    "evening-peak",
    "late-evening",
)

PROFILE_SHAPES = (*DAILY_PEAK_SHAPES, "flat", "double-peak")

# (base load, [(peak hour, height, width in hours), ...]) in kW.
_SHAPE_PEAKS = {
    "night": (0.3, [(3.0, 1.5, 1.5)]),
    "morning-peak": (0.3, [(7.0, 1.5, 1.5)]),
    "late-morning": (0.3, [(11.0, 1.5, 1.5)]),
    "afternoon": (0.3, [(15.0, 1.5, 1.5)]),
    "evening-peak": (0.3, [(19.0, 1.5, 1.5)]),
    "late-evening": (0.3, [(23.0, 1.5, 1.5)]),
    "flat": (0.9, []),
    "double-peak": (0.3, [(7.0, 1.2, 1.5), (19.0, 1.2, 1.5)]),
}


def _parse_cell(path: str, row: int, column: int, cell: str) -> float:
    try:
        value = float(cell.strip())

    except ValueError:
        raise ParseError(path, row, column, cell) from None

    if not math.isfinite(value):
        raise NonFiniteValue(path, row, column)

    return value


def _is_header(cells: list[str]) -> bool:
    for cell in cells:
        try:
            float(cell.strip())

        except ValueError:
            continue

        return False

    return True


def _read_matrix(path: str | Path) -> np.ndarray:
    path = str(path)
    rows: list[list[float]] = []
    width = None

    with open(path, "r", newline="") as f:
        for number, cells in enumerate(csv.reader(f), start=1):
            if not any(cell.strip() for cell in cells):
                continue

            if width is None and not rows and _is_header(cells):
                logger.debug("Skipping the header of %s.", path)
                continue

            if width is None:
                width = len(cells)

            elif len(cells) != width:
                raise RaggedRows(path, number, width, len(cells))

            rows.append(
                [_parse_cell(path, number, column, cell) for column, cell in enumerate(cells, start=1)]
            )

    if not rows:
        raise EmptyDataset(path)

    return np.array(rows, dtype=float)


def standardize(dataset: Dataset) -> Dataset:
    """Standardizes every dimension to zero mean and unit variance.

    The mean and scale are recorded on the returned dataset so
    :meth:`.objects.experiment.Dataset.inverse_transform` can undo it. Constant
    dimensions are only centred.
    """
    scaler = StandardScaler().fit(dataset.observations)
    constant = np.flatnonzero(scaler.var_ == 0)

    if constant.size:
        logger.warning(
            "Dimensions %s of %s have zero variance and are only centred.",
            constant.tolist(),
            dataset.source,
        )

    return dataset.replace(
        observations=scaler.transform(dataset.observations),
        mean=scaler.mean_.copy(),
        scale=scaler.scale_.copy(),
    )


def load_profiles(
    path: str | Path, standardization: Standardization = Standardization.GLOBAL
) -> Dataset:
    """Loads consumption profiles from a CSV file.

    Every row is one profile and every column one time slot. A first row in
    which no cell is a number is treated as a header.

    Parameters
    ----------
    path: :class:`str` | :class:`pathlib.Path`
        The CSV file.
    standardization: :class:`.enums.Standardization`
        ``global`` standardizes the loaded profiles. ``distributed`` leaves them
        raw, to be standardized by consensus once they are partitioned.

    Returns
    -------
    :class:`.objects.experiment.Dataset`
        The profiles.

    Raises
    ------
    ParseError
        If a cell is not a number. Rows and columns are counted from 1.
    NonFiniteValue
        If a cell is ``nan`` or infinite.
    RaggedRows
        If a row does not have as many cells as the first one.
    EmptyDataset
        If the file holds no profile.
    """
    dataset = Dataset(_read_matrix(path), source=str(path))
    logger.info("Loaded %s profiles of dimension %s from %s.", dataset.num_observations, dataset.dim, path)

    if standardization == Standardization.GLOBAL:
        dataset = standardize(dataset)

    return dataset


def load_agent_files(
    paths: list[str | Path], standardization: Standardization = Standardization.GLOBAL
) -> Dataset:
    """Loads one CSV file per agent, agent ``i`` owning the rows of ``paths[i]``."""
    if not paths:
        raise EmptyDataset("agent files")

    matrices = [_read_matrix(path) for path in paths]
    dim = matrices[0].shape[1]

    for path, matrix in zip(paths, matrices):
        if matrix.shape[1] != dim:
            raise DimensionMismatch((dim,), (matrix.shape[1],), f"profiles of {path}")

    owners = np.concatenate(
        [np.full(matrix.shape[0], agent) for agent, matrix in enumerate(matrices)]
    )
    dataset = Dataset(np.vstack(matrices), owners=owners, source=",".join(map(str, paths)))

    if standardization == Standardization.GLOBAL:
        dataset = standardize(dataset)

    return dataset


def distributed_standardize(
    dataset: Dataset, topology: Topology, config: ConsensusConfig
) -> Dataset:
    """Standardizes partitioned profiles without pooling them.

    A first consensus on ``[sum of profiles | profile count]`` gives every
    agent the global mean; a second one on the summed squared deviations gives
    the global variance. Every agent standardizes its own rows with its own
    estimates, which agree to within the consensus tolerance.
    """
    if dataset.owners is None:
        raise InfeasiblePolicy("distributed standardization", "the dataset is not partitioned")

    if dataset.num_agents != topology.num_agents:
        raise DimensionMismatch((topology.num_agents,), (dataset.num_agents,), "agents")

    parts = dataset.split()
    base = config.params.seed if config.params is not None else 0
    base = base if isinstance(base, tuple) else (base,)

    totals = np.vstack([np.append(part.sum(axis=0), part.shape[0]) for part in parts])
    first = run_with_config(config.with_seed((*base, 0, 0)), topology, totals)
    sums = first.sums
    means = sums[:, :-1] / sums[:, -1:]

    deviations = np.vstack(
        [((part - means[agent]) ** 2).sum(axis=0) for agent, part in enumerate(parts)]
    )
    second = run_with_config(config.with_seed((*base, 0, 1)), topology, deviations)
    variances = second.sums / sums[:, -1:]
    variances = np.clip(variances, 0.0, None)
    scales = np.sqrt(variances)
    scales[scales == 0] = 1.0

    logger.debug(
        "Distributed standardization: agents disagree on the mean by at most %s.",
        float(np.ptp(means, axis=0).max()),
    )

    observations = dataset.observations.copy()

    for agent in range(topology.num_agents):
        mask = dataset.owners == agent
        observations[mask] = (observations[mask] - means[agent]) / scales[agent]

    return dataset.replace(observations=observations, mean=means[0], scale=scales[0])


def profile_template(shape: str, dim: int = 48) -> np.ndarray:
    """Returns the daily consumption template of a named shape sampled at
    ``dim`` evenly spaced times of day."""
    if shape not in _SHAPE_PEAKS:
        raise InvalidParameter("shape", shape, f"not one of {', '.join(PROFILE_SHAPES)}")

    hours = np.arange(dim) * 24.0 / dim
    base, peaks = _SHAPE_PEAKS[shape]
    template = np.full(dim, base)

    for hour, height, width in peaks:
        distance = np.abs(hours - hour)
        distance = np.minimum(distance, 24.0 - distance)
        template += height * np.exp(-0.5 * (distance / width) ** 2)

    return template


def default_components(
    count: int = 6, per_component: int = 100, spread: float = 0.3
) -> list[dict]:
    """Returns ``count`` synthetic components cycling through :data:`DAILY_PEAK_SHAPES`.

    Components past the six shapes are rescaled copies so they stay distinct.
    """
    return [
        {
            "shape": DAILY_PEAK_SHAPES[index % len(DAILY_PEAK_SHAPES)],
            "level": 1.0 + index // len(DAILY_PEAK_SHAPES),
            "spread": spread,
            "count": per_component,
        }
        for index in range(count)
    ]


def synth_profiles(components: list[dict], dim: int = 48, seed: int = 0) -> Dataset:
    """Draws profiles from planted daily-shape components.

    Parameters
    ----------
    components: list[:class:`dict`]
        Each component has a ``shape`` from :data:`PROFILE_SHAPES`, a ``count``
        of profiles, a Gaussian ``spread`` in kW and an optional ``level``
        multiplying the template.
    dim: :class:`int`
        The number of time slots per day.
    seed: :class:`int`
        The generator seed.

    Returns
    -------
    :class:`.objects.experiment.Dataset`
        The shuffled raw profiles, with the component of every profile as its
        label.
    """
    if not components:
        raise EmptyDataset("synthetic")

    rng = np.random.default_rng(seed)
    blocks = []
    labels = []

    for index, component in enumerate(components):
        count = int(component["count"])

        if count < 1:
            raise InfeasiblePolicy("synthetic", f"component {index} has no profile")

        template = component.get("level", 1.0) * profile_template(component["shape"], dim)
        blocks.append(template + component["spread"] * rng.standard_normal((count, dim)))
        labels.append(np.full(count, index))

    order = rng.permutation(sum(block.shape[0] for block in blocks))
    observations = np.vstack(blocks)[order]
    return Dataset(observations, labels=np.concatenate(labels)[order], source="synthetic")


def partition(
    dataset: Dataset,
    num_agents: int,
    policy: PartitionPolicy = PartitionPolicy.EQUAL,
    proportions: list[float] | None = None,
) -> np.ndarray:
    """Splits the observations across agents in contiguous blocks.

    Parameters
    ----------
    dataset: :class:`.objects.experiment.Dataset`
        The observations.
    num_agents: :class:`int`
        The number of agents ``M``.
    policy: :class:`.enums.PartitionPolicy`
        ``equal`` gives the first ``N mod M`` agents one extra observation,
        ``proportions`` sizes blocks by largest remainder, ``by-file`` keeps the
        owners the dataset was loaded with.
    proportions: list[:class:`float`] | :class:`None`
        The agent shares of the ``proportions`` policy.

    Returns
    -------
    :class:`numpy.ndarray`
        The owning agent of every observation.

    Raises
    ------
    InfeasiblePolicy
        If the policy cannot give every agent a well-defined block.
    """
    count = dataset.num_observations

    if policy == PartitionPolicy.BY_FILE:
        if dataset.owners is None or dataset.num_agents != num_agents:
            raise InfeasiblePolicy(policy.value, f"the dataset was not loaded as {num_agents} files")

        return dataset.owners.copy()

    if policy == PartitionPolicy.EQUAL:
        if count < num_agents:
            raise InfeasiblePolicy(policy.value, f"{count} observations cannot cover {num_agents} agents")

        sizes = np.full(num_agents, count // num_agents)
        sizes[: count % num_agents] += 1

    else:
        shares = np.asarray(proportions if proportions is not None else [], dtype=float)

        if shares.shape != (num_agents,):
            raise InfeasiblePolicy(policy.value, f"{num_agents} shares are required")

        if np.any(shares < 0) or not np.isclose(shares.sum(), 1.0):
            raise InfeasiblePolicy(policy.value, "shares must be nonnegative and sum to 1")

        exact = shares * count
        sizes = np.floor(exact).astype(int)
        remainders = exact - sizes

        # Ties go to the lowest agent.
        for agent in np.argsort(-remainders, kind="stable")[: count - sizes.sum()]:
            sizes[agent] += 1

    owners = np.repeat(np.arange(num_agents), sizes)
    logger.debug("Partitioned %s observations as %s.", count, sizes.tolist())
    return owners
