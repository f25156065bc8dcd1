from typing import Any

import numpy as np

from .errors import DimensionMismatch

__all__ = (
    "MISSING",
    "spawn_seeds",
    "spawn_generators",
    "as_float_matrix",
)


class _MissingSentinel:
    __slots__ = ()

    def __eq__(self, other):
        return False

    def __bool__(self):
        return False

    def __hash__(self):
        return 0

    def __repr__(self):
        return "..."


MISSING: Any = _MissingSentinel()


def spawn_seeds(
    seed: int | tuple[int, ...] | np.random.SeedSequence, count: int
) -> list[np.random.SeedSequence]:
    """Splits a master seed into independent child seeds.

    Parameters
    ----------
    seed: :class:`int` | tuple[:class:`int`, ...] | :class:`numpy.random.SeedSequence`
        The master seed.
    count: :class:`int`
        The number of child seeds to create.

    Returns
    -------
    list[:class:`numpy.random.SeedSequence`]
        The child seeds, in a deterministic order.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)

    return seed.spawn(count)


def spawn_generators(
    seed: int | tuple[int, ...] | np.random.SeedSequence, count: int
) -> list[np.random.Generator]:
    """Returns one independent random generator per child of ``seed``."""
    return [np.random.default_rng(child) for child in spawn_seeds(seed, count)]


def as_float_matrix(values, what: str = "values") -> np.ndarray:
    """Converts ``values`` into a 2-D float array, promoting vectors to columns."""
    array = np.asarray(values, dtype=float)

    if array.ndim == 1:
        array = array[:, None]

    if array.ndim != 2:
        raise DimensionMismatch(("M", "D"), array.shape, what)

    return array
