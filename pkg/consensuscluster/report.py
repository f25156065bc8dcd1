import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .objects.experiment import ExperimentReport

__all__ = (
    "FLOAT_FORMAT",
    "to_json",
    "write_report",
    "write_manifest",
)

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()

    if isinstance(value, np.integer):
        return int(value)

    if isinstance(value, np.floating):
        return float(value)

    if isinstance(value, np.bool_):
        return bool(value)

    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def to_json(data: dict) -> str:
    """Serializes ``data`` deterministically: sorted keys, fixed indentation and
    numpy scalars converted to Python numbers."""
    return json.dumps(data, sort_keys=True, indent=2, default=_default) + "\n"


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_report(report: ExperimentReport, output: str | Path) -> list[Path]:
    """Writes ``report.json`` and one ``<name>.csv`` per table of the report.

    Returns
    -------
    list[:class:`pathlib.Path`]
        The written files, in the order they were written.
    """
    output = Path(output)
    output.mkdir(parents=True, exist_ok=True)

    path = output / "report.json"
    path.write_text(to_json(report.to_dict()))
    paths = [path]

    for name, table in sorted(report.tables.items()):
        path = output / f"{name}.csv"
        table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        paths.append(path)

    logger.info("Wrote the %s report to %s.", report.recipe.value, output)
    return paths


def write_manifest(report: ExperimentReport, output: str | Path, paths: list[Path]) -> Path:
    """Writes ``manifest.json``: the configuration, the seed, the package version
    and the SHA-256 of every written file, enough to rerun the experiment and
    check that the rerun is byte-identical."""
    from consensuscluster import __version__

    output = Path(output)
    manifest = {
        "recipe": report.recipe.value,
        "version": __version__,
        "seed": report.config.seed,
        "config": report.config.to_dict(),
        "files": {path.name: _digest(path) for path in paths},
    }
    path = output / "manifest.json"
    path.write_text(to_json(manifest))
    return path
