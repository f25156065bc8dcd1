import json

import pytest
from click.testing import CliRunner

from consensuscluster.cli import build_config, main
from consensuscluster.enums import InitStrategy, Recipe

SMALL = [
    "--topology", "path",
    "--agents", "4",
    "--clusters", "3",
]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"synthetic": {"components": 3, "per_component": 10, "dim": 6, "spread": 0.3}}))
    return path


def test_help_lists_recipes(runner):
    result = runner.invoke(main, ["--help"])

    assert result.exit_code == 0

    for command in ("consensus-compare", "cluster", "compare-centralized", "ksweep", "topology-sweep", "attack", "local-vs-global"):
        assert command in result.output


def test_compare_centralized_command(runner, tmp_path, small_config):
    output = tmp_path / "out"
    result = runner.invoke(
        main, ["compare-centralized", "--config", str(small_config), *SMALL, "--output", str(output)]
    )

    assert result.exit_code == 0, result.output
    assert "compare-centralized: passed" in result.output
    assert json.loads((output / "report.json").read_text())["passed"]
    assert (output / "manifest.json").exists()


def test_flags_override_the_config_file(small_config):
    config = build_config(Recipe.KSWEEP, str(small_config), {"clusters": 4, "seed": None, "proportions": ()})

    assert config.recipe == Recipe.KSWEEP
    assert config.clusters == 4
    assert config.seed == 0
    assert config.synthetic["dim"] == 6


def test_invalid_value_fails(runner, tmp_path, small_config):
    result = runner.invoke(
        main, ["cluster", "--config", str(small_config), "--beta", "1.5", "--output", str(tmp_path / "out")]
    )

    assert result.exit_code == 1
    assert "beta" in result.output


def test_unknown_choice_is_a_usage_error(runner):
    result = runner.invoke(main, ["cluster", "--method", "dbscan"])

    assert result.exit_code == 2


def test_init_flags(small_config):
    config = build_config(Recipe.KSWEEP, str(small_config), {"init": "random", "restarts": 3})

    assert config.init == InitStrategy.RANDOM
    assert config.restarts == 3
