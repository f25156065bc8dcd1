import numpy as np
import pytest
from numpy.testing import assert_allclose

from consensuscluster import (
    build_topology,
    complete_topology,
    convergence_curve,
    drift_bound,
    metropolis_weights,
    mixing_matrix,
    predictor_update,
    random_connected_topology,
    round_budget,
    run_consensus,
    run_with_config,
    sample_disturbance,
    spectral_summary,
    step,
    sum_drift,
    tail_slope,
)
from consensuscluster.enums import BudgetMode, Termination, Variant
from consensuscluster.errors import BudgetExhausted, DimensionMismatch, InvalidParameter
from consensuscluster.objects.consensus import ConsensusConfig, DisturbanceParams, DisturbanceStream


def test_step_ac(path3):
    weights = mixing_matrix(Variant.AC, path3)

    assert_allclose(step(Variant.AC, weights, [1.0, 2.0, 3.0]).ravel(), [4 / 3, 2, 8 / 3])


def test_step_aac(path3):
    weights = mixing_matrix(Variant.AAC, path3)

    assert weights.alpha == pytest.approx(0.5)
    assert_allclose(step(Variant.AAC, weights, [1.0, 2.0, 3.0]).ravel(), [1.5, 2, 2.5])


def test_pp_ac_mixes_with_metropolis(path3):
    weights = mixing_matrix(Variant.PP_AC, path3)

    assert weights.alpha == 0.0
    assert_allclose(weights.entries, metropolis_weights(path3).entries)


def test_step_adds_masks(path3):
    weights = mixing_matrix(Variant.PP_AAC, path3)
    states = np.array([[1.0], [2.0], [3.0]])
    masks = np.array([[0.1], [-0.2], [0.3]])

    assert_allclose(step(Variant.PP_AAC, weights, states, masks), weights.entries @ (states + masks))


def test_step_rejects_bad_shapes(path3):
    weights = mixing_matrix(Variant.AC, path3)

    with pytest.raises(DimensionMismatch):
        step(Variant.AC, weights, np.ones((4, 2)))

    with pytest.raises(DimensionMismatch):
        step(Variant.PP_AC, weights, np.ones((3, 2)), np.ones((3, 1)))


def test_predictor_update_matches_accelerated_matrix(retailer, rng):
    weights = metropolis_weights(retailer)
    alpha = spectral_summary(weights).alpha_opt
    states = rng.standard_normal((10, 5))
    accelerated = mixing_matrix(Variant.AAC, retailer)

    assert_allclose(predictor_update(weights, alpha, states), accelerated.entries @ states, atol=1e-12)


@pytest.mark.parametrize("variant", list(Variant), ids=lambda variant: variant.value)
def test_path_converges_to_average(path3, params, variant):
    run = run_consensus(
        variant, path3, [1.0, 2.0, 3.0], params if variant.is_private else None, tol=1e-9
    )

    assert run.converged
    assert run.termination == Termination.TOLERANCE
    assert_allclose(run.final.ravel(), [2.0, 2.0, 2.0], atol=1e-9)
    assert_allclose(run.sums.ravel(), [6.0, 6.0, 6.0], atol=1e-8)


def test_single_agent_terminates_at_round_zero():
    run = run_consensus(Variant.PP_AAC, build_topology(1, []), [[4.0, 5.0]], DisturbanceParams())

    assert run.rounds == 0
    assert run.shares == []
    assert_allclose(run.final, [[4.0, 5.0]])


def test_agreeing_network_terminates_at_round_zero(retailer):
    run = run_consensus(Variant.AC, retailer, np.full((10, 3), 7.0))

    assert run.rounds == 0
    assert len(run) == 0


def test_zero_beta_equals_aac(retailer, rng):
    states = rng.uniform(0, 10, (10, 4))
    private = run_consensus(Variant.PP_AAC, retailer, states, DisturbanceParams(2.0, 0.0, 3))
    plain = run_consensus(Variant.AAC, retailer, states)

    assert private.rounds == plain.rounds
    assert_allclose(private.final, plain.final, atol=1e-15)


def test_parameters_are_checked(path3, params):
    with pytest.raises(InvalidParameter):
        run_consensus(Variant.PP_AAC, path3, [1.0, 2.0, 3.0])

    with pytest.raises(InvalidParameter):
        run_consensus(Variant.AC, path3, [1.0, 2.0, 3.0], params)

    with pytest.raises(InvalidParameter):
        run_consensus(Variant.AC, path3, [1.0, 2.0, 3.0], tol=0.0)

    with pytest.raises(InvalidParameter):
        run_consensus(Variant.AC, path3, [1.0, np.nan, 3.0])

    with pytest.raises(DimensionMismatch):
        run_consensus(Variant.AC, path3, [1.0, 2.0])


@pytest.mark.parametrize("sigma, beta", [(0.0, 0.2), (2.0, 1.0), (2.0, -0.1)])
def test_disturbance_params_are_checked(sigma, beta):
    with pytest.raises(InvalidParameter):
        DisturbanceParams(sigma, beta)


def test_disturbance_intervals(params):
    stream = DisturbanceStream(params, 3, 1000)
    previous = np.zeros(1000)

    for t in range(4):
        theta = sample_disturbance(stream, 1, t)
        delta = previous + theta

        assert np.all(np.abs(delta) <= params.radius(t))
        assert np.max(np.abs(delta)) > 0.9 * params.radius(t)
        previous = delta


def test_disturbance_rounds_in_order(params):
    stream = DisturbanceStream(params, 2, 1)
    sample_disturbance(stream, 0, 0)

    with pytest.raises(InvalidParameter):
        sample_disturbance(stream, 0, 2)

    with pytest.raises(InvalidParameter):
        sample_disturbance(stream, 1, -1)


def test_agents_draw_independently(params):
    stream = DisturbanceStream(params, 2, 8)
    first = sample_disturbance(stream, 0, 0)
    second = sample_disturbance(stream, 1, 0)

    assert not np.allclose(first, second)


def test_masks_telescope(retailer, rng, params):
    run = run_consensus(Variant.PP_AAC, retailer, rng.uniform(0, 10, (10, 3)), params, tol=1e-10)
    masks = [run.shares[t] - run.states[t] for t in range(run.rounds)]

    assert len(run.deltas) == run.rounds
    assert_allclose(masks[0], run.deltas[0])

    for t in range(1, run.rounds):
        assert_allclose(masks[t], run.deltas[t] - run.deltas[t - 1], atol=1e-12)

    assert_allclose(np.sum(masks, axis=0), run.last_deltas, atol=1e-12)


def test_masking_identity(retailer, rng, params):
    run = run_consensus(Variant.PP_AAC, retailer, rng.uniform(0, 10, (10, 3)), params, tol=1e-10)

    for t in range(run.rounds):
        assert_allclose(run.states[t + 1], run.weights.entries @ run.shares[t], atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_sum_drift_within_bound(seed, retailer):
    rng = np.random.default_rng(seed)
    run = run_consensus(
        Variant.PP_AAC, retailer, rng.uniform(0, 10, (10, 2)), DisturbanceParams(2.0, 0.5, seed), tol=1e-9
    )

    assert sum_drift(run) <= drift_bound(run)
    assert run.to_dict()["drift_within_bound"]


@pytest.mark.parametrize("variant", [Variant.AC, Variant.AAC], ids=lambda variant: variant.value)
def test_plain_variants_preserve_sum(retailer, rng, variant):
    states = rng.uniform(0, 10, (10, 3))
    run = run_consensus(variant, retailer, states, budget=30, budget_mode=BudgetMode.RADIUS)

    for recorded in run.states:
        assert_allclose(recorded.sum(axis=0), states.sum(axis=0), atol=1e-10)


def test_budget_exhausted_carries_run(retailer, rng):
    with pytest.raises(BudgetExhausted) as info:
        run_consensus(Variant.AC, retailer, rng.uniform(0, 10, (10, 2)), tol=1e-12, budget=5)

    run = info.value.run
    assert run.rounds == 5
    assert run.termination == Termination.BUDGET
    assert not run.converged


def test_radius_mode_runs_exact_rounds(retailer, rng):
    run = run_consensus(
        Variant.AAC, retailer, rng.uniform(0, 10, (10, 2)), budget=17, budget_mode=BudgetMode.RADIUS
    )

    assert run.rounds == 17
    assert len(convergence_curve(run)) == 18


@pytest.mark.parametrize("variant", list(Variant), ids=lambda variant: variant.value)
def test_round_budget_meets_tolerance(retailer, rng, variant):
    states = rng.uniform(0, 10, (10, 3))
    config = ConsensusConfig(variant, tol=1e-6, budget_mode=BudgetMode.RADIUS, params=None)
    run = run_with_config(config.with_seed(4), retailer, states)

    assert run.rounds == round_budget(run.weights, 1e-6, states, run.params)
    assert run.max_error <= 1e-6


def test_round_budget_without_disturbance(path3):
    weights = metropolis_weights(path3)

    assert round_budget(weights, 1.0, [2.0, 2.0, 2.0]) == 1
    assert round_budget(mixing_matrix(Variant.AC, complete_topology(4)), 1e-9, [0.0, 1.0, 2.0, 3.0]) == 1


def test_run_with_config_tolerance(retailer, rng):
    config = ConsensusConfig(tol=1e-10, budget=500, relative_tol=True, params=DisturbanceParams(2.0, 0.2, 9))
    run = run_with_config(config, retailer, rng.uniform(0, 100, (10, 2)))

    assert run.converged
    assert run.tol == pytest.approx(1e-10 * np.max(np.abs(run.target)))


def test_runs_are_reproducible(retailer, rng, params):
    states = rng.uniform(0, 10, (10, 3))
    first = run_consensus(Variant.PP_AAC, retailer, states, params)
    second = run_consensus(Variant.PP_AAC, retailer, states, params)
    other = run_consensus(Variant.PP_AAC, retailer, states, DisturbanceParams(2.0, 0.2, 1))

    assert first.rounds == second.rounds
    assert np.array_equal(first.final, second.final)
    assert not np.array_equal(first.shares[0], other.shares[0])


def test_trajectory_pruning(retailer, rng, params):
    states = rng.uniform(0, 10, (10, 3))
    full = run_consensus(Variant.PP_AAC, retailer, states, params)
    pruned = run_consensus(Variant.PP_AAC, retailer, states, params, keep_trajectory=False)

    assert len(full.states) == full.rounds + 1
    assert len(pruned.states) == 2
    assert len(pruned.shares) == 1
    assert pruned.deltas == []
    assert np.array_equal(pruned.final, full.final)
    assert np.array_equal(pruned.shares[0], full.shares[0])
    assert set(pruned.to_frame()["round"]) == {0, full.rounds}


def test_trajectory_frame(path3, params):
    run = run_consensus(Variant.PP_AAC, path3, [[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], params)
    frame = run.to_frame()

    assert list(frame.columns) == ["round", "agent", "entry", "value", "masked_value", "error"]
    assert len(frame) == (run.rounds + 1) * 6
    assert frame[frame["round"] == run.rounds]["masked_value"].isna().all()
    assert not frame[frame["round"] == 0]["masked_value"].isna().any()


def test_tail_slope_of_geometric_curve():
    curve = 10.0 ** (-0.5 * np.arange(40))

    assert tail_slope(curve) == pytest.approx(-0.5)

    with pytest.raises(InvalidParameter):
        tail_slope(curve[:5])


@pytest.mark.slow
def test_accelerated_variants_converge_faster(retailer):
    rng = np.random.default_rng(0)
    states = rng.uniform(0, 10, 10)
    slopes = {}
    curves = {}

    for variant in Variant:
        params = DisturbanceParams(2.0, 0.2, 0) if variant.is_private else None
        run = run_consensus(variant, retailer, states, params, budget=400, budget_mode=BudgetMode.RADIUS)
        curves[variant] = convergence_curve(run)
        slopes[variant] = tail_slope(curves[variant])

    assert slopes[Variant.AAC] < slopes[Variant.AC]
    assert slopes[Variant.PP_AAC] < slopes[Variant.PP_AC]
    assert slopes[Variant.PP_AAC] / slopes[Variant.AAC] == pytest.approx(1.0, abs=0.05)
    assert slopes[Variant.PP_AC] / slopes[Variant.AC] == pytest.approx(1.0, abs=0.05)

    private, exact = curves[Variant.PP_AAC], curves[Variant.PP_AC]
    above_floor = np.flatnonzero(exact >= 1e-12)
    rounds = above_floor[above_floor >= 10]

    assert rounds.size > 0
    assert np.all(private[rounds] < exact[rounds])


@pytest.mark.slow
def test_random_graphs_reach_average():
    for seed in range(200):
        rng = np.random.default_rng(seed)
        size = int(rng.integers(2, 21))
        topology = random_connected_topology(size, 0.2, seed)
        states = rng.uniform(-5, 5, (size, 2))
        run = run_consensus(Variant.PP_AAC, topology, states, DisturbanceParams(1.0, 0.3, seed), tol=1e-9, budget=20000)

        assert np.max(np.abs(run.final - states.mean(axis=0))) <= 1e-9
        assert sum_drift(run) <= drift_bound(run)


@pytest.mark.slow
def test_random_graphs_meet_radius_budget():
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        size = int(rng.integers(3, 21))
        topology = random_connected_topology(size, 0.2, seed)
        states = rng.uniform(-5, 5, (size, 2))
        params = DisturbanceParams(2.0, 0.2, seed)
        config = ConsensusConfig(Variant.PP_AAC, tol=1e-9, budget_mode=BudgetMode.RADIUS, params=params)
        run = run_with_config(config, topology, states)

        assert run.rounds == round_budget(mixing_matrix(Variant.PP_AAC, topology), 1e-9, states, params)
        assert np.max(np.abs(run.final - states.mean(axis=0))) <= 1e-9
        assert sum_drift(run) <= drift_bound(run)
