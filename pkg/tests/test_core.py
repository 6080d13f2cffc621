import numpy as np
import pytest

from pdomd import (
    Box,
    ConfigError,
    EuclideanGeometry,
    ProblemError,
    Simplex,
    assemble_dual_weighted_gradient,
    build_synthetic_problem,
    initial_state,
    make_linear_problem,
    mix_toward_uniform,
    parameter_schedule,
    run,
    step,
    update_equality_multiplier,
    update_inequality_multiplier,
)
from pdomd.core import AlgorithmParams, DualState, SolverState


def small_params(horizon, theta=0.0):
    return AlgorithmParams(
        objective_weight=float(np.sqrt(horizon)),
        prox_weight=float(horizon),
        mixing_weight=theta,
        horizon=horizon,
        drift_window=max(1, int(round(np.sqrt(horizon)))),
    )


class TestSchedule:
    def test_reference_horizon(self):
        p = parameter_schedule(10_000, "simplex")
        assert p.objective_weight == 100.0
        assert p.prox_weight == 10_000.0
        assert p.mixing_weight == 1e-4
        assert p.drift_window == 100

    def test_small_horizon(self):
        p = parameter_schedule(4, "simplex")
        assert (p.objective_weight, p.prox_weight) == (2.0, 4.0)
        assert p.mixing_weight == 0.25
        assert p.drift_window == 2

    def test_general_variant_has_no_mixing(self):
        assert parameter_schedule(100, "general").mixing_weight == 0.0

    def test_degenerate_horizon_rejected(self):
        with pytest.raises(ConfigError):
            parameter_schedule(1)

    def test_unknown_variant_rejected(self):
        with pytest.raises(ConfigError):
            parameter_schedule(100, "fancy")


class TestMultiplierUpdates:
    def test_inequality_examples(self):
        mu_new = np.array([1.0, 0.0])
        mu_prev = np.array([0.5, 0.5])
        # grad chosen so <grad, mu_new - mu_prev> = -0.5
        grad = np.array([-1.0, 0.0])
        assert update_inequality_multiplier(2.0, 1.0, grad, mu_new, mu_prev) == 2.5
        # inner product +0.5 with value -3 clips at zero
        grad_up = np.array([1.0, 0.0])
        assert update_inequality_multiplier(1.0, -3.0, grad_up, mu_new, mu_prev) == 0.0
        zero = np.zeros(2)
        assert update_inequality_multiplier(0.0, -1.0, zero, mu_new, mu_prev) == 0.0

    def test_inequality_rejects_negative_state(self):
        with pytest.raises(ProblemError):
            update_inequality_multiplier(-0.1, 0.0, np.zeros(1), np.zeros(1), np.zeros(1))

    def test_equality_examples(self):
        mu = np.array([0.5, 0.5])
        h = np.array([1.0, 1.0])  # <h, mu> = 1
        assert update_equality_multiplier(0.0, h, mu, 1.0) == 0.0
        assert update_equality_multiplier(1.0, 2.0 * h, mu, 0.5) == 2.5
        assert update_equality_multiplier(-1.0, 0.0 * h, mu, 1.0) == -2.0


class TestAssembly:
    def test_direct_sum_example(self):
        problem = make_linear_problem(
            Simplex(2),
            np.array([1.0, 0.0]),
            ineq_rows=np.array([[0.0, 1.0]]),
            ineq_margins=np.array([0.0]),
        )
        params = small_params(4)
        params = AlgorithmParams(
            objective_weight=1.0,
            prox_weight=params.prox_weight,
            mixing_weight=0.0,
            horizon=4,
            drift_window=2,
        )
        state = initial_state(problem, params)
        state = SolverState(
            slot=1,
            decision=state.decision,
            duals=DualState(np.array([2.0]), np.zeros(0)),
            params=params,
            geometry=state.geometry,
            decision_set=state.decision_set,
            targets=state.targets,
            variant="general",
        )
        fns = problem.sample_slot(0, np.random.default_rng(0))
        obs = fns.observe(state.decision)
        # Build an observation with exact gradients (no sampling noise).
        coeffs = assemble_dual_weighted_gradient(state, obs)
        expected = obs.objective_grad + 2.0 * obs.ineq_grads[0]
        assert np.allclose(coeffs, expected, atol=1e-15)

    def test_zero_duals_reduce_to_objective(self):
        problem = build_synthetic_problem(5, 2, 1, seed=0)
        params = small_params(16)
        state = initial_state(problem, params)
        fns = problem.sample_slot(0, np.random.default_rng(3))
        obs = fns.observe(state.decision)
        coeffs = assemble_dual_weighted_gradient(state, obs)
        assert np.allclose(coeffs, params.objective_weight * obs.objective_grad)


class TestStep:
    def test_first_slot_plays_initial_point(self):
        problem = build_synthetic_problem(6, 1, 1, seed=4)
        state = initial_state(problem, small_params(100))
        new_state, outcome = step(state, None)
        assert np.array_equal(outcome.decision, problem.decision_set.initial_point())
        assert outcome.drift == 0.0
        assert outcome.ineq_dual_norm == 0.0 and outcome.eq_dual_norm == 0.0
        assert new_state.slot == 1

    def test_unconstrained_box_converges_to_vertex(self):
        box = Box(np.zeros(3), np.ones(3))
        c = np.array([1.0, -2.0, 0.5])
        problem = make_linear_problem(box, c)
        record = run(problem, 400, seed=0, variant="general")
        target = box.support_minimizer(c)
        assert np.max(np.abs(record.decisions[-1] - target)) < 0.05

    def test_observation_shape_validation(self):
        problem = build_synthetic_problem(5, 2, 1, seed=0)
        state = initial_state(problem, small_params(16))
        other = build_synthetic_problem(4, 2, 1, seed=0)
        fns = other.sample_slot(0, np.random.default_rng(0))
        obs = fns.observe(np.full(4, 0.25))
        with pytest.raises(ProblemError):
            step(state, obs)

    def test_equality_tracking_on_box(self):
        # One pinned coordinate: time-averaged <h, mu> should close in on b
        # at a root-T pace.
        box = Box(np.zeros(2), np.ones(2))
        errors = {}
        for horizon in (100, 400, 1600):
            problem = make_linear_problem(
                box,
                np.array([1.0, 0.1]),
                eq_rows=np.array([[1.0, 0.0]]),
                targets=np.array([0.35]),
                eq_noise=0.05,
            )
            record = run(problem, horizon, seed=3, variant="general")
            avg = record.eq_realized.mean(axis=0)[0]
            errors[horizon] = abs(avg - 0.35)
        assert errors[1600] < errors[100]
        envelope = errors[100] * np.sqrt(100) * 1.5
        assert errors[1600] <= envelope / np.sqrt(1600)


class TestRunInvariants:
    def test_dual_nonnegativity_and_telescoping(self):
        problem = build_synthetic_problem(8, 2, 2, seed=1)
        record = run(problem, 600, seed=5, variant="general")
        assert np.all(record.ineq_dual_norm >= 0.0)
        total_drift = float(np.sum(record.drift))
        final = 0.5 * (record.ineq_dual_norm[-1] ** 2 + record.eq_dual_norm[-1] ** 2)
        assert abs(total_drift - final) <= 1e-6 * max(final, 1.0)

    def test_penalty_lower_bound_each_step(self):
        # General variant: advance + prox cost >= -V^2 D1^2 / (2 alpha beta).
        problem = build_synthetic_problem(6, 2, 2, seed=2)
        params = parameter_schedule(400, "general")
        d1 = problem.constants_for("l2").objective_grad_bound
        floor = -(params.objective_weight**2) * d1**2 / (2.0 * params.prox_weight)
        from pdomd import iterate_run

        for _, outcome, _, _ in iterate_run(problem, 400, params, seed=6, variant="general"):
            assert outcome.objective_advance + outcome.prox_cost >= floor - 1e-12

    def test_penalty_lower_bound_simplex(self):
        problem = build_synthetic_problem(6, 2, 2, seed=2)
        params = parameter_schedule(400, "simplex")
        d1 = problem.constants_for("linf").objective_grad_bound
        floor = -(
            (params.objective_weight**2) * d1**2 / (2.0 * params.prox_weight)
            + params.objective_weight * params.mixing_weight * d1
        )
        from pdomd import iterate_run

        for _, outcome, _, _ in iterate_run(problem, 400, params, seed=6, variant="simplex"):
            assert outcome.objective_advance + outcome.prox_cost >= floor - 1e-12

    def test_simplex_iterates_stay_valid(self):
        problem = build_synthetic_problem(10, 2, 2, seed=7)
        record = run(problem, 300, seed=8, variant="simplex")
        sums = record.decisions.sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) < 1e-10
        assert np.min(record.decisions) > 0.0
        theta = record.params.mixing_weight
        d = record.dimension
        for t in range(1, record.horizon):
            mixed = mix_toward_uniform(record.decisions[t - 1], theta)
            assert np.min(mixed) >= theta / d - 1e-18

    def test_run_determinism(self):
        problem = build_synthetic_problem(6, 1, 1, seed=0)
        a = run(problem, 200, seed=11, variant="simplex")
        b = run(problem, 200, seed=11, variant="simplex")
        assert np.array_equal(a.decisions, b.decisions)
        assert np.array_equal(a.drift, b.drift)
        assert np.array_equal(a.objective_realized, b.objective_realized)
        assert a.params == b.params and a.seed == b.seed

    def test_seed_changes_trajectory(self):
        problem = build_synthetic_problem(6, 1, 1, seed=0)
        a = run(problem, 50, seed=1)
        b = run(problem, 50, seed=2)
        assert not np.array_equal(a.decisions, b.decisions)

    def test_empty_horizon(self):
        problem = build_synthetic_problem(4, 1, 1, seed=0)
        record = run(problem, 0, seed=0)
        assert record.horizon == 0
        assert record.decisions.shape == (0, 4)

    def test_slot_zero_row(self):
        problem = build_synthetic_problem(5, 2, 1, seed=3)
        record = run(problem, 10, seed=0, variant="general")
        assert record.ineq_dual_norm[0] == 0.0
        assert record.eq_dual_norm[0] == 0.0
        assert record.drift[0] == 0.0
        assert np.array_equal(record.decisions[0], np.full(5, 0.2))

    def test_geometry_mismatch_guard(self):
        box_problem = make_linear_problem(
            Box(np.zeros(2), np.ones(2)), np.array([1.0, 0.0])
        )
        with pytest.raises(ConfigError):
            initial_state(box_problem, small_params(16), variant="simplex")
