import numpy as np
import pytest

from pdomd import (
    DatacenterConfig,
    PriceTrace,
    ProblemError,
    Simplex,
    build_datacenter_problem,
    build_synthetic_problem,
    make_linear_problem,
    pareto_sample,
    poisson_sample,
    reac_policy_step,
    service_curve,
    service_curve_inverse,
)

# Frozen reference: (e^(5/8) - 1)/4
INVERSE_AT_FIVE = 0.2170614893580556


def constant_trace(n_slots, price=20.0, zones=5):
    names = tuple(f"Z{i}" for i in range(zones))
    return PriceTrace(names, np.full((n_slots, zones), price))


class TestSamplers:
    def test_pareto_support_and_scale(self):
        rng = np.random.default_rng(0)
        draws = pareto_sample(5.0, 2.5, rng, size=20_000)
        assert np.all(draws >= 3.0)
        assert draws.min() < 3.01  # scale is the essential infimum

    def test_pareto_mean(self):
        rng = np.random.default_rng(1)
        draws = pareto_sample(5.0, 2.5, rng, size=1_000_000)
        assert abs(draws.mean() - 5.0) < 0.05

    def test_pareto_shape_precondition(self):
        rng = np.random.default_rng(2)
        with pytest.raises(ProblemError):
            pareto_sample(1.0, 1.0, rng)
        with pytest.raises(ProblemError):
            pareto_sample(-1.0, 2.5, rng)

    def test_poisson_moments(self):
        rng = np.random.default_rng(3)
        draws = np.array([poisson_sample(1000.0, rng) for _ in range(100_000)])
        assert abs(draws.mean() - 1000.0) < 10.0
        assert abs(draws.var() - 1000.0) < 50.0

    def test_poisson_small_mean(self):
        rng = np.random.default_rng(4)
        draws = [poisson_sample(1e-9, rng) for _ in range(1000)]
        assert all(x == 0 for x in draws)

    def test_poisson_seed_replay(self):
        a = np.random.default_rng(77)
        b = np.random.default_rng(77)
        seq_a = [poisson_sample(42.0, a) for _ in range(50)]
        seq_b = [poisson_sample(42.0, b) for _ in range(50)]
        assert seq_a == seq_b


class TestServiceCurve:
    def test_zero_power_serves_nothing(self):
        assert service_curve(0.0) == 0.0

    def test_inverse_frozen_value(self):
        assert abs(service_curve_inverse(5.0) - INVERSE_AT_FIVE) < 1e-12

    def test_inverse_saturates(self):
        assert service_curve_inverse(1000.0) == 30.0

    def test_round_trip_identity(self):
        power = np.linspace(0.0, 30.0, 301)
        back = service_curve_inverse(service_curve(power))
        assert np.max(np.abs(back - power)) < 1e-10

    def test_negative_target_rejected(self):
        with pytest.raises(ProblemError):
            service_curve_inverse(-0.1)


class TestSyntheticProblem:
    def test_unconstrained_degenerate(self):
        prob = build_synthetic_problem(4, 0, 0, seed=0)
        assert prob.n_ineq == 0 and prob.n_eq == 0
        slot = prob.sample_slot(3, np.random.default_rng(0))
        assert slot.inequalities == ()
        assert slot.eq_matrix.shape == (0, 4)

    def test_too_many_equalities(self):
        with pytest.raises(ProblemError):
            build_synthetic_problem(3, 0, 3, seed=0)

    def test_equality_rows_independent_and_feasible(self):
        prob = build_synthetic_problem(10, 2, 2, seed=5)
        rows = prob.means.eq_matrix
        assert np.linalg.matrix_rank(rows) == 2
        # The targets come from an interior anchor, so some simplex point
        # meets the equalities with margin to spare on the inequalities.
        # Recover one by least squares restricted to the affine slice.
        d = prob.dimension
        aug = np.vstack([rows, np.ones(d)])
        rhs = np.concatenate([prob.targets, [1.0]])
        anchor, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
        assert np.all(anchor > 0.0)
        for fn in prob.means.inequalities:
            assert fn.value(anchor) < 0.0

    def test_sampling_deterministic(self):
        prob = build_synthetic_problem(6, 2, 1, seed=9)
        s1 = prob.sample_slot(7, np.random.default_rng(123))
        s2 = prob.sample_slot(7, np.random.default_rng(123))
        mu = np.full(6, 1.0 / 6)
        assert s1.objective.value(mu) == s2.objective.value(mu)
        assert np.array_equal(s1.eq_matrix, s2.eq_matrix)

    def test_monte_carlo_means_match(self):
        prob = build_synthetic_problem(5, 2, 2, seed=11)
        rng = np.random.default_rng(42)
        mu = np.random.default_rng(1).dirichlet(np.ones(5))
        n = 100_000
        t = 13  # any fixed slot: the noise is i.i.d. across slots
        obj_sum = 0.0
        g_sum = np.zeros(2)
        h_sum = np.zeros((2, 5))
        for _ in range(n):
            slot = prob.sample_slot(t, rng)
            obj_sum += slot.objective.value(mu)
            g_sum += [fn.value(mu) for fn in slot.inequalities]
            h_sum += slot.eq_matrix
        mean_obj = prob.means.objective_at(t).value(mu)
        # noise is U[-s, s] per coefficient: var = s^2/3 per entry
        obj_sigma = np.sqrt((0.2**2 / 3) * np.sum(mu**2) / n)
        assert abs(obj_sum / n - mean_obj) < 3 * obj_sigma + 1e-12
        for i, fn in enumerate(prob.means.inequalities):
            g_sigma = np.sqrt((0.2**2 / 3) * np.sum(mu**2) / n)
            assert abs(g_sum[i] / n - fn.value(mu)) < 3 * g_sigma + 1e-12
        h_sigma = np.sqrt((0.1**2 / 3) / n)
        assert np.max(np.abs(h_sum / n - prob.means.eq_matrix)) < 3 * h_sigma

    def test_split_half_iid(self):
        # Constraint streams must not depend on the slot index.
        prob = build_synthetic_problem(5, 1, 1, seed=3)
        mu = np.full(5, 0.2)
        rng = np.random.default_rng(8)
        early = [prob.sample_slot(t, rng).inequalities[0].value(mu) for t in range(4000)]
        late = [
            prob.sample_slot(t, rng).inequalities[0].value(mu)
            for t in range(100_000, 104_000)
        ]
        pooled = np.std(early + late) / np.sqrt(len(early))
        assert abs(np.mean(early) - np.mean(late)) < 3 * pooled

    def test_constants_dominate_samples(self):
        # The stored bounds are aggregate (in quadrature over constraints).
        prob = build_synthetic_problem(6, 2, 2, seed=21)
        rng = np.random.default_rng(0)
        simplex = Simplex(6)
        for dual_norm, vec_norm in (("l2", 2), ("linf", np.inf)):
            c = prob.constants_for(dual_norm)
            for t in range(500):
                slot = prob.sample_slot(t, rng)
                mu = simplex.sample(rng)
                assert np.linalg.norm(slot.objective.grad(mu), vec_norm) <= c.objective_grad_bound + 1e-12
                assert abs(slot.objective.value(mu)) <= c.objective_value_bound + 1e-12
                grad_quad = sum(
                    np.linalg.norm(fn.grad(mu), vec_norm) ** 2
                    for fn in slot.inequalities
                )
                value_quad = sum(fn.value(mu) ** 2 for fn in slot.inequalities)
                assert np.sqrt(grad_quad) <= c.ineq_grad_bound + 1e-12
                assert np.sqrt(value_quad) <= c.ineq_value_bound + 1e-12
                row_quad = sum(
                    np.linalg.norm(row, vec_norm) ** 2 for row in slot.eq_matrix
                )
                assert np.sqrt(row_quad) <= c.eq_row_bound + 1e-12

    def test_pinned_coordinate_example(self):
        # h = (1,0,0), b = 0.3, objective touches only coordinate 0: the
        # feasible mean objective value is exactly 0.3 at any feasible point.
        prob = make_linear_problem(
            Simplex(3),
            np.array([1.0, 0.0, 0.0]),
            eq_rows=np.array([[1.0, 0.0, 0.0]]),
            targets=np.array([0.3]),
        )
        mu = np.array([0.3, 0.5, 0.2])
        assert abs(prob.means.objective_at(0).value(mu) - 0.3) < 1e-15
        assert abs((prob.means.eq_matrix @ mu)[0] - prob.targets[0]) < 1e-15

    def test_window_objective_averages_drift(self):
        prob = make_linear_problem(
            Simplex(4),
            np.array([0.2, 0.9, 0.4, 0.7]),
            drift_amplitude=0.08,
            drift_period=64,
        )
        window = prob.means.window_objective(10, 5)
        stacked = np.mean(
            [prob.means.objective_at(10 + s).grad(np.zeros(4)) for s in range(5)],
            axis=0,
        )
        assert window.grad(np.zeros(4)) == pytest.approx(stacked, abs=1e-15)
        assert not np.allclose(stacked, prob.means.objective_at(10).grad(np.zeros(4)))


class TestDatacenterProblem:
    def test_zone_count_mismatch(self):
        with pytest.raises(ProblemError):
            build_datacenter_problem(DatacenterConfig(), constant_trace(10, zones=4))

    def test_zero_power_is_infeasible(self):
        prob = build_datacenter_problem(DatacenterConfig(), constant_trace(10))
        slot = prob.sample_slot(0, np.random.default_rng(0))
        zero = np.zeros(50)
        assert slot.inequalities[0].value(zero) > 0.0
        assert np.allclose(slot.eq_matrix @ zero, 0.0)

    def test_mean_inequality_formula(self):
        prob = build_datacenter_problem(DatacenterConfig(), constant_trace(10))
        for c in (0.5, 1.0, 2.0):
            mu = np.full(50, c)
            expected = 1000.0 - 400.0 * np.log(1.0 + 4.0 * c)
            assert abs(prob.means.inequalities[0].value(mu) - expected) < 1e-9

    def test_pacing_mean_residuals(self):
        prob = build_datacenter_problem(DatacenterConfig(), constant_trace(10))
        # Shares exactly matching the ratios zero every expected residual.
        betas = np.array([0.05, 0.10, 0.25, 0.60])
        matched = np.concatenate([
            np.full(10, betas[0] / 10),
            np.full(10, betas[1] / 10),
            np.full(10, betas[2] / 10),
            np.full(20, betas[3] / 20),
        ])
        res = prob.means.eq_matrix @ matched - prob.targets
        assert np.max(np.abs(res)) < 1e-12
        # Uniform power spreads shares 0.2/0.2/0.2/0.4, which is off-ratio.
        uniform = np.full(50, 1.0)
        res_uniform = prob.means.eq_matrix @ uniform - prob.targets
        assert np.max(np.abs(res_uniform)) > 0.1

    def test_sampled_constraint_means(self):
        prob = build_datacenter_problem(DatacenterConfig(), constant_trace(10))
        rng = np.random.default_rng(7)
        mu = np.full(50, 1.0)
        n = 20_000
        g_vals = np.empty(n)
        h_rows = np.zeros((4, 50))
        for i in range(n):
            slot = prob.sample_slot(0, rng)
            g_vals[i] = slot.inequalities[0].value(mu)
            h_rows += slot.eq_matrix
        g_mean = prob.means.inequalities[0].value(mu)
        assert abs(g_vals.mean() - g_mean) < 3 * g_vals.std() / np.sqrt(n)
        assert np.max(np.abs(h_rows / n - prob.means.eq_matrix)) < 0.15

    def test_trace_exhaustion(self):
        prob = build_datacenter_problem(DatacenterConfig(), constant_trace(3))
        assert prob.horizon_cap == 3
        with pytest.raises(ProblemError):
            prob.sample_slot(3, np.random.default_rng(0))

    def test_build_determinism(self):
        trace = constant_trace(5)
        p1 = build_datacenter_problem(DatacenterConfig(), trace)
        p2 = build_datacenter_problem(DatacenterConfig(), trace)
        s1 = p1.sample_slot(1, np.random.default_rng(55))
        s2 = p2.sample_slot(1, np.random.default_rng(55))
        mu = np.full(50, 2.0)
        assert s1.inequalities[0].value(mu) == s2.inequalities[0].value(mu)
        assert np.array_equal(s1.eq_matrix, s2.eq_matrix)
        c1 = p1.constants_for("l2")
        c2 = p2.constants_for("l2")
        assert c1 == c2

    def test_price_trace_validation(self):
        with pytest.raises(ProblemError):
            PriceTrace(("A", "B"), np.ones((4, 3)))
        with pytest.raises(ProblemError):
            PriceTrace(("A", "B"), np.array([[1.0, np.inf], [0.0, 1.0]]))


class TestReacPolicy:
    def test_nominal_forecast(self):
        config = DatacenterConfig()
        mu = reac_policy_step([1000.0], config)
        # Cluster 1 share 5%: 50 jobs over 10 servers, 5 jobs per server.
        assert np.allclose(mu[:10], INVERSE_AT_FIVE, atol=1e-12)
        # Final two clusters split the 60% share evenly: 30 jobs per server.
        expected_heavy = service_curve_inverse(30.0)
        assert np.allclose(mu[30:], expected_heavy, atol=1e-12)

    def test_zero_arrivals(self):
        mu = reac_policy_step([0.0, 0.0], DatacenterConfig())
        assert np.all(mu == 0.0)

    def test_constant_history_constant_output(self):
        config = DatacenterConfig()
        a = reac_policy_step([800.0] * 10, config)
        b = reac_policy_step([800.0] * 4, config)
        assert np.array_equal(a, b)

    def test_history_window_is_ten(self):
        config = DatacenterConfig()
        long_history = [0.0] * 50 + [1000.0] * 10
        a = reac_policy_step(long_history, config)
        b = reac_policy_step([1000.0] * 10, config)
        assert np.array_equal(a, b)

    def test_empty_history_rejected(self):
        with pytest.raises(ProblemError):
            reac_policy_step([], DatacenterConfig())


class TestConfigValidation:
    def test_ratio_sum_enforced(self):
        with pytest.raises(ProblemError):
            DatacenterConfig(pacing_ratios=(0.1, 0.1, 0.1, 0.1))

    def test_cluster_partition_enforced(self):
        bad = (tuple(range(0, 10)),) * 5
        with pytest.raises(ProblemError):
            DatacenterConfig(clusters=bad)
