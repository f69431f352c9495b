"""Worst-case cost machinery, mirror descent, and the sphere closed form."""

import numpy as np
import pytest

from conftest import random_feasible_measure
from wproj.base_measure import (
    BaseMeasureProblem,
    best_uniform_scale,
    optimize_base_measure,
    sphere_base_measure,
    sphere_cap_cost,
    sphere_cap_mass,
    sphere_gap_curve,
    sphere_total_cost,
    subgradient,
    thresholds,
    worst_case_f,
)
from wproj.exact import project_dirac_closed_form, project_exact, wasserstein
from wproj.geometry import CostMatrix, Ring, build_cost_matrix
from wproj.polytope import LdpPolytope


def swap_problem(eps=2 * np.log(2)):
    cm = CostMatrix(costs=np.array([[0.0, 1.0], [1.0, 0.0]]), p=2.0)
    return BaseMeasureProblem.from_cost(cm, eps)


def brute_force_threshold(c_row, m, alpha, beta):
    """Directly scan candidate cost values for the smallest admissible one."""
    for t in np.unique(c_row):
        if beta * m[c_row <= t].sum() + alpha * m[c_row > t].sum() >= 1.0 - 1e-12:
            return t
    return c_row.max()


class TestWorstCase:
    def test_symmetric_two_point(self):
        f, i_star, tau = worst_case_f(swap_problem(), np.array([0.5, 0.5]))
        assert f == pytest.approx(0.25, abs=1e-12)
        assert f ** 0.5 == pytest.approx(0.5)  # p = 2 utility
        np.testing.assert_allclose(tau, [0.0, 0.0])

    def test_constant_costs(self, rng):
        cm = CostMatrix(costs=np.full((4, 6), 1.7), p=1.0)
        problem = BaseMeasureProblem.from_cost(cm, 2.0)
        for _ in range(5):
            m = random_feasible_measure(rng, 6, 2.0)
            f, _, _ = worst_case_f(problem, m)
            assert f == pytest.approx(1.7, abs=1e-12)

    def test_circulant_rows_tie_under_uniform_measure(self):
        cm = build_cost_matrix(Ring(9), p=2.0)
        problem = BaseMeasureProblem.from_cost(cm, 2.0)
        m = np.full(9, 1.0 / 9.0)
        tau = thresholds(problem, m)
        f, _, _ = worst_case_f(problem, m)
        np.testing.assert_allclose(tau, tau[0])
        # every row achieves the max on a circulant matrix
        diff = cm.costs - tau[:, None]
        a, b = problem.alpha, problem.beta
        phis = tau + np.where(diff >= 0, a * diff, b * diff) @ m
        np.testing.assert_allclose(phis, f, atol=1e-12)

    def test_mass_interval_enforced(self):
        problem = swap_problem()
        with pytest.raises(ValueError, match="outside"):
            worst_case_f(problem, np.array([5.0, 5.0]))

    def test_matches_dirac_solver_rowwise(self, rng):
        """phi values agree with the standalone point-mass projection."""
        cm = CostMatrix(costs=rng.uniform(0, 4, size=(5, 7)), p=2.0)
        eps = 1.3
        problem = BaseMeasureProblem.from_cost(cm, eps)
        for _ in range(10):
            m = random_feasible_measure(rng, 7, eps)
            Q = LdpPolytope(m=m, epsilon=eps)
            f, i_star, tau = worst_case_f(problem, m)
            phis = [project_dirac_closed_form(cm.costs[i], Q)[0] for i in range(5)]
            assert f == pytest.approx(max(phis), abs=1e-10)
            assert i_star == int(np.argmax(phis))

    def test_thresholds_match_definition(self, rng):
        cm = CostMatrix(costs=rng.choice([0.0, 1.0, 1.0, 2.0, 3.0], size=(6, 5)), p=1.0)
        eps = 1.8
        problem = BaseMeasureProblem.from_cost(cm, eps)
        for _ in range(10):
            m = random_feasible_measure(rng, 5, eps)
            tau = thresholds(problem, m)
            for i in range(6):
                want = brute_force_threshold(cm.costs[i], m, problem.alpha, problem.beta)
                assert tau[i] == pytest.approx(want, abs=1e-12)


class TestSubgradient:
    def test_zero_for_constant_row(self, rng):
        cm = CostMatrix(costs=np.full((3, 4), 2.0), p=1.0)
        problem = BaseMeasureProblem.from_cost(cm, 2.0)
        g = subgradient(problem, random_feasible_measure(rng, 4, 2.0))
        np.testing.assert_allclose(g, 0.0, atol=1e-12)

    def test_bounded_by_beta_dp(self, rng):
        cm = CostMatrix(costs=rng.uniform(0, 5, size=(6, 6)), p=2.0)
        problem = BaseMeasureProblem.from_cost(cm, 3.0)
        for _ in range(10):
            g = subgradient(problem, random_feasible_measure(rng, 6, 3.0))
            assert np.abs(g).max() <= problem.beta * problem.D_p + 1e-12

    def test_convexity_certificate(self, rng):
        """First-order lower bound of the worst row holds at random points."""
        cm = CostMatrix(costs=rng.uniform(0, 4, size=(5, 4)), p=2.0)
        eps = 2.2
        problem = BaseMeasureProblem.from_cost(cm, eps)
        m = random_feasible_measure(rng, 4, eps)
        f, i_star, tau = worst_case_f(problem, m)
        g = subgradient(problem, m)
        Q = LdpPolytope(m=m, epsilon=eps)
        phi_at_m = project_dirac_closed_form(cm.costs[i_star], Q)[0]
        for _ in range(100):
            m2 = random_feasible_measure(rng, 4, eps)
            phi2 = project_dirac_closed_form(cm.costs[i_star], LdpPolytope(m=m2, epsilon=eps))[0]
            assert phi2 >= phi_at_m + g @ (m2 - m) - 1e-9

    def test_finite_differences_at_smooth_point(self):
        """Central differences of the worst row's value match the subgradient
        away from threshold kinks."""
        cm = CostMatrix(costs=np.array([[0.0, 1.0, 3.0], [2.0, 0.5, 1.0]]), p=1.0)
        eps = 2.0
        problem = BaseMeasureProblem.from_cost(cm, eps)
        m = np.array([0.45, 0.33, 0.27])
        f, i_star, _ = worst_case_f(problem, m)
        g = subgradient(problem, m)
        h = 1e-6
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            up = project_dirac_closed_form(cm.costs[i_star], LdpPolytope(m=m + e, epsilon=eps))[0]
            dn = project_dirac_closed_form(cm.costs[i_star], LdpPolytope(m=m - e, epsilon=eps))[0]
            assert (up - dn) / (2 * h) == pytest.approx(g[j], abs=1e-5)


class TestConvexityOfF:
    def test_interpolation_inequality(self, rng):
        cm = CostMatrix(costs=rng.uniform(0, 3, size=(6, 5)), p=2.0)
        eps = 1.5
        problem = BaseMeasureProblem.from_cost(cm, eps)
        for _ in range(100):
            m1 = random_feasible_measure(rng, 5, eps)
            m2 = random_feasible_measure(rng, 5, eps)
            theta = rng.uniform()
            f1, _, _ = worst_case_f(problem, m1)
            f2, _, _ = worst_case_f(problem, m2)
            fmid, _, _ = worst_case_f(problem, theta * m1 + (1 - theta) * m2)
            assert fmid <= theta * f1 + (1 - theta) * f2 + 1e-9


class TestOptimizeBaseMeasure:
    def test_single_step_returns_projected_start(self):
        problem = swap_problem()
        m_bar, history = optimize_base_measure(problem, T=1)
        np.testing.assert_allclose(m_bar, 1.0 / (problem.alpha * 2))
        assert len(history) == 1

    def test_rejects_bad_T(self):
        with pytest.raises(ValueError):
            optimize_base_measure(swap_problem(), T=0)

    def test_average_stays_feasible(self, rng):
        cm = CostMatrix(costs=rng.uniform(0, 3, size=(7, 5)), p=2.0)
        problem = BaseMeasureProblem.from_cost(cm, 2.0)
        m_bar, history = optimize_base_measure(problem, T=500)
        lo, hi = problem.mass_interval
        assert lo - 1e-12 <= m_bar.sum() <= hi + 1e-12
        assert np.all(m_bar > 0)
        assert len(history) == 500

    def test_beats_best_uniform_within_regret(self):
        """On a ring, some uniform-direction measure is optimal, so the
        averaged iterate lands within the regret bound of the best scale."""
        cm = build_cost_matrix(Ring(10), p=2.0)
        problem = BaseMeasureProblem.from_cost(cm, 2.0)
        T = 4000
        m_bar, _ = optimize_base_measure(problem, T)
        f_bar, _, _ = worst_case_f(problem, m_bar)
        _, f_uniform = best_uniform_scale(problem)
        regret = (problem.beta * problem.D_p / problem.alpha) * np.sqrt(
            2 * (1 + np.log(10)) / T
        )
        assert f_bar <= f_uniform + regret + 1e-9

    def test_two_output_grid_oracle_regret(self, rng):
        """Exhaustive 2-d search certifies the mirror-descent regret bound."""
        cm = CostMatrix(costs=np.array([[0.0, 2.0], [1.5, 0.5], [3.0, 1.0]]), p=2.0)
        eps = 2.0
        problem = BaseMeasureProblem.from_cost(cm, eps)
        f_grid, step = grid_min_two_outputs(cm.costs, eps, resolution=2e-3)
        lip = problem.beta * problem.D_p
        for T in (100, 2000):
            m_bar, _ = optimize_base_measure(problem, T)
            f_bar, _, _ = worst_case_f(problem, m_bar)
            regret = lip / problem.alpha * np.sqrt(2 * (1 + np.log(3)) / T)
            assert f_bar <= f_grid + regret + lip * 2 * step + 1e-9

    def test_decaying_stepsize_mode(self):
        problem = swap_problem()
        m_bar, history = optimize_base_measure(problem, T=200, decaying=True)
        lo, hi = problem.mass_interval
        assert lo - 1e-12 <= m_bar.sum() <= hi + 1e-12


def grid_min_two_outputs(costs, eps, resolution):
    """Independent minimizer for k_v = 2: endpoint analysis of each row's LP
    on a dense (m1, m2) grid.  Returns (best value, grid step)."""
    alpha, beta = np.exp(-eps / 2), np.exp(eps / 2)
    hi = 1.0 / alpha
    step = resolution
    axis = np.arange(0.0, hi + step, step)
    m1, m2 = np.meshgrid(axis, axis, indexing="ij")
    mass = m1 + m2
    ok = (mass >= 1.0 / beta) & (mass <= 1.0 / alpha)
    nu0_lo = np.maximum(alpha * m1, 1.0 - beta * m2)
    nu0_hi = np.minimum(beta * m1, 1.0 - alpha * m2)
    worst = np.full(m1.shape, -np.inf)
    for c0, c1 in costs:
        nu0 = nu0_hi if c0 < c1 else nu0_lo
        phi = c0 * nu0 + c1 * (1.0 - nu0)
        worst = np.maximum(worst, phi)
    worst[~ok] = np.inf
    return float(worst.min()), step


class TestDiracReduction:
    def test_point_mass_inputs_are_worst(self, rng):
        """The projection's distance to any mixed input never exceeds the
        worst distance over point masses."""
        cm = build_cost_matrix(Ring(5), p=2.0)
        eps = 1.5
        m = np.full(5, 0.75 / 5)
        Q = LdpPolytope(m=m, epsilon=eps)
        worst = 0.0
        for i in range(5):
            mu = np.eye(5)[i]
            nu, _ = project_exact(cm, mu, Q)
            worst = max(worst, wasserstein(cm, mu, nu))
        for _ in range(20):
            mu = rng.dirichlet(np.ones(5))
            nu, _ = project_exact(cm, mu, Q)
            assert wasserstein(cm, mu, nu) <= worst + 1e-9


class TestSphere:
    def test_tiny_epsilon_scale_is_one(self):
        sol = sphere_base_measure(2, 2.0, 1e-6)
        assert abs(sol.alpha_star - 1.0) <= 1e-4
        sol = sphere_base_measure(3, 1.5, 1e-6)
        assert abs(sol.alpha_star - 1.0) <= 1e-4

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    def test_total_squared_cost_is_two(self, d):
        """E[(2 - 2u)] = 2 because the height density is symmetric."""
        assert sphere_total_cost(d, 2.0) == pytest.approx(2.0, abs=1e-9)

    def test_scale_decreasing_in_power(self):
        a1 = sphere_base_measure(2, 1.0, 2.0).alpha_star
        a2 = sphere_base_measure(2, 2.0, 2.0).alpha_star
        a4 = sphere_base_measure(2, 4.0, 2.0).alpha_star
        assert a1 > a2 > a4

    def test_d2_p2_scale_is_exactly_one(self):
        """For d = 2 and squared distance the equation solves in closed form
        and the optimal scale is one at every budget."""
        for eps in (0.5, 2.0, 6.0):
            sol = sphere_base_measure(2, 2.0, eps)
            assert sol.alpha_star == pytest.approx(1.0, abs=1e-10)

    def test_gap_curve_increasing_and_bracketing(self):
        ts = np.linspace(-0.999, 0.999, 2000)
        for p in (1.0, 2.0, 4.0):
            G = sphere_gap_curve(2, p, 2.0, ts)
            assert np.all(np.diff(G) > 0)
            assert G[0] < 0 < G[-1]

    def test_gap_curve_matches_adaptive_quadrature(self):
        d, p, eps = 3, 2.5, 1.7
        A = np.exp(eps / 2) - np.exp(-eps / 2)
        B = np.exp(-eps / 2)
        H = sphere_total_cost(d, p)
        ts = np.array([-0.7, -0.2, 0.3, 0.8])
        G_curve = sphere_gap_curve(d, p, eps, ts)
        for t, got in zip(ts, G_curve):
            want = (
                A * sphere_cap_cost(t, d, p)
                + B * H
                - (2 - 2 * t) ** (p / 2) * (B + A * sphere_cap_mass(t, d))
            )
            assert got == pytest.approx(want, abs=1e-9)

    def test_cap_mass_limits(self):
        assert sphere_cap_mass(-1.0, 2) == pytest.approx(1.0, abs=1e-10)
        assert sphere_cap_mass(1.0, 2) == 0.0
        assert sphere_cap_mass(0.0, 1) == pytest.approx(0.5, abs=1e-10)

    def test_root_satisfies_equation(self):
        d, p, eps = 4, 3.0, 2.5
        sol = sphere_base_measure(d, p, eps)
        A = np.exp(eps / 2) - np.exp(-eps / 2)
        B = np.exp(-eps / 2)
        H = sphere_total_cost(d, p)
        G = (
            A * sphere_cap_cost(sol.t_star, d, p)
            + B * H
            - (2 - 2 * sol.t_star) ** (p / 2) * (B + A * sphere_cap_mass(sol.t_star, d))
        )
        assert abs(G) <= 1e-10
        assert sol.alpha_star == pytest.approx(
            1.0 / (B + A * sphere_cap_mass(sol.t_star, d)), abs=1e-12
        )

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            sphere_base_measure(0, 2.0, 1.0)
        with pytest.raises(ValueError):
            sphere_base_measure(2, 0.5, 1.0)
        with pytest.raises(ValueError):
            sphere_base_measure(2, 2.0, 0.0)


class TestMinimaxOrdering:
    def test_optimized_measure_beats_baselines_on_small_ring(self):
        from wproj.baselines import ExpMechParams, KpmParams, exp_mechanism, kpm_transform

        cm = build_cost_matrix(Ring(6), p=2.0)
        eps = 1.5
        problem = BaseMeasureProblem.from_cost(cm, eps)
        T = 3000
        m_bar, _ = optimize_base_measure(problem, T)
        f_bar, _, _ = worst_case_f(problem, m_bar)
        regret = (problem.beta * problem.D_p / problem.alpha) * np.sqrt(
            2 * (1 + np.log(6)) / T
        )
        kpm = KpmParams(k=6, epsilon=eps)
        exp_params = ExpMechParams(C=cm, epsilon=eps)
        for mech in (lambda x: kpm_transform(kpm, x), lambda x: exp_mechanism(exp_params, x)):
            dirac_max = max(float(cm.costs[i] @ mech(np.eye(6)[i])) for i in range(6))
            assert f_bar <= dirac_max + regret + 1e-9
