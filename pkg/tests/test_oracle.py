"""Exact LP oracle: golden values, cross-checks, optimality certificates."""

import math

import numpy as np
import pytest
from scipy import sparse
from scipy.optimize import linprog

from motbary import (
    DiscreteMeasure,
    MultiMarginalPlan,
    OracleSizeError,
    SimplexWeights,
    exact_barycenter,
    exact_mot_lp,
    optimality_side_conditions,
    pushforward_mean,
    sorting_property_check,
    w2_squared,
)
from motbary.analysis import pairwise_lower_bound, phi_cost, psi_cost
from motbary.oracle import mot_tuple_costs

from conftest import random_instance


def scipy_mot_value(measures, lam):
    """Third-party LP route, used in tests only as an extra cross-check."""
    sizes = [m.n_atoms for m in measures]
    N = len(measures)
    T = math.prod(sizes)
    tuples = np.indices(sizes).reshape(N, -1).T
    pts = np.stack([measures[i].points[tuples[:, i]] for i in range(N)], axis=1)
    c = mot_tuple_costs(pts, lam)
    offs = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    rows = (tuples + offs).ravel()
    cols = np.repeat(np.arange(T), N)
    A = sparse.coo_matrix(
        (np.ones(T * N), (rows, cols)), shape=(sum(sizes), T)
    ).tocsr()
    b = np.concatenate([m.weights for m in measures])
    res = linprog(c, A_eq=A, b_eq=b, method="highs")
    assert res.status == 0, res.message
    return res.fun


class TestExactMotLp:
    def test_line_example_golden(self, line_example):
        measures, lam, optimal, _ = line_example
        plan, phi = exact_mot_lp(measures, lam)
        assert phi == pytest.approx(2 / 9, abs=1e-12)
        assert plan.allclose(optimal)

    def test_two_marginals_reduce_to_scaled_w2(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            measures, lam = random_instance(rng, n_measures=2)
            _, phi = exact_mot_lp(measures, lam)
            expected = lam[0] * lam[1] * w2_squared(*measures)
            assert phi == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_one_dimensional_bound_is_tight(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            measures, lam = random_instance(rng, dims=(1,))
            _, phi = exact_mot_lp(measures, lam)
            lb = pairwise_lower_bound(measures, lam)
            assert phi == pytest.approx(lb, rel=1e-9, abs=1e-12)

    def test_matches_scipy(self):
        rng = np.random.default_rng(6)
        for _ in range(15):
            measures, lam = random_instance(rng)
            _, phi = exact_mot_lp(measures, lam)
            assert phi == pytest.approx(
                scipy_mot_value(measures, lam), rel=1e-9, abs=1e-11
            )

    def test_vertex_sparsity(self):
        rng = np.random.default_rng(7)
        for _ in range(15):
            measures, lam = random_instance(rng)
            plan, _ = exact_mot_lp(measures, lam)
            bound = sum(m.n_atoms for m in measures) - len(measures) + 1
            assert plan.n_atoms <= bound

    def test_optimum_below_any_feasible_plan(self):
        from motbary import greedy_algorithm, reference_algorithm

        rng = np.random.default_rng(8)
        for _ in range(10):
            measures, lam = random_instance(rng)
            _, phi = exact_mot_lp(measures, lam)
            for algo in (greedy_algorithm, reference_algorithm):
                assert phi <= phi_cost(algo(measures, lam), lam) + 1e-9

    def test_size_guard(self, line_example):
        measures, lam, _, _ = line_example
        with pytest.raises(OracleSizeError):
            exact_mot_lp(measures, lam, size_guard=7)


class TestExactBarycenter:
    def test_line_example(self, line_example):
        measures, lam, _, _ = line_example
        bary = exact_barycenter(measures, lam)
        assert sorted(bary.points[:, 0]) == pytest.approx([2 / 3, 7 / 3])
        psi = psi_cost(bary, measures, lam)
        assert psi == pytest.approx(2 / 9, abs=1e-12)

    def test_midpoint_of_two_diracs(self):
        a = DiscreteMeasure([[0.0]])
        b = DiscreteMeasure([[2.0]])
        bary = exact_barycenter([a, b], SimplexWeights([0.5, 0.5]))
        assert bary.n_atoms == 1 and bary.points[0, 0] == pytest.approx(1.0)

    def test_support_inside_mean_grid(self):
        rng = np.random.default_rng(9)
        for _ in range(8):
            measures, lam = random_instance(rng, n_measures=3, max_atoms=4)
            bary = exact_barycenter(measures, lam)
            sizes = [m.n_atoms for m in measures]
            tuples = np.indices(sizes).reshape(3, -1).T
            grid = sum(
                lam[i] * measures[i].points[tuples[:, i]] for i in range(3)
            )
            for p in bary.points:
                dist = np.min(((grid - p) ** 2).sum(axis=1))
                assert dist <= 1e-18


class TestSortingProperty:
    def test_optimal_plan_sorted(self, line_example):
        _, _, optimal, antisorted = line_example
        assert sorting_property_check(optimal) is True
        assert sorting_property_check(antisorted) is False

    def test_single_atom(self):
        a = DiscreteMeasure([[1.0]])
        b = DiscreteMeasure([[2.0]])
        plan = MultiMarginalPlan((a, b), [[0, 0]], [1.0])
        assert sorting_property_check(plan)

    def test_rejects_higher_dimension(self):
        a = DiscreteMeasure([[0.0, 0.0]])
        b = DiscreteMeasure([[1.0, 1.0]])
        plan = MultiMarginalPlan((a, b), [[0, 0]], [1.0])
        with pytest.raises(ValueError):
            sorting_property_check(plan)

    def test_equivalent_to_optimality_in_1d(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            measures, lam = random_instance(rng, dims=(1,), max_atoms=4)
            plan, phi = exact_mot_lp(measures, lam)
            assert sorting_property_check(plan)


class TestSideConditions:
    def test_line_example_equality_case(self, line_example):
        measures, lam, optimal, antisorted = line_example
        nu_tilde = pushforward_mean(antisorted, lam)
        nu_hat = pushforward_mean(optimal, lam)
        psi_tilde = psi_cost(nu_tilde, measures, lam)
        psi_hat = psi_cost(nu_hat, measures, lam)
        w2 = w2_squared(nu_tilde, nu_hat)
        # The cost-distance estimate is tight here for barycenter costs.
        assert psi_tilde == pytest.approx(psi_hat + w2, abs=1e-12)
        # It must NOT be applied to plan costs: the suboptimal plan breaks it.
        assert phi_cost(antisorted, lam) > phi_cost(optimal, lam) + w2 + 1e-3

        report = optimality_side_conditions(optimal, lam, candidates=[nu_tilde])
        assert report.max_coupling_gap <= 1e-8
        assert report.max_cost_distance_violation <= 1e-8

    def test_oracle_plans_satisfy_coupling_condition(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            measures, lam = random_instance(rng, max_atoms=4)
            plan, _ = exact_mot_lp(measures, lam)
            report = optimality_side_conditions(plan, lam)
            assert report.max_coupling_gap <= 1e-8
            assert report.max_cost_distance_violation <= 1e-8
