"""Two-marginal solver: exactness, sparsity, dual certificates, determinism."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motbary import (
    DiscreteMeasure,
    SolverConvergenceError,
    build_cost_matrix,
    solve_ot2,
    solve_ot2_full,
    w2_squared,
)
from motbary.lp import solve_block_lp
from motbary.solver import network_simplex

from conftest import monotone_w2_1d

rng = np.random.default_rng(2024)


def random_measure(n, d, seed):
    r = np.random.default_rng(seed)
    return DiscreteMeasure(r.uniform(-1, 1, size=(n, d)), r.dirichlet(np.ones(n)))


def lp_reference_cost(problem):
    """Optimal value by the generic block LP, an independent code path."""
    n, m = problem.cost.shape
    idx = np.stack(
        [np.repeat(np.arange(n), m), n + np.tile(np.arange(m), n)], axis=1
    )
    b = np.concatenate([problem.source.weights, problem.target.weights])
    return solve_block_lp(idx, problem.cost.ravel(), b).objective


class TestCostMatrix:
    def test_one_dimensional_distance(self):
        p = build_cost_matrix(DiscreteMeasure([[0.0]]), DiscreteMeasure([[3.0]]))
        assert p.cost[0, 0] == 9.0

    def test_plane_points(self):
        a = DiscreteMeasure([[-1.0, 5 / 8]])
        b = DiscreteMeasure([[1.0, 5 / 8]])
        assert build_cost_matrix(a, b).cost[0, 0] == 4.0

    def test_identical_measures_zero_diagonal(self):
        m = random_measure(6, 2, 0)
        c = build_cost_matrix(m, m).cost
        assert np.all(np.diag(c) == 0.0)

    def test_transpose_symmetry(self):
        a, b = random_measure(4, 3, 1), random_measure(5, 3, 2)
        assert np.array_equal(
            build_cost_matrix(a, b).cost, build_cost_matrix(b, a).cost.T
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            build_cost_matrix(random_measure(3, 2, 0), random_measure(3, 3, 0))


class TestSolve:
    def test_identical_measures_identity_coupling(self):
        m = random_measure(5, 2, 7)
        coupling, cost = solve_ot2(build_cost_matrix(m, m))
        assert cost == pytest.approx(0.0, abs=1e-15)
        assert np.array_equal(coupling.indices[:, 0], coupling.indices[:, 1])

    def test_monotone_line_coupling(self):
        mu = DiscreteMeasure([[0.0], [3.0]])
        nu = DiscreteMeasure([[1.0], [2.0]])
        coupling, cost = solve_ot2(build_cost_matrix(mu, nu))
        assert cost == pytest.approx(1.0, abs=1e-14)
        assert coupling.indices.tolist() == [[0, 0], [1, 1]]

    @pytest.mark.parametrize("trial", range(20))
    def test_matches_dense_lp(self, trial):
        r = np.random.default_rng(100 + trial)
        a = random_measure(int(r.integers(2, 7)), int(r.integers(1, 4)), 200 + trial)
        b = random_measure(int(r.integers(2, 7)), a.dim, 300 + trial)
        problem = build_cost_matrix(a, b)
        _, cost = solve_ot2(problem)
        ref = lp_reference_cost(problem)
        assert cost == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_matches_quantile_oracle_in_1d(self):
        for trial in range(25):
            a = random_measure(int(rng.integers(2, 9)), 1, 400 + trial)
            b = random_measure(int(rng.integers(2, 9)), 1, 500 + trial)
            _, cost = solve_ot2(build_cost_matrix(a, b))
            assert cost == pytest.approx(monotone_w2_1d(a, b), rel=1e-12, abs=1e-14)

    def test_vertex_sparsity(self):
        for trial in range(20):
            n, m = int(rng.integers(1, 12)), int(rng.integers(1, 12))
            a = random_measure(n, 2, 600 + trial)
            b = random_measure(m, 2, 700 + trial)
            coupling, _ = solve_ot2(build_cost_matrix(a, b))
            assert coupling.n_atoms <= a.n_atoms + b.n_atoms - 1

    def test_dual_certificate(self):
        for trial in range(15):
            a = random_measure(int(rng.integers(2, 10)), 2, 800 + trial)
            b = random_measure(int(rng.integers(2, 10)), 2, 900 + trial)
            problem = build_cost_matrix(a, b)
            res = solve_ot2_full(problem)
            slack = (
                problem.cost
                - res.potential_source[:, None]
                - res.potential_target[None, :]
            )
            assert slack.min() >= -1e-7
            on_support = slack[res.coupling.indices[:, 0], res.coupling.indices[:, 1]]
            assert np.max(np.abs(on_support)) <= 1e-7
            # Strong duality: potentials integrate to the primal cost.
            dual_value = res.potential_source @ a.weights + res.potential_target @ b.weights
            assert dual_value == pytest.approx(res.cost, rel=1e-9, abs=1e-12)

    def test_monotone_in_1d(self):
        for trial in range(15):
            a = random_measure(int(rng.integers(2, 9)), 1, 111 + trial)
            b = random_measure(int(rng.integers(2, 9)), 1, 222 + trial)
            coupling, _ = solve_ot2(build_cost_matrix(a, b))
            xs = a.points[coupling.indices[:, 0], 0]
            ys = b.points[coupling.indices[:, 1], 0]
            order = np.lexsort((ys, xs))
            xs, ys = xs[order], ys[order]
            for i in range(len(xs) - 1):
                if xs[i] < xs[i + 1]:
                    assert ys[i] <= ys[i + 1]

    def test_deterministic(self):
        a = random_measure(7, 2, 42)
        b = random_measure(6, 2, 43)
        p = build_cost_matrix(a, b)
        c1, v1 = solve_ot2(p)
        c2, v2 = solve_ot2(p)
        assert v1 == v2
        assert np.array_equal(c1.indices, c2.indices)
        assert np.array_equal(c1.masses, c2.masses)

    def test_pivot_budget_error(self):
        a = random_measure(6, 2, 50)
        b = random_measure(6, 2, 51)
        with pytest.raises(SolverConvergenceError) as exc:
            network_simplex(a.weights, b.weights, build_cost_matrix(a, b).cost,
                            pivot_budget=1)
        assert exc.value.iterations >= 1

    def test_unbalanced_rejected(self):
        with pytest.raises(ValueError, match="unbalanced"):
            network_simplex(
                np.array([0.7, 0.7]), np.array([0.5, 0.5]), np.zeros((2, 2))
            )

    def test_large_problem_cost_branch(self):
        # Above the memory cutoff the cost matrix switches to the
        # dot-product formula; both must agree to float tolerance.
        from motbary.solver import squared_distances

        r = np.random.default_rng(60)
        x = r.normal(size=(40, 3))
        y = r.normal(size=(50, 3))
        small = squared_distances(x, y)
        big_x = np.tile(x, (80, 1))  # push n*m*d over the cutoff
        big = squared_distances(big_x, y)[: x.shape[0]]
        assert np.allclose(big, small, rtol=1e-9, atol=1e-9)

    def test_single_atom_sides(self):
        one = DiscreteMeasure([[0.5, 0.5]])
        many = random_measure(7, 2, 61)
        for a, b in ((one, many), (many, one), (one, one)):
            coupling, cost = solve_ot2(build_cost_matrix(a, b))
            assert coupling.n_atoms <= a.n_atoms + b.n_atoms - 1
            direct = float(
                np.sum(
                    a.weights[:, None]
                    * b.weights[None, :]
                    * build_cost_matrix(a, b).cost
                )
            )
            # With a point mass on one side the product coupling is optimal.
            assert cost == pytest.approx(direct, rel=1e-12)

    def test_general_cost_matrix(self):
        # The internal entry point accepts arbitrary nonnegative costs.
        r = np.random.default_rng(9)
        cost = r.uniform(0, 5, size=(4, 6))
        a = r.dirichlet(np.ones(4))
        b = r.dirichlet(np.ones(6))
        rows, cols, flow, u, v, obj, _ = network_simplex(a, b, cost)
        idx = np.stack([np.repeat(np.arange(4), 6), 4 + np.tile(np.arange(6), 4)], 1)
        ref = solve_block_lp(idx, cost.ravel(), np.concatenate([a, b])).objective
        assert obj == pytest.approx(ref, rel=1e-9)


class TestW2:
    def test_zero_on_identical(self):
        m = random_measure(5, 3, 77)
        assert w2_squared(m, m) == 0.0

    def test_line_example_distance(self):
        nu_tilde = DiscreteMeasure([[4 / 3], [5 / 3]])
        nu_hat = DiscreteMeasure([[2 / 3], [7 / 3]])
        assert w2_squared(nu_tilde, nu_hat) == pytest.approx(4 / 9, abs=1e-12)

    def test_symmetry(self):
        a, b = random_measure(5, 2, 30), random_measure(7, 2, 31)
        assert w2_squared(a, b) == pytest.approx(w2_squared(b, a), rel=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-50, 50), st.floats(-50, 50))
    def test_translation_invariance(self, seed, tx, ty):
        r = np.random.default_rng(seed)
        a = DiscreteMeasure(r.uniform(-1, 1, (4, 2)), r.dirichlet(np.ones(4)))
        b = DiscreteMeasure(r.uniform(-1, 1, (5, 2)), r.dirichlet(np.ones(5)))
        shift = np.array([tx, ty])
        a2 = DiscreteMeasure(a.points + shift, a.weights)
        b2 = DiscreteMeasure(b.points + shift, b.weights)
        base = w2_squared(a, b)
        assert w2_squared(a2, b2) == pytest.approx(base, rel=1e-9, abs=1e-9)
