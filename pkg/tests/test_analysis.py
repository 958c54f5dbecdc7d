"""Cost functionals, bounds, baselines and report assembly."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motbary import (
    DiscreteMeasure,
    MultiMarginalPlan,
    SimplexWeights,
    baseline_best_input,
    baseline_mixture,
    exact_mot_lp,
    greedy_algorithm,
    make_report,
    pairwise_lower_bound,
    phi_cost,
    psi_cost,
    pushforward_mean,
    reference_algorithm,
    w2_squared,
)
from motbary.analysis import BoundConstants, harmonic_number

from conftest import random_instance


class TestPhiCost:
    def test_goldens(self, line_example):
        measures, lam, optimal, antisorted = line_example
        assert phi_cost(optimal, lam) == pytest.approx(2 / 9, abs=1e-12)
        assert phi_cost(antisorted, lam) == pytest.approx(8 / 9, abs=1e-12)

    def test_diagonal_tuples_cost_zero(self):
        m = DiscreteMeasure(np.random.default_rng(0).random((4, 2)))
        lam = SimplexWeights.uniform(3)
        plan = MultiMarginalPlan(
            (m, m, m),
            np.tile(np.arange(4)[:, None], (1, 3)),
            m.weights,
        )
        assert phi_cost(plan, lam) == 0.0

    def test_weight_length_mismatch(self, line_example):
        _, _, optimal, _ = line_example
        with pytest.raises(ValueError):
            phi_cost(optimal, SimplexWeights.uniform(4))

    def test_variance_and_pairwise_forms_agree(self):
        rng = np.random.default_rng(1)
        for _ in range(12):
            measures, lam = random_instance(rng)
            plan = greedy_algorithm(measures, lam)
            a = phi_cost(plan, lam, method="variance")
            b = phi_cost(plan, lam, method="pairwise")
            assert a == pytest.approx(b, rel=1e-10, abs=1e-14)

    def test_translation_and_scaling(self):
        rng = np.random.default_rng(2)
        measures, lam = random_instance(rng, n_measures=3, dims=(2,))
        plan = greedy_algorithm(measures, lam)
        base = phi_cost(plan, lam)
        shift, scale = rng.normal(size=2), 2.5
        moved = tuple(
            DiscreteMeasure(m.points + shift, m.weights) for m in measures
        )
        scaled = tuple(
            DiscreteMeasure(m.points * scale, m.weights) for m in measures
        )
        moved_plan = MultiMarginalPlan(moved, plan.indices, plan.masses)
        scaled_plan = MultiMarginalPlan(scaled, plan.indices, plan.masses)
        assert phi_cost(moved_plan, lam) == pytest.approx(base, rel=1e-9)
        assert phi_cost(scaled_plan, lam) == pytest.approx(
            scale**2 * base, rel=1e-9
        )


class TestPsiCost:
    def test_golden(self, line_example):
        measures, lam, _, antisorted = line_example
        nu_tilde = pushforward_mean(antisorted, lam)
        assert psi_cost(nu_tilde, measures, lam) == pytest.approx(6 / 9, abs=1e-12)

    def test_zero_for_identical(self):
        m = DiscreteMeasure(np.random.default_rng(3).random((5, 2)))
        lam = SimplexWeights.uniform(3)
        assert psi_cost(m, [m, m, m], lam) == 0.0

    def test_matches_phi_for_exact_barycenter(self):
        rng = np.random.default_rng(4)
        for _ in range(8):
            measures, lam = random_instance(rng, max_atoms=4)
            plan, phi = exact_mot_lp(measures, lam)
            bary = pushforward_mean(plan, lam)
            assert psi_cost(bary, measures, lam) == pytest.approx(
                phi, rel=1e-8, abs=1e-12
            )


class TestPairwiseLowerBound:
    def test_line_example_tight(self, line_example):
        measures, lam, _, _ = line_example
        assert pairwise_lower_bound(measures, lam) == pytest.approx(
            2 / 9, abs=1e-12
        )

    def test_zero_for_identical(self):
        m = DiscreteMeasure(np.random.default_rng(5).random((4, 2)))
        assert pairwise_lower_bound([m, m, m], SimplexWeights.uniform(3)) == 0.0

    def test_two_measures_single_pair(self):
        rng = np.random.default_rng(6)
        measures, lam = random_instance(rng, n_measures=2)
        expected = lam[0] * lam[1] * w2_squared(*measures)
        assert pairwise_lower_bound(measures, lam) == pytest.approx(
            expected, rel=1e-12
        )

    def test_below_optimum(self):
        rng = np.random.default_rng(7)
        for _ in range(8):
            measures, lam = random_instance(rng, max_atoms=4)
            _, phi = exact_mot_lp(measures, lam)
            assert pairwise_lower_bound(measures, lam) <= phi + 1e-9


class TestBaselines:
    def test_best_input_selection(self):
        rng = np.random.default_rng(8)
        measures, _ = random_instance(rng, n_measures=3)
        lam = SimplexWeights([0.6, 0.2, 0.2])
        best, value = baseline_best_input(measures, lam)
        assert best is measures[0]
        assert value == pytest.approx(psi_cost(measures[0], measures, lam))

    def test_best_input_ratio_bound(self):
        rng = np.random.default_rng(9)
        for _ in range(8):
            measures, lam = random_instance(rng, max_atoms=4)
            _, psi_value = baseline_best_input(measures, lam)
            _, phi_opt = exact_mot_lp(measures, lam)
            k = int(np.argmax(lam.values))
            if phi_opt > 1e-15:
                assert psi_value / phi_opt <= 1.0 / lam[k] + 1e-6

    def test_mixture_ratio_bound(self):
        rng = np.random.default_rng(10)
        for _ in range(8):
            measures, lam = random_instance(rng, max_atoms=4)
            _, psi_value = baseline_mixture(measures, lam)
            _, phi_opt = exact_mot_lp(measures, lam)
            if phi_opt > 1e-15:
                assert psi_value / phi_opt <= 2.0 + 1e-6

    def test_identical_measures(self):
        m = DiscreteMeasure(np.random.default_rng(11).random((4, 2)))
        lam = SimplexWeights.uniform(2)
        mix, psi_value = baseline_mixture([m, m], lam)
        assert mix.allclose(m)
        assert psi_value == 0.0

    def test_dirac_pair_mixture(self):
        a, b = DiscreteMeasure([[0.0]]), DiscreteMeasure([[2.0]])
        lam = SimplexWeights([0.5, 0.5])
        mix, psi_value = baseline_mixture([a, b], lam)
        assert mix.n_atoms == 2
        # Each marginal ships half its mass across distance 2 to reach the
        # half-half mixture, so psi = 2 and the factor-2 bound is tight.
        assert psi_value == pytest.approx(2.0, abs=1e-12)
        _, phi_opt = exact_mot_lp([a, b], lam)
        assert psi_value / phi_opt == pytest.approx(2.0, abs=1e-9)


class TestConstantsAndReport:
    def test_harmonic_matches_exact_rationals(self):
        for n in range(1, 21):
            exact = float(sum(Fraction(1, i) for i in range(1, n + 1)))
            assert abs(harmonic_number(n) - exact) <= 1e-14

    def test_constants_table(self):
        lam = SimplexWeights([0.5, 0.3, 0.2])
        c = BoundConstants.for_instance(lam)
        assert c.inv_lambda1 == pytest.approx(2.0)
        assert c.greedy_upper == pytest.approx((2 * 9 - 5) / 3)
        assert c.greedy_random_upper == pytest.approx((33 - 4 - 3) / 12)
        assert c.reference_random_upper == 2.0

    def test_report_exact_plan(self, line_example):
        measures, lam, optimal, _ = line_example
        report = make_report(optimal, measures, lam, use_oracle=True)
        assert report.ratio_vs_exact == pytest.approx(1.0, abs=1e-9)
        assert report.ratio_vs_exact <= report.ratio_vs_lb + 1e-9
        assert not report.bound_violations
        assert report.phi >= report.psi - 1e-8

    def test_report_degenerate_ratios(self):
        m = DiscreteMeasure(np.random.default_rng(12).random((3, 2)))
        lam = SimplexWeights.uniform(3)
        plan = greedy_algorithm([m, m, m], lam)
        report = make_report(plan, [m, m, m], lam, use_oracle=True)
        assert report.ratio_vs_lb == 1.0
        assert report.ratio_vs_exact == 1.0

    def test_report_serializes(self, line_example):
        import json

        measures, lam, optimal, _ = line_example
        report = make_report(optimal, measures, lam)
        data = json.loads(report.to_json())
        assert data["phi"] == pytest.approx(2 / 9)
        assert data["bound_constants"]["n_marginals"] == 3

    def test_report_flags_algorithms(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            measures, lam = random_instance(rng, max_atoms=4)
            plan = reference_algorithm(measures, lam)
            report = make_report(
                plan, measures, lam, use_oracle=True, algorithm="reference"
            )
            assert not report.bound_violations


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 6),
    st.integers(1, 3),
    st.integers(0, 10_000),
)
def test_weighted_mean_identity(n, d, seed):
    # For any points, weights and probe point, the weighted squared
    # distances split into the mean part plus the spread part.
    r = np.random.default_rng(seed)
    x = r.normal(scale=3.0, size=(n, d))
    y = r.normal(scale=3.0, size=d)
    lam = r.dirichlet(np.ones(n))
    m = lam @ x
    lhs = float(np.sum(lam * ((x - y) ** 2).sum(axis=1)))
    rhs = float(((m - y) ** 2).sum() + np.sum(lam * ((x - m) ** 2).sum(axis=1)))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
