"""Shared fixtures: the worked two-atom line example and instance helpers."""

import numpy as np
import pytest

from motbary import DiscreteMeasure, MultiMarginalPlan, SimplexWeights
from motbary.generators import gen_random_clouds


@pytest.fixture
def line_example():
    """Three two-atom measures on the line with uniform weights 1/3.

    Supports {0, 3}, {1, 2}, {1, 2}.  The optimal plan couples (0, 1, 1)
    and (3, 2, 2) with cost 2/9; the anti-sorted plan (0, 2, 2), (3, 1, 1)
    costs 8/9.  Their mean pushforwards are {2/3, 7/3} and {4/3, 5/3}.
    """
    mu1 = DiscreteMeasure([[0.0], [3.0]])
    mu2 = DiscreteMeasure([[1.0], [2.0]])
    mu3 = DiscreteMeasure([[1.0], [2.0]])
    measures = (mu1, mu2, mu3)
    lam = SimplexWeights.uniform(3)
    optimal = MultiMarginalPlan(measures, [[0, 0, 0], [1, 1, 1]], [0.5, 0.5])
    antisorted = MultiMarginalPlan(measures, [[0, 1, 1], [1, 0, 0]], [0.5, 0.5])
    return measures, lam, optimal, antisorted


def random_simplex(rng, n, floor=0.05):
    v = rng.dirichlet(np.ones(n)) + floor
    return SimplexWeights(v / v.sum())


def random_instance(rng, n_measures=None, max_atoms=5, dims=(1, 2, 3)):
    if n_measures is None:
        n_measures = int(rng.integers(2, 5))
    d = int(rng.choice(dims))
    counts = rng.integers(2, max_atoms + 1, size=n_measures)
    measures = gen_random_clouds(
        n_measures, counts, d, seed=int(rng.integers(2**31))
    )
    return measures, random_simplex(rng, n_measures)


def monotone_w2_1d(mu, nu):
    """Quantile-coupling cost, the optimal transport cost on the line.

    Independent of the simplex solver: sorts both supports and consumes
    mass in order.
    """
    xo = np.argsort(mu.points[:, 0], kind="stable")
    yo = np.argsort(nu.points[:, 0], kind="stable")
    xs, ws = mu.points[xo, 0], mu.weights[xo].copy()
    ys, vs = nu.points[yo, 0], nu.weights[yo].copy()
    i = j = 0
    total = 0.0
    while i < len(xs) and j < len(ys):
        h = min(ws[i], vs[j])
        total += h * (xs[i] - ys[j]) ** 2
        ws[i] -= h
        vs[j] -= h
        if ws[i] <= 1e-15:
            i += 1
        if j < len(ys) and vs[j] <= 1e-15:
            j += 1
    return total
