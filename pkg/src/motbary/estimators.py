"""Scikit-learn style estimator facade over the plan algorithms.

``MOTBarycenter.fit`` computes a sparse multi-marginal plan for a list of
measures and stores its mean pushforward as the fitted barycenter.
``transform`` maps new weight vectors through the already-fitted plan,
which is the cheap way to sweep a whole grid of interpolation weights from
a single solve.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .algorithms import (
    greedy_algorithm,
    randomized_greedy,
    randomized_reference,
    reference_algorithm,
)
from .analysis import CostReport, make_report, phi_cost
from .measures import DiscreteMeasure, pushforward_mean
from .oracle import DEFAULT_SIZE_GUARD, exact_mot_lp
from .validation import check_measure_list, check_weights

__all__ = ["MOTBarycenter", "ALGORITHMS"]

ALGORITHMS = ("reference", "greedy", "reference-random", "greedy-random", "oracle")


class MOTBarycenter(BaseEstimator):
    """Free-support Wasserstein-2 barycenter via sparse multi-marginal plans.

    Parameters
    ----------
    algorithm : str, default="greedy"
        One of ``"reference"``, ``"greedy"``, ``"reference-random"``,
        ``"greedy-random"`` or ``"oracle"``.  The randomized variants
        resample the reference measure / input order per fit; the oracle
        solves the exact linear program (small instances only).
    weights : array-like or SimplexWeights, optional
        Barycentric weights, uniform by default.  ``"greedy-random"``
        requires uniform weights.
    random_state : int or numpy Generator, optional
        Seed for the randomized variants.
    size_guard : int, default 200000
        Product-support limit for the oracle algorithm.

    Attributes
    ----------
    measures_ : tuple of DiscreteMeasure
    weights_ : SimplexWeights
    plan_ : MultiMarginalPlan
        The computed sparse transport plan.
    barycenter_ : DiscreteMeasure
        Mean pushforward of ``plan_`` under ``weights_``.
    cost_ : float
        Multi-marginal transport cost of ``plan_``.

    Examples
    --------
    >>> import numpy as np
    >>> from motbary import MOTBarycenter
    >>> clouds = [np.random.rand(5, 2) for _ in range(3)]
    >>> est = MOTBarycenter(algorithm="greedy").fit(clouds)
    >>> est.barycenter_.n_atoms <= 13
    True
    """

    def __init__(
        self,
        algorithm: str = "greedy",
        weights=None,
        random_state=None,
        size_guard: int = DEFAULT_SIZE_GUARD,
    ):
        self.algorithm = algorithm
        self.weights = weights
        self.random_state = random_state
        self.size_guard = size_guard

    def fit(self, X, y=None):
        """Compute the plan and barycenter for a list of measures.

        ``X`` may contain DiscreteMeasure objects, ``(points, weights)``
        tuples, or bare point arrays (taken with uniform weights).
        """
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        measures = check_measure_list(X)
        weights = check_weights(self.weights, len(measures))
        if self.algorithm == "reference":
            plan = reference_algorithm(measures, weights)
        elif self.algorithm == "greedy":
            plan = greedy_algorithm(measures, weights)
        elif self.algorithm == "reference-random":
            plan = randomized_reference(measures, weights, self.random_state)
        elif self.algorithm == "greedy-random":
            plan = randomized_greedy(measures, self.random_state, weights)
        else:
            plan, _ = exact_mot_lp(measures, weights, self.size_guard)
        self.measures_ = measures
        self.weights_ = weights
        self.plan_ = plan
        self.barycenter_ = pushforward_mean(plan, weights)
        self.cost_ = phi_cost(plan, weights)
        self.n_marginals_ = len(measures)
        self.dim_ = measures[0].dim
        return self

    def transform(self, weight_sets) -> list[DiscreteMeasure]:
        """Push the fitted plan through one or more weight vectors.

        Parameters
        ----------
        weight_sets : array-like of shape (k, n_marginals) or (n_marginals,)

        Returns
        -------
        list of DiscreteMeasure
            One barycenter per weight vector, computed without re-solving.
        """
        check_is_fitted(self, "plan_")
        W = np.asarray(weight_sets, dtype=float)
        if W.ndim == 1:
            W = W[None, :]
        if W.shape[1] != self.n_marginals_:
            raise ValueError(
                f"weight sets have {W.shape[1]} entries, expected {self.n_marginals_}"
            )
        return [
            pushforward_mean(self.plan_, check_weights(w, self.n_marginals_))
            for w in W
        ]

    def fit_transform(self, X, weight_sets=None):
        """Fit on ``X`` and return barycenters, for the fitted weights by default."""
        self.fit(X)
        if weight_sets is None:
            return [self.barycenter_]
        return self.transform(weight_sets)

    def report(self, use_oracle: bool = False) -> CostReport:
        """Cost report of the fitted plan, optionally against the exact LP."""
        check_is_fitted(self, "plan_")
        algo = self.algorithm if self.algorithm in ("reference", "greedy") else None
        return make_report(
            self.plan_,
            self.measures_,
            self.weights_,
            use_oracle=use_oracle,
            size_guard=self.size_guard,
            algorithm=algo,
        )
