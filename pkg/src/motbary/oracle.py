"""Ground-truth machinery: exact MOT by dense LP and optimality certificates.

The oracle enumerates the full product support, so it is limited by a size
guard (200,000 tuples by default, roughly four measures of twenty atoms).
It exists to certify the approximation algorithms, not to scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lp import solve_block_lp
from .measures import (
    DiscreteMeasure,
    MultiMarginalPlan,
    SimplexWeights,
    pushforward_mean,
)
from .solver import w2_squared

__all__ = [
    "OracleSizeError",
    "exact_mot_lp",
    "exact_barycenter",
    "sorting_property_check",
    "optimality_side_conditions",
    "SideConditionReport",
]

DEFAULT_SIZE_GUARD = 200_000


class OracleSizeError(RuntimeError):
    """Product support exceeds the oracle size guard."""


def _check_inputs(measures, weights: SimplexWeights):
    measures = tuple(measures)
    if len(measures) < 2:
        raise ValueError("need at least two marginal measures")
    if len(weights) != len(measures):
        raise ValueError(f"{len(weights)} weights for {len(measures)} measures")
    dims = {mu.dim for mu in measures}
    if len(dims) != 1:
        raise ValueError(f"measures have mixed dimensions {sorted(dims)}")
    return measures


def mot_tuple_costs(points: np.ndarray, weights: SimplexWeights) -> np.ndarray:
    """Weighted-variance transport cost of each tuple, shape (T, N, d) -> (T,).

    Computed as ``sum_i lambda_i ||x_i - m||^2`` with ``m`` the weighted
    mean, which is linear in N per tuple instead of quadratic.
    """
    lam = weights.values
    m = np.einsum("i,tij->tj", lam, points)
    sq = ((points - m[:, None, :]) ** 2).sum(axis=-1)
    return sq @ lam


def exact_mot_lp(
    measures,
    weights: SimplexWeights,
    size_guard: int = DEFAULT_SIZE_GUARD,
) -> tuple[MultiMarginalPlan, float]:
    """Globally optimal multi-marginal plan by dense linear programming.

    Returns a vertex solution (hence at most ``sum(n_i) - N + 1`` atoms)
    together with the optimal cost, certified by LP duality within 1e-9.

    Raises
    ------
    OracleSizeError
        If the product support exceeds ``size_guard`` tuples.
    """
    measures = _check_inputs(measures, weights)
    sizes = [mu.n_atoms for mu in measures]
    n_tuples = math.prod(sizes)
    if n_tuples > size_guard:
        raise OracleSizeError(
            f"product support has {n_tuples} tuples, exceeding the guard {size_guard}"
        )
    N = len(measures)
    tuples = np.indices(sizes).reshape(N, -1).T.astype(np.intp)
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    idx = tuples + offsets[None, :]
    b = np.concatenate([mu.weights for mu in measures])
    points = np.stack(
        [measures[i].points[tuples[:, i]] for i in range(N)], axis=1
    )
    costs = mot_tuple_costs(points, weights)

    res = solve_block_lp(idx, costs, b)

    scale = max(1.0, float(costs.max()))
    gap = abs(res.objective - float(res.duals @ b))
    reduced = costs - res.duals[idx].sum(axis=1)
    if gap > 1e-9 * max(1.0, abs(res.objective)) or reduced.min() < -1e-9 * scale:
        raise RuntimeError(
            f"LP optimality certificate failed (gap {gap:.3e}, "
            f"min reduced cost {reduced.min():.3e})"
        )

    plan = MultiMarginalPlan(measures, tuples[res.support], res.values)
    bound = sum(sizes) - N + 1
    if plan.n_atoms > bound:
        raise RuntimeError(
            f"oracle vertex has {plan.n_atoms} atoms, above the bound {bound}"
        )
    return plan, res.objective


def exact_barycenter(
    measures,
    weights: SimplexWeights,
    size_guard: int = DEFAULT_SIZE_GUARD,
) -> DiscreteMeasure:
    """Exact free-support barycenter: mean pushforward of the optimal plan.

    Cross-checks two structural facts of optimal plans before returning:
    the mean points are pairwise distinct and the barycenter cost equals
    the optimal transport cost.
    """
    plan, phi_opt = exact_mot_lp(measures, weights, size_guard)
    bary = pushforward_mean(plan, weights)
    if bary.n_atoms != plan.n_atoms:
        raise RuntimeError("optimal plan produced coinciding mean points")
    if bary.n_atoms > 1:
        d2 = ((bary.points[:, None, :] - bary.points[None, :, :]) ** 2).sum(-1)
        np.fill_diagonal(d2, np.inf)
        if d2.min() <= (1e-12) ** 2:
            raise RuntimeError("optimal plan mean points closer than 1e-12")
    psi = sum(
        weights[i] * w2_squared(mu, bary) for i, mu in enumerate(plan.measures)
    )
    if abs(psi - phi_opt) > 1e-8 * max(1.0, abs(phi_opt)):
        raise RuntimeError(
            f"barycenter cost {psi:.12g} deviates from optimal plan cost {phi_opt:.12g}"
        )
    return bary


def sorting_property_check(plan: MultiMarginalPlan) -> bool:
    """Whether the coordinatewise partial order is total on the plan support.

    Only defined for one-dimensional supports, where it holds if and only
    if the plan is an optimal multi-marginal plan.
    """
    if plan.measures[0].dim != 1:
        raise ValueError("the sorting property is defined for d = 1 only")
    if plan.n_atoms <= 1:
        return True
    pts = plan.atom_points()[:, :, 0]  # (M, N)
    order = np.lexsort(pts.T[::-1])
    sorted_pts = pts[order]
    return bool(np.all(np.diff(sorted_pts, axis=0) >= 0.0))


@dataclass(frozen=True)
class SideConditionReport:
    """Diagnostics for structural properties of a claimed-optimal plan."""

    coupling_gaps: tuple[float, ...]
    max_coupling_gap: float
    cost_distance_violations: tuple[float, ...]
    max_cost_distance_violation: float


def optimality_side_conditions(
    plan: MultiMarginalPlan,
    weights: SimplexWeights,
    candidates=None,
) -> SideConditionReport:
    """Check two consequences of plan optimality and report violations.

    (a) For each marginal, the coupling induced between the plan's mean
    pushforward and that marginal should attain the exact two-marginal
    cost.  (b) For arbitrary candidate measures the barycenter cost can
    exceed the optimal one by at most their squared Wasserstein distance.
    Both quantities are returned as signed gaps (positive = violation).
    The distance estimate (b) holds for barycenter costs only; applying it
    to plan transport costs is invalid and deliberately not offered.
    """
    if len(weights) != plan.num_marginals:
        raise ValueError("weights length does not match the plan")
    bary = pushforward_mean(plan, weights)
    pts = plan.atom_points()
    means = np.einsum("i,tij->tj", weights.values, pts)
    gaps = []
    for i, mu in enumerate(plan.measures):
        induced = float(
            plan.masses @ ((means - pts[:, i, :]) ** 2).sum(axis=1)
        )
        gaps.append(induced - w2_squared(bary, mu))
    psi_hat = sum(
        weights[i] * w2_squared(mu, bary) for i, mu in enumerate(plan.measures)
    )
    if candidates is None:
        candidates = list(plan.measures)
    violations = []
    for cand in candidates:
        psi_cand = sum(
            weights[i] * w2_squared(mu, cand) for i, mu in enumerate(plan.measures)
        )
        violations.append(psi_cand - (psi_hat + w2_squared(cand, bary)))
    return SideConditionReport(
        coupling_gaps=tuple(gaps),
        max_coupling_gap=max(gaps),
        cost_distance_violations=tuple(violations),
        max_cost_distance_violation=max(violations) if violations else 0.0,
    )
