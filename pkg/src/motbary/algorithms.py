"""Sparse approximate multi-marginal transport from pairwise solves.

Two constructions are provided.  The reference algorithm couples every
measure to the first one and glues the resulting couplings along shared
reference atoms by residual-mass consumption; each output atom couples a
reference atom with one partner per measure.  The greedy algorithm builds
tuples sequentially: after ``r`` measures are coupled, every partial tuple
is summarized by the weighted mean of its points, the mean cloud is
optimally coupled to measure ``r + 1``, and tuples are extended through
that coupling's back-map.  Both produce feasible plans with at most
``sum(n_i) - N + 1`` atoms from ``N - 1`` two-marginal solves.

Randomized entry points re-run the constructions with a sampled reference
measure (probability proportional to its weight) or a uniformly random
input order, and un-permute the output coordinates.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .measures import (
    ATOM_DROP_TOL,
    Coupling,
    DiscreteMeasure,
    FEAS_TOL,
    MultiMarginalPlan,
    SimplexWeights,
)
from .solver import build_cost_matrix, network_simplex, solve_ot2, squared_distances

__all__ = [
    "reference_algorithm",
    "glue_pairwise_plans",
    "greedy_algorithm",
    "randomized_reference",
    "randomized_greedy",
    "sample_reference_index",
    "sparsity_bound",
]


def sparsity_bound(measures) -> int:
    """Largest support size either algorithm (or an optimal vertex) may have."""
    measures = tuple(measures)
    return sum(mu.n_atoms for mu in measures) - len(measures) + 1


def _check_collection(measures, weights: SimplexWeights | None):
    measures = tuple(measures)
    if len(measures) < 2:
        raise ValueError("need at least two marginal measures")
    dims = {mu.dim for mu in measures}
    if len(dims) != 1:
        raise ValueError(f"measures have mixed dimensions {sorted(dims)}")
    if weights is not None and len(weights) != len(measures):
        raise ValueError(f"{len(weights)} weights for {len(measures)} measures")
    return measures


def _assert_sparse(plan: MultiMarginalPlan) -> MultiMarginalPlan:
    bound = sparsity_bound(plan.measures)
    if plan.n_atoms > bound:
        raise RuntimeError(
            f"plan has {plan.n_atoms} atoms, above the sparsity bound {bound}"
        )
    return plan


def _point_ranks(mu: DiscreteMeasure) -> np.ndarray:
    """Rank of each atom in ascending point order (d = 1 only)."""
    order = np.argsort(mu.points[:, 0], kind="stable")
    ranks = np.empty(mu.n_atoms, dtype=np.intp)
    ranks[order] = np.arange(mu.n_atoms)
    return ranks


def glue_pairwise_plans(mu1: DiscreteMeasure, plans) -> MultiMarginalPlan:
    """Combine couplings that share the first marginal into one plan.

    Each coupling's atoms are consumed at every reference atom in order,
    taking from the current front of each coupling the largest mass all of
    them still carry.  For one-dimensional supports the consumption order
    is by ascending point value (reference first, partner second), which
    makes the output inherit the couplings' monotonicity; in higher
    dimension atom index order is used.

    Parameters
    ----------
    mu1 : DiscreteMeasure
        The shared first marginal.
    plans : sequence of Coupling
        One coupling per remaining measure; the first marginal of each
        must equal ``mu1`` within the feasibility tolerance.
    """
    plans = list(plans)
    if not plans:
        raise ValueError("need at least one coupling to glue")
    for p, cpl in enumerate(plans):
        if cpl.num_marginals != 2:
            raise ValueError("glue inputs must be two-marginal plans")
        if cpl.measures[0].n_atoms != mu1.n_atoms:
            raise ValueError(f"coupling {p} has a mismatched first marginal")
        proj = np.bincount(cpl.indices[:, 0], weights=cpl.masses, minlength=mu1.n_atoms)
        if np.max(np.abs(proj - mu1.weights)) > FEAS_TOL:
            raise ValueError(
                f"coupling {p} first marginal deviates from the reference measure"
            )

    if len(plans) == 1:
        cpl = plans[0]
        return _assert_sparse(
            MultiMarginalPlan(cpl.measures, cpl.indices, cpl.masses)
        )

    d = mu1.dim
    ref_order = (
        np.argsort(mu1.points[:, 0], kind="stable") if d == 1 else np.arange(mu1.n_atoms)
    )

    # Per coupling: a FIFO queue of [partner index, residual mass] entries
    # for every reference atom, in consumption order.
    queues: list[list[deque]] = []
    for cpl in plans:
        ranks2 = _point_ranks(cpl.measures[1]) if d == 1 else None
        per_ref: list[deque] = [deque() for _ in range(mu1.n_atoms)]
        atom_order = np.lexsort(
            (
                ranks2[cpl.indices[:, 1]] if d == 1 else cpl.indices[:, 1],
                cpl.indices[:, 0],
            )
        )
        for a in atom_order:
            per_ref[cpl.indices[a, 0]].append(
                [int(cpl.indices[a, 1]), float(cpl.masses[a])]
            )
        queues.append(per_ref)

    out_indices: list[list[int]] = []
    out_masses: list[float] = []
    for k in ref_order:
        k = int(k)
        while all(q[k] for q in queues):
            h = min(q[k][0][1] for q in queues)
            tuple_idx = [k] + [q[k][0][0] for q in queues]
            out_indices.append(tuple_idx)
            out_masses.append(h)
            for q in queues:
                front = q[k][0]
                front[1] -= h
                if front[1] <= ATOM_DROP_TOL:
                    if front[1] < -1e-12:
                        raise ValueError(
                            f"negative residual {front[1]:.3e} while gluing; "
                            "the couplings are inconsistent"
                        )
                    q[k].popleft()
        leftovers = [sum(e[1] for e in q[k]) for q in queues]
        if max(leftovers, default=0.0) > FEAS_TOL:
            raise ValueError(
                f"couplings disagree at reference atom {k}: "
                f"unconsumed masses {leftovers}"
            )

    measures = [mu1] + [cpl.measures[1] for cpl in plans]
    return _assert_sparse(MultiMarginalPlan(measures, out_indices, out_masses))


def _solve_to_reference(args):
    mu1, mui = args
    coupling, _ = solve_ot2(build_cost_matrix(mu1, mui))
    return coupling


def reference_algorithm(
    measures, weights: SimplexWeights, *, workers: int | None = None
) -> MultiMarginalPlan:
    """Approximate multi-marginal plan built around the first measure.

    Solves the ``N - 1`` exact couplings between measure 1 and every other
    measure (concurrently when the problems are large enough to pay for
    threads) and glues them.  Every pairwise projection of the output onto
    (1, i) attains the exact squared distance between those measures, and
    the plan has at most ``sum(n_i) - N + 1`` atoms.
    """
    measures = _check_collection(measures, weights)
    mu1 = measures[0]
    jobs = [(mu1, mui) for mui in measures[1:]]
    big = any(mu1.n_atoms * mui.n_atoms >= 4096 for _, mui in jobs)
    if workers is None:
        workers = min(8, len(jobs)) if (big and len(jobs) > 1) else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            couplings = list(pool.map(_solve_to_reference, jobs))
    else:
        couplings = [_solve_to_reference(j) for j in jobs]
    return glue_pairwise_plans(mu1, couplings)


def greedy_algorithm(measures, weights: SimplexWeights) -> MultiMarginalPlan:
    """Approximate multi-marginal plan by sequential mean coupling.

    Round ``r`` couples the weighted prefix means of the current partial
    tuples to measure ``r`` and extends each tuple through the coupling.
    Partial means keep one atom per tuple even when mean points coincide;
    merging would break the tuple back-map, and duplicate positions are
    legal solver inputs.  Prefix weights are recomputed from scratch every
    round to avoid accumulation drift.
    """
    measures = _check_collection(measures, weights)
    N = len(measures)
    tuples = np.arange(measures[0].n_atoms, dtype=np.intp)[:, None]
    masses = measures[0].weights.copy()

    for r in range(1, N):
        prefix = weights.prefix_vector(r).values
        pts = np.stack(
            [measures[i].points[tuples[:, i]] for i in range(r)], axis=1
        )
        means = np.einsum("i,tij->tj", prefix, pts)
        cost = squared_distances(means, measures[r].points)
        rows, cols, flow, _, _, _, _ = network_simplex(
            masses, measures[r].weights, cost
        )
        pos = flow > 0.0
        if np.count_nonzero(pos) > masses.shape[0] + measures[r].n_atoms - 1:
            raise RuntimeError("two-marginal solve returned a non-vertex coupling")
        tuples = np.column_stack([tuples[rows[pos]], cols[pos]])
        masses = flow[pos]

    return _assert_sparse(MultiMarginalPlan(measures, tuples, masses))


def sample_reference_index(weights: SimplexWeights, rng: np.random.Generator) -> int:
    """Draw a reference measure index with probability equal to its weight."""
    return int(rng.choice(len(weights), p=weights.values))


def _unpermute(plan: MultiMarginalPlan, order, measures) -> MultiMarginalPlan:
    """Map a plan over permuted measures back to the original coordinates."""
    order = np.asarray(order, dtype=np.intp)
    indices = np.empty_like(plan.indices)
    indices[:, order] = plan.indices
    return MultiMarginalPlan(measures, indices, plan.masses)


def randomized_reference(
    measures, weights: SimplexWeights, seed=None
) -> MultiMarginalPlan:
    """Reference algorithm with the reference measure sampled by weight.

    A measure is drawn with probability equal to its barycentric weight,
    moved to the front (other measures keep their relative order), and the
    output coordinates are un-permuted so marginal ``i`` still corresponds
    to input measure ``i``.
    """
    measures = _check_collection(measures, weights)
    rng = np.random.default_rng(seed)
    k = sample_reference_index(weights, rng)
    order = [k] + [i for i in range(len(measures)) if i != k]
    plan = reference_algorithm(
        [measures[i] for i in order], weights.permute(order)
    )
    return _assert_sparse(_unpermute(plan, order, measures))


def randomized_greedy(
    measures, seed=None, weights: SimplexWeights | None = None
) -> MultiMarginalPlan:
    """Greedy algorithm on a uniformly random permutation of the inputs.

    The expected-ratio guarantee for this variant requires uniform
    barycentric weights, so non-uniform weights are rejected.
    """
    measures = _check_collection(measures, weights)
    n = len(measures)
    if weights is None:
        weights = SimplexWeights.uniform(n)
    elif not weights.is_uniform(tol=1e-12):
        raise ValueError(
            "randomized greedy requires uniform weights (lambda = 1/N); its "
            "expected-ratio guarantee only holds under that hypothesis"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    plan = greedy_algorithm([measures[i] for i in order], weights)
    return _assert_sparse(_unpermute(plan, order, measures))
