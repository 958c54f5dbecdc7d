"""Discrete measures, simplex weights and sparse multi-marginal plans.

These are the value types everything else operates on.  A measure is a
weighted point cloud with weights on the probability simplex, a plan is a
sparse list of ``(index tuple, mass)`` atoms over a fixed list of measures.
All types are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

# Absolute tolerance for all feasibility comparisons (masses, marginals).
FEAS_TOL = 1e-9
# Atoms below this mass are dropped at construction time.
ATOM_DROP_TOL = 1e-15
# Tolerance on simplex weight normalization.
WEIGHT_TOL = 1e-12

__all__ = [
    "FEAS_TOL",
    "ATOM_DROP_TOL",
    "WEIGHT_TOL",
    "DiscreteMeasure",
    "SimplexWeights",
    "MultiMarginalPlan",
    "Coupling",
    "PlanDiagnostics",
    "marginal_projection",
    "pushforward_mean",
    "validate_plan",
]


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError(f"points must be a (n, d) array, got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise ValueError("a measure needs at least one support point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("support points must be finite")
    return pts


class DiscreteMeasure:
    """Probability measure with finite support in ``R^d``.

    On construction the weights are renormalized to sum to one, zero and
    sub-``ATOM_DROP_TOL`` mass atoms are stripped, and support points that
    coincide exactly are merged by summing their weights.  The original
    input order of the (surviving) points is preserved, so index-based
    bookkeeping against the constructor arguments stays valid whenever the
    inputs were already canonical.

    Parameters
    ----------
    points : array-like of shape (n, d) or (n,)
        Support points.  A 1-D array is treated as ``d = 1``.
    weights : array-like of shape (n,), optional
        Nonnegative masses.  Defaults to the uniform distribution.
    """

    __slots__ = ("points", "weights", "normalization", "_digest")

    def __init__(self, points, weights=None):
        pts = _as_points(points)
        n = pts.shape[0]
        if weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != n:
            raise ValueError(f"{n} points but {w.shape[0]} weights")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < -ATOM_DROP_TOL):
            raise ValueError("weights must be nonnegative")
        w = np.maximum(w, 0.0)

        # Merge exact duplicate support points (first occurrence wins the slot).
        seen: dict[bytes, int] = {}
        keep: list[int] = []
        acc: list[float] = []
        for i in range(n):
            key = pts[i].tobytes()
            if key in seen:
                acc[seen[key]] += w[i]
            else:
                seen[key] = len(keep)
                keep.append(i)
                acc.append(w[i])
        pts = pts[keep]
        w = np.asarray(acc)

        total = float(w.sum())
        if total <= 0.0:
            raise ValueError("measure has zero total mass")
        # Renormalize only when actually off; re-dividing an already
        # normalized vector would perturb the last ulp and break
        # construction idempotence.
        if abs(total - 1.0) > FEAS_TOL:
            w = w / total
        mask = w > ATOM_DROP_TOL
        if not np.all(mask):
            pts = pts[mask]
            w = w[mask]
            if abs(float(w.sum()) - 1.0) > FEAS_TOL:
                w = w / w.sum()

        pts.flags.writeable = False
        w.flags.writeable = False
        self.points: np.ndarray = pts
        self.weights: np.ndarray = w
        # Total input mass before renormalization; kept so callers can undo it.
        self.normalization: float = total
        self._digest: bytes | None = None

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    def digest(self) -> bytes:
        """Content hash of (dim, points, weights); used as a cache key."""
        if self._digest is None:
            h = hashlib.sha1()
            h.update(np.int64(self.dim).tobytes())
            h.update(self.points.tobytes())
            h.update(self.weights.tobytes())
            self._digest = h.digest()
        return self._digest

    def __len__(self) -> int:
        return self.n_atoms

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash(self.digest())

    def allclose(self, other: "DiscreteMeasure", atol: float = 1e-12) -> bool:
        """Order-insensitive comparison of two measures as atom multisets."""
        if self.dim != other.dim or self.n_atoms != other.n_atoms:
            return False
        oa = np.lexsort(self.points.T[::-1])
        ob = np.lexsort(other.points.T[::-1])
        return bool(
            np.allclose(self.points[oa], other.points[ob], atol=atol, rtol=0.0)
            and np.allclose(self.weights[oa], other.weights[ob], atol=atol, rtol=0.0)
        )

    def __repr__(self) -> str:
        return f"DiscreteMeasure(n_atoms={self.n_atoms}, dim={self.dim})"


class SimplexWeights:
    """Barycentric weight vector on the open probability simplex.

    Entries must be strictly positive; the vector is normalized to sum to
    one at construction.  ``prefix(i, r)`` exposes the renormalized prefix
    weights ``lambda_i / sum(lambda_1..lambda_r)`` the sequential
    algorithms use.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.shape[0] == 0:
            raise ValueError("weights must be nonempty")
        if not np.all(np.isfinite(v)):
            raise ValueError("weights must be finite")
        if np.any(v <= 0.0):
            raise ValueError("simplex weights must be strictly positive")
        total = v.sum()
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"weights sum to {total:.6g}, expected 1")
        v = v / total
        v.flags.writeable = False
        self.values: np.ndarray = v
        assert abs(self.values.sum() - 1.0) <= WEIGHT_TOL

    @classmethod
    def uniform(cls, n: int) -> "SimplexWeights":
        return cls(np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> float:
        return float(self.values[i])

    def prefix(self, i: int, r: int) -> float:
        """Renormalized prefix weight of entry ``i`` among the first ``r``."""
        if not 0 <= i < r <= len(self):
            raise IndexError(f"prefix index (i={i}, r={r}) out of range")
        return float(self.values[i] / self.values[:r].sum())

    def prefix_vector(self, r: int) -> "SimplexWeights":
        """Weights of the first ``r`` entries, renormalized to the simplex."""
        if not 1 <= r <= len(self):
            raise IndexError(f"prefix length {r} out of range")
        return SimplexWeights(self.values[:r] / self.values[:r].sum())

    def permute(self, order) -> "SimplexWeights":
        return SimplexWeights(self.values[np.asarray(order, dtype=int)])

    def is_uniform(self, tol: float = WEIGHT_TOL) -> bool:
        return bool(np.all(np.abs(self.values - 1.0 / len(self)) <= tol))

    def __repr__(self) -> str:
        return f"SimplexWeights({np.array2string(self.values, precision=6)})"


class PlanInfeasibleError(ValueError):
    """A plan's marginals do not match its measures within tolerance."""


class MultiMarginalPlan:
    """Sparse transport plan over ``N`` discrete measures.

    Atoms are ``(index tuple, mass)`` pairs where the tuple selects one
    support point per marginal measure.  Atoms are stored in canonical
    lexicographic order of their index tuples, duplicated tuples are merged
    by summing mass, and masses below ``ATOM_DROP_TOL`` are dropped.  With
    ``validate=True`` (default) construction checks that the plan projects
    onto its marginals within ``FEAS_TOL``.
    """

    __slots__ = ("measures", "indices", "masses")

    def __init__(self, measures, indices, masses, *, validate: bool = True):
        measures = tuple(measures)
        if len(measures) == 0:
            raise ValueError("a plan needs at least one marginal measure")
        idx = np.asarray(indices, dtype=np.intp)
        if idx.ndim == 1:
            idx = idx.reshape(-1, len(measures))
        mass = np.asarray(masses, dtype=float).reshape(-1)
        if idx.shape != (mass.shape[0], len(measures)):
            raise ValueError(
                f"indices shape {idx.shape} does not match "
                f"{mass.shape[0]} atoms over {len(measures)} marginals"
            )
        if np.any(mass < -ATOM_DROP_TOL):
            raise ValueError("atom masses must be nonnegative")
        for i, mu in enumerate(measures):
            if idx.shape[0] and (idx[:, i].min() < 0 or idx[:, i].max() >= mu.n_atoms):
                raise IndexError(f"atom index out of range for marginal {i}")

        if idx.shape[0]:
            # Canonical order + duplicate-tuple merge.
            order = np.lexsort(idx.T[::-1])
            idx = idx[order]
            mass = mass[order]
            if idx.shape[0] > 1:
                new_group = np.any(np.diff(idx, axis=0) != 0, axis=1)
                group_id = np.concatenate(([0], np.cumsum(new_group)))
                n_groups = group_id[-1] + 1
                if n_groups != idx.shape[0]:
                    mass = np.bincount(group_id, weights=mass, minlength=n_groups)
                    idx = idx[np.concatenate(([True], new_group))]
            keepers = mass > ATOM_DROP_TOL
            idx = idx[keepers]
            mass = mass[keepers]

        idx.flags.writeable = False
        mass.flags.writeable = False
        self.measures: tuple[DiscreteMeasure, ...] = measures
        self.indices: np.ndarray = idx
        self.masses: np.ndarray = mass

        if validate:
            diag = validate_plan(self)
            if not diag.feasible:
                raise PlanInfeasibleError(
                    f"plan marginals violate tolerance {FEAS_TOL:g}: "
                    f"max marginal error {diag.max_marginal_error:.3e}, "
                    f"total mass error {diag.total_mass_error:.3e}"
                )

    @property
    def num_marginals(self) -> int:
        return len(self.measures)

    @property
    def n_atoms(self) -> int:
        return self.masses.shape[0]

    def atom_points(self) -> np.ndarray:
        """Coordinates of every atom tuple, shape ``(n_atoms, N, d)``."""
        return np.stack(
            [mu.points[self.indices[:, i]] for i, mu in enumerate(self.measures)],
            axis=1,
        )

    def allclose(self, other: "MultiMarginalPlan", atol: float = 1e-12) -> bool:
        return (
            self.num_marginals == other.num_marginals
            and self.n_atoms == other.n_atoms
            and np.array_equal(self.indices, other.indices)
            and np.allclose(self.masses, other.masses, atol=atol, rtol=0.0)
        )

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(num_marginals={self.num_marginals}, "
            f"n_atoms={self.n_atoms})"
        )


class Coupling(MultiMarginalPlan):
    """Two-marginal transport plan."""

    def __init__(self, measures, indices, masses, *, validate: bool = True):
        if len(tuple(measures)) != 2:
            raise ValueError("a coupling has exactly two marginals")
        super().__init__(measures, indices, masses, validate=validate)

    @property
    def source(self) -> DiscreteMeasure:
        return self.measures[0]

    @property
    def target(self) -> DiscreteMeasure:
        return self.measures[1]


@dataclass(frozen=True)
class PlanDiagnostics:
    """Feasibility report produced by :func:`validate_plan`."""

    per_marginal_error: tuple[float, ...]
    total_mass_error: float
    duplicate_tuples: int
    feasible: bool
    max_marginal_error: float = field(default=0.0)


def validate_plan(plan: MultiMarginalPlan) -> PlanDiagnostics:
    """Check membership of a plan in the transport polytope of its measures.

    Returns per-marginal maximum absolute mass discrepancies, the total
    mass error and the number of duplicated atom tuples.  The plan is
    feasible iff every discrepancy is within ``FEAS_TOL``.
    """
    errors = []
    for i, mu in enumerate(plan.measures):
        proj = np.bincount(
            plan.indices[:, i], weights=plan.masses, minlength=mu.n_atoms
        )
        errors.append(float(np.max(np.abs(proj - mu.weights))) if mu.n_atoms else 0.0)
    total_err = abs(float(plan.masses.sum()) - 1.0)
    dup = 0
    if plan.n_atoms > 1:
        same = np.all(np.diff(plan.indices, axis=0) == 0, axis=1)
        dup = int(np.count_nonzero(same))
    max_err = max(errors) if errors else 0.0
    feasible = max_err <= FEAS_TOL and total_err <= FEAS_TOL and dup == 0
    return PlanDiagnostics(
        per_marginal_error=tuple(errors),
        total_mass_error=total_err,
        duplicate_tuples=dup,
        feasible=feasible,
        max_marginal_error=max_err,
    )


def marginal_projection(plan: MultiMarginalPlan, indices) -> MultiMarginalPlan:
    """Project a plan onto a subset of its coordinates.

    Atoms whose projected tuples coincide are merged by summing mass.  The
    result is a plan over the selected measures, in canonical atom order.
    """
    sel = list(indices)
    if len(sel) != len(set(sel)):
        raise ValueError("projection coordinates must be pairwise distinct")
    for i in sel:
        if not 0 <= i < plan.num_marginals:
            raise IndexError(f"projection coordinate {i} out of range")
    sub_measures = [plan.measures[i] for i in sel]
    sub_indices = plan.indices[:, sel]
    cls = Coupling if len(sel) == 2 else MultiMarginalPlan
    return cls(sub_measures, sub_indices, plan.masses, validate=False)


def pushforward_mean(plan: MultiMarginalPlan, weights: SimplexWeights) -> DiscreteMeasure:
    """Push a plan forward through the weighted-mean map.

    Every atom tuple is replaced by its weighted mean point; atoms whose
    mean points coincide in exact float arithmetic are merged.  Merging by
    tolerance is deliberately avoided: only optimal plans are guaranteed to
    have distinct mean points, and fuzzy merging would corrupt suboptimal
    plans.
    """
    if len(weights) != plan.num_marginals:
        raise ValueError(
            f"{len(weights)} weights for a plan with {plan.num_marginals} marginals"
        )
    pts = plan.atom_points()  # (M, N, d)
    means = np.einsum("i,jik->jk", weights.values, pts)
    return DiscreteMeasure(means, plan.masses)
