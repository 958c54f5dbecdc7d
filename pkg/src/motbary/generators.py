"""Deterministic instance generators: adversarial rings, ellipses, clouds.

The adversarial families place equally spaced atoms on a circle so that
locally optimal pairwise choices compound into near-maximal approximation
ratios.  They are built in angle coordinates on the 1-D torus and embedded
into the plane by ``gamma -> (cos gamma, sin gamma)``; a flag keeps raw
torus coordinates (with torus-metric costs during construction) for
unit-testing the construction itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import DiscreteMeasure, MultiMarginalPlan, SimplexWeights
from .solver import network_simplex, squared_distances

__all__ = [
    "torus_embed",
    "diagonal_plan",
    "gen_reference_worst_case",
    "gen_greedy_worst_case",
    "gen_neither_better",
    "NeitherBetterExample",
    "gen_nested_ellipses",
    "gen_random_clouds",
]

TWO_PI = 2.0 * np.pi


def torus_embed(angles) -> np.ndarray:
    """Embed torus angles onto the unit circle in the plane.

    The chord-to-arc ratio of nearby angles approaches one as the angular
    scale shrinks, so adversarial gaps built in angle space survive the
    embedding for fine enough discretizations.
    """
    ang = np.asarray(angles, dtype=float).reshape(-1)
    return np.column_stack([np.cos(ang), np.sin(ang)])


def _wrap(angle):
    """Principal representative in (-pi, pi]."""
    return -np.mod(-np.asarray(angle) + np.pi, TWO_PI) + np.pi


def _torus_sq_dist(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    diff = _wrap(alpha[:, None] - beta[None, :])
    return diff * diff


def _sign(angle: float) -> float:
    # Positive-side convention at exactly zero; the first round is an exact
    # tie and either side works by symmetry.
    return 1.0 if _wrap(angle) >= 0.0 else -1.0


def diagonal_plan(measures) -> MultiMarginalPlan:
    """Plan coupling atom j of every measure, for equal atom counts."""
    measures = tuple(measures)
    counts = {mu.n_atoms for mu in measures}
    if len(counts) != 1:
        raise ValueError("diagonal plan needs equal atom counts")
    m = counts.pop()
    idx = np.tile(np.arange(m, dtype=np.intp)[:, None], (1, len(measures)))
    return MultiMarginalPlan(measures, idx, np.full(m, 1.0 / m))


def gen_reference_worst_case(
    n_measures: int, n_atoms: int, eps_tilde: float, *, embed: bool = True
):
    """Adversarial ring family where the reference construction loses a
    factor close to the number of measures.

    Measure 1 sits on the regular ``n_atoms``-gon; the others sit half a
    spacing away, alternating sides, pulled inward by ``eps_tilde`` so the
    nearest-neighbour couplings all pick the same side.  Returns the
    measures, uniform weights, and an explicit feasible competitor plan
    whose cost upper-bounds the optimum (same-side measures share the
    reference atom, opposite-side measures take the next one).
    """
    if n_measures < 3:
        raise ValueError("the construction needs at least 3 measures")
    if n_atoms < 4:
        raise ValueError("need at least 4 atoms per measure")
    if not 0.0 < eps_tilde <= 1e-2:
        raise ValueError("eps_tilde must be in (0, 1e-2]")
    M = n_atoms
    spacing = TWO_PI / M
    offset = (np.pi / M) / (1.0 + eps_tilde)
    base = np.arange(M) * spacing
    angles = [base]
    for i in range(2, n_measures + 1):
        sgn = 1.0 if i % 2 == 0 else -1.0
        angles.append(base + sgn * offset)
    measures = [
        DiscreteMeasure(torus_embed(a) if embed else a[:, None]) for a in angles
    ]
    weights = SimplexWeights.uniform(n_measures)

    # Competitor tuples: reference and even measures keep index j, odd
    # measures (from the third) take j + 1, cyclically.
    js = np.arange(M, dtype=np.intp)
    cols = [js, js]
    for i in range(3, n_measures + 1):
        cols.append(js if i % 2 == 0 else (js + 1) % M)
    competitor = MultiMarginalPlan(
        measures, np.column_stack(cols), np.full(M, 1.0 / M)
    )
    return measures, weights, competitor


def gen_greedy_worst_case(
    n_measures: int,
    n_atoms: int,
    eps_seq=None,
    *,
    embed: bool = True,
):
    """Adversarial ring family for the sequential mean-coupling construction.

    Each new measure is placed half a spacing away from the current partial
    mean of the running construction, with a tiny ``eps`` nudge that makes
    the slightly nearer atom lie on the opposite side of zero.  The partial
    means are obtained by actually running the sequential rounds during
    generation (with torus-metric costs in raw-coordinate mode, squared
    Euclidean costs in embedded mode), so each offset adapts to the choice
    the algorithm really made.

    Returns the measures and uniform weights; the index-diagonal plan (see
    :func:`diagonal_plan`) is the aligned competitor whose cost
    upper-bounds the optimum.
    """
    if n_measures < 2:
        raise ValueError("need at least 2 measures")
    if n_atoms < 4:
        raise ValueError("need at least 4 atoms per measure")
    M = n_atoms
    spacing = TWO_PI / M
    if eps_seq is None:
        eps_seq = [1e-5 / i for i in range(1, n_measures + 1)]
    eps_seq = [float(e) for e in eps_seq]
    if len(eps_seq) != n_measures:
        raise ValueError(f"need {n_measures} eps values, got {len(eps_seq)}")
    if any(e <= 0.0 or e >= np.pi / (2 * M) for e in eps_seq):
        raise ValueError("eps values must lie in (0, pi / (2 M))")

    base = np.arange(M) * spacing
    measures = [DiscreteMeasure(torus_embed(base) if embed else base[:, None])]

    # Running construction state: one tuple (row of `tuples`) per plan atom.
    tuples = np.arange(M, dtype=np.intp)[:, None]
    masses = np.full(M, 1.0 / M)
    # In raw-torus mode, unwrapped angle representatives per tuple coordinate.
    tuple_angles = base.copy()[:, None]
    zero_tuple_mean = 0.0  # partial-mean angle of the tuple holding atom 0

    for i in range(2, n_measures + 1):
        eps = eps_seq[i - 1]
        x0 = zero_tuple_mean + 0.5 * spacing + _sign(zero_tuple_mean) * eps
        new_angles = x0 + base
        mu_i = DiscreteMeasure(
            torus_embed(new_angles) if embed else new_angles[:, None]
        )
        measures.append(mu_i)

        if embed:
            pts = np.stack(
                [measures[k].points[tuples[:, k]] for k in range(i - 1)], axis=1
            )
            cost = squared_distances(pts.mean(axis=1), mu_i.points)
        else:
            prev_means = tuple_angles.mean(axis=1)
            cost = _torus_sq_dist(prev_means, new_angles)
        rows, cols, flow, _, _, _, _ = network_simplex(masses, mu_i.weights, cost)
        pos = flow > 0.0
        rows, cols, flow = rows[pos], cols[pos], flow[pos]
        tuples = np.column_stack([tuples[rows], cols])
        masses = flow
        if not embed:
            chosen = prev_means[rows] + _wrap(new_angles[cols] - prev_means[rows])
            tuple_angles = np.column_stack([tuple_angles[rows], chosen])

        # Construction invariants, checked on the tuple holding atom 0: the
        # new coordinate is at least half a spacing minus eps away from the
        # previous partial mean, and the new partial mean contracts by 1/i.
        zr = int(np.flatnonzero(tuples[:, 0] == 0)[0])
        new_coord = float(_wrap(new_angles[tuples[zr, i - 1]]))
        disp = abs(float(_wrap(new_coord - zero_tuple_mean)))
        if disp < 0.5 * spacing - eps - 1e-9:
            raise RuntimeError(
                f"round {i}: displacement {disp:.3e} below "
                f"{0.5 * spacing - eps:.3e}; the construction degenerated"
            )
        if embed:
            zpts = np.stack(
                [measures[k].points[tuples[zr, k]] for k in range(i)], axis=0
            )
            zmean = zpts.mean(axis=0)
            zero_tuple_mean = float(np.arctan2(zmean[1], zmean[0]))
            slack = 1.02  # planar means sit slightly off the torus means
        else:
            zero_tuple_mean = float(_wrap(tuple_angles[zr].mean()))
            slack = 1.0 + 1e-9
        if abs(zero_tuple_mean) > slack * (0.5 * spacing) / i:
            raise RuntimeError(
                f"round {i}: partial mean {zero_tuple_mean:.3e} drifted above "
                f"{(0.5 * spacing) / i:.3e}"
            )

    return measures, SimplexWeights.uniform(n_measures)


@dataclass(frozen=True)
class NeitherBetterExample:
    """Six-point configuration where input order decides which algorithm wins."""

    nu1: DiscreteMeasure
    nu2: DiscreteMeasure
    nu3: DiscreteMeasure
    weights: SimplexWeights
    ordering_a: tuple[DiscreteMeasure, ...]  # greedy optimal, reference not
    ordering_b: tuple[DiscreteMeasure, ...]  # reference optimal, greedy not

    def optimal_plan(self, ordering) -> MultiMarginalPlan:
        """The known optimal plan, index-diagonal in either ordering."""
        return diagonal_plan(ordering)


def gen_neither_better() -> NeitherBetterExample:
    """Fixed two-atom configuration separating the two constructions.

    Three centrally symmetric two-point measures with weights 1/4, used in
    the orderings ``(nu1, nu2, nu2, nu3)`` and ``(nu2, nu1, nu3, nu2)``.
    The first ordering makes the sequential mean construction optimal and
    the reference construction suboptimal; the second swaps the roles.
    """
    x1 = np.array([-1.0, 5.0 / 8.0])
    x2 = np.array([0.0, 5.0 / 8.0])
    x3 = np.array([1.0, 5.0 / 8.0])
    nu1 = DiscreteMeasure(np.stack([x1, -x1]))
    nu2 = DiscreteMeasure(np.stack([x2, -x2]))
    nu3 = DiscreteMeasure(np.stack([x3, -x3]))
    return NeitherBetterExample(
        nu1=nu1,
        nu2=nu2,
        nu3=nu3,
        weights=SimplexWeights.uniform(4),
        ordering_a=(nu1, nu2, nu2, nu3),
        ordering_b=(nu2, nu1, nu3, nu2),
    )


def gen_nested_ellipses(
    n_measures: int, resolution: int, seed: int = 0
) -> list[DiscreteMeasure]:
    """Random nested-ellipse ring images rasterized to probability measures.

    Each measure is a ring of roughly two pixels width on a
    ``resolution x resolution`` grid over [0, 1) x [0, 1), with center in
    [0.35, 0.65]^2 and semi-axes in [0.15, 0.35].  Pixel weights are
    uniform over the ring.
    """
    if n_measures < 1:
        raise ValueError("need at least one measure")
    if resolution < 8:
        raise ValueError("resolution below 8 cannot rasterize a ring")
    rng = np.random.default_rng(seed)
    cols, rows = np.meshgrid(np.arange(resolution), np.arange(resolution))
    gx = cols.ravel() / resolution
    gy = rows.ravel() / resolution
    out = []
    for _ in range(n_measures):
        cx, cy = rng.uniform(0.35, 0.65, size=2)
        a, b = rng.uniform(0.15, 0.35, size=2)
        e = np.sqrt(((gx - cx) / a) ** 2 + ((gy - cy) / b) ** 2)
        # Band of about one pixel on each side of the unit level set.
        band = 1.0 / (resolution * min(a, b))
        mask = np.abs(e - 1.0) <= band
        if not np.any(mask):
            raise ValueError(
                f"resolution {resolution} too small to rasterize a ring "
                f"with semi-axes ({a:.3f}, {b:.3f})"
            )
        pts = np.column_stack([gx[mask], gy[mask]])
        out.append(DiscreteMeasure(pts))
    return out


def gen_random_clouds(n_measures: int, n_atoms, dim: int, seed: int = 0) -> list[DiscreteMeasure]:
    """Seeded uniform point clouds in the unit cube with Dirichlet weights.

    ``n_atoms`` may be a single count or one count per measure.
    """
    rng = np.random.default_rng(seed)
    if np.isscalar(n_atoms):
        counts = [int(n_atoms)] * n_measures
    else:
        counts = [int(c) for c in n_atoms]
        if len(counts) != n_measures:
            raise ValueError(f"need {n_measures} atom counts, got {len(counts)}")
    out = []
    for c in counts:
        pts = rng.uniform(0.0, 1.0, size=(c, dim))
        wts = rng.dirichlet(np.ones(c))
        out.append(DiscreteMeasure(pts, wts))
    return out
