"""Input coercion helpers shared by the estimator API and the CLI."""

from __future__ import annotations

import numpy as np

from .measures import DiscreteMeasure, SimplexWeights

__all__ = ["as_measure", "check_measure_list", "check_weights"]


def as_measure(obj) -> DiscreteMeasure:
    """Coerce to a DiscreteMeasure.

    Accepts an existing measure, a two-element *tuple* ``(points, weights)``,
    or a bare point array (uniform weights).  Only tuples are read as
    pairs: a nested list is always a point array, so a 2 x 2 cloud given
    as ``[[a, b], [c, d]]`` cannot be mistaken for points plus weights.
    """
    if isinstance(obj, DiscreteMeasure):
        return obj
    if isinstance(obj, tuple) and len(obj) == 2:
        points, weights = obj
        return DiscreteMeasure(points, weights)
    return DiscreteMeasure(np.asarray(obj, dtype=float))


def check_measure_list(X, *, min_measures: int = 2) -> tuple[DiscreteMeasure, ...]:
    """Validate a collection of measures with a common dimension."""
    try:
        items = list(X)
    except TypeError:
        raise ValueError("expected a sequence of measures") from None
    measures = tuple(as_measure(item) for item in items)
    if len(measures) < min_measures:
        raise ValueError(f"need at least {min_measures} measures, got {len(measures)}")
    dims = {mu.dim for mu in measures}
    if len(dims) != 1:
        raise ValueError(f"measures have mixed dimensions {sorted(dims)}")
    return measures


def check_weights(weights, n: int) -> SimplexWeights:
    """Coerce to SimplexWeights of length ``n``; ``None`` means uniform."""
    if weights is None:
        return SimplexWeights.uniform(n)
    if isinstance(weights, SimplexWeights):
        w = weights
    else:
        w = SimplexWeights(weights)
    if len(w) != n:
        raise ValueError(f"{len(w)} weights for {n} measures")
    return w
