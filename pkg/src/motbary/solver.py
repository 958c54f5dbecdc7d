"""Exact two-marginal optimal transport via the transportation simplex.

The solver works on the dense cost matrix and returns a vertex of the
transportation polytope, so couplings have at most ``n + m - 1`` atoms.
Pivoting starts from the north-west-corner basis and normally enters the
arc with the most negative reduced cost (ties broken by lowest flat index);
when degenerate pivots stall the objective the entering rule temporarily
falls back to Bland's first-eligible rule, which cannot cycle.

The public entry points (:func:`solve_ot2`, :func:`w2_squared`) are
restricted to squared Euclidean costs between measures; the underlying
:func:`network_simplex` accepts any cost matrix and is reused internally
for torus-metric instances and sequential solves on raw point arrays.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .measures import Coupling, DiscreteMeasure, FEAS_TOL

__all__ = [
    "TransportProblem",
    "OTResult",
    "SolverConvergenceError",
    "build_cost_matrix",
    "squared_distances",
    "network_simplex",
    "solve_ot2",
    "solve_ot2_full",
    "w2_squared",
    "clear_w2_cache",
]


class SolverConvergenceError(RuntimeError):
    """Pivot budget exceeded before reaching optimality."""

    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


def squared_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distance matrix between point arrays."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    n, m = x.shape[0], y.shape[0]
    if n * m * x.shape[1] <= (1 << 24):
        diff = x[:, None, :] - y[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)
    sq = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * (x @ y.T)
    return np.maximum(sq, 0.0)


@dataclass(frozen=True)
class TransportProblem:
    """Two-marginal problem with a materialized dense cost matrix.

    The matrix uses ``n * m`` memory, which is acceptable at the target
    scales (supports up to a few thousand atoms per side).
    """

    source: DiscreteMeasure
    target: DiscreteMeasure
    cost: np.ndarray

    def __post_init__(self):
        c = self.cost
        if c.shape != (self.source.n_atoms, self.target.n_atoms):
            raise ValueError("cost matrix shape does not match the measures")
        if not np.all(np.isfinite(c)) or np.any(c < 0.0):
            raise ValueError("cost entries must be finite and nonnegative")


def build_cost_matrix(source: DiscreteMeasure, target: DiscreteMeasure) -> TransportProblem:
    """Assemble the squared-Euclidean transport problem for two measures."""
    if source.dim != target.dim:
        raise ValueError(f"dimension mismatch: {source.dim} vs {target.dim}")
    return TransportProblem(source, target, squared_distances(source.points, target.points))


def _northwest_corner(a: np.ndarray, b: np.ndarray):
    """Initial basic feasible solution with exactly n + m - 1 cells."""
    n, m = a.shape[0], b.shape[0]
    ra = a.copy()
    rb = b.copy()
    rows = np.empty(n + m - 1, dtype=np.intp)
    cols = np.empty(n + m - 1, dtype=np.intp)
    flow = np.empty(n + m - 1)
    i = j = 0
    for t in range(n + m - 1):
        x = min(ra[i], rb[j])
        rows[t] = i
        cols[t] = j
        flow[t] = x
        ra[i] -= x
        rb[j] -= x
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return rows, cols, flow


def network_simplex(a, b, cost, *, pivot_budget: int | None = None):
    """Solve ``min <cost, P>`` over couplings of the histograms ``a, b``.

    Parameters
    ----------
    a, b : arrays of shape (n,) and (m,)
        Source and target masses; must have equal totals within ``FEAS_TOL``.
    cost : array of shape (n, m)
        Arbitrary finite cost matrix.
    pivot_budget : int, optional
        Maximum number of pivots, default ``50 * (n + m)**2``.

    Returns
    -------
    rows, cols, flows : arrays
        The basic cells (including degenerate zero-flow ones) of the
        optimal vertex.
    u, v : arrays
        Optimal dual potentials with ``u[i] + v[j] <= cost[i, j]`` and
        equality on basic cells.
    objective : float
    n_pivots : int
    """
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    C = np.ascontiguousarray(cost, dtype=float)
    n, m = C.shape
    if a.shape != (n,) or b.shape != (m,):
        raise ValueError("marginal shapes do not match the cost matrix")
    if abs(a.sum() - b.sum()) > FEAS_TOL:
        raise ValueError(
            f"unbalanced problem: masses {a.sum():.12g} vs {b.sum():.12g}"
        )
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise ValueError("masses must be nonnegative")
    if pivot_budget is None:
        pivot_budget = 50 * (n + m) ** 2

    rows, cols, flow = _northwest_corner(a, b)
    rows = list(rows)
    cols = list(cols)
    flow = list(flow)
    n_basic = n + m - 1

    enter_tol = 1e-11 * max(1.0, float(np.abs(C).max()))
    u = np.zeros(n)
    v = np.zeros(m)
    parent = np.full(n + m, -1, dtype=np.intp)
    parent_cell = np.full(n + m, -1, dtype=np.intp)
    depth = np.zeros(n + m, dtype=np.intp)
    # Rooted spanning tree over the n + m nodes; adj[node] maps basic cell
    # position -> neighbour node.  Maintained incrementally across pivots.
    adj: list[dict[int, int]] = [{} for _ in range(n + m)]
    for t in range(n_basic):
        adj[rows[t]][t] = n + cols[t]
        adj[n + cols[t]][t] = rows[t]

    def set_potential(node: int, via: int) -> None:
        if node >= n:
            v[node - n] = C[via, node - n] - u[via]
        else:
            u[node] = C[node, via - n] - v[via - n]

    def attach_subtree(root_node: int) -> int:
        """(Re)attach the subtree hanging at root_node; returns nodes seen."""
        set_potential(root_node, parent[root_node])
        stack = [root_node]
        seen = 0
        while stack:
            node = stack.pop()
            seen += 1
            pc = parent_cell[node]
            for cpos, nb in adj[node].items():
                if cpos == pc:
                    continue
                parent[nb] = node
                parent_cell[nb] = cpos
                depth[nb] = depth[node] + 1
                set_potential(nb, node)
                stack.append(nb)
        return seen

    # Initial full labelling from the root (row 0).
    parent[0] = -1
    parent_cell[0] = -1
    depth[0] = 0
    u[0] = 0.0
    seen = 1
    for cpos, nb in adj[0].items():
        parent[nb] = 0
        parent_cell[nb] = cpos
        depth[nb] = 1
        seen += attach_subtree(nb)
    if seen != n + m:
        raise SolverConvergenceError("initial basis is not a spanning tree", 0)

    n_pivots = 0
    stall = 0
    bland = False
    red = np.empty_like(C)
    while True:
        np.subtract(C, u[:, None], out=red)
        red -= v[None, :]
        if bland:
            candidates = np.flatnonzero(red.ravel() < -enter_tol)
            if candidates.size == 0:
                break
            t_flat = int(candidates[0])
        else:
            t_flat = int(red.argmin())
            if red.flat[t_flat] >= -enter_tol:
                break
        ei, ej = divmod(t_flat, m)

        if n_pivots >= pivot_budget:
            raise SolverConvergenceError(
                f"pivot budget {pivot_budget} exceeded", n_pivots
            )
        n_pivots += 1

        # Unique cycle through the entering cell: splice the tree paths from
        # both endpoints at their lowest common ancestor.
        na, nb_ = ei, n + ej
        path_a: list[int] = []  # cells from row endpoint up
        path_b: list[int] = []  # cells from col endpoint up
        da, db = depth[na], depth[nb_]
        while da > db:
            path_a.append(parent_cell[na])
            na = parent[na]
            da -= 1
        while db > da:
            path_b.append(parent_cell[nb_])
            nb_ = parent[nb_]
            db -= 1
        while na != nb_:
            path_a.append(parent_cell[na])
            na = parent[na]
            path_b.append(parent_cell[nb_])
            nb_ = parent[nb_]
        cycle = [-1] + path_b + path_a[::-1]  # -1 stands for the entering cell

        theta = np.inf
        leave_pos = -1
        leave_flat = -1
        sign = 1
        for cell in cycle:
            if sign < 0:
                f = flow[cell]
                flat = rows[cell] * m + cols[cell]
                # Masses equal within 1e-14 count as ties, broken by lowest
                # flat cell index for deterministic output.
                if f < theta - 1e-14:
                    theta, leave_pos, leave_flat = f, cell, flat
                elif f <= theta + 1e-14 and flat < leave_flat:
                    theta = min(theta, f)
                    leave_pos, leave_flat = cell, flat
            sign = -sign
        if leave_pos < 0:
            raise SolverConvergenceError("no leaving arc found (degenerate basis)", n_pivots)

        theta = flow[leave_pos]
        sign = 1
        for cell in cycle:
            if cell >= 0:
                flow[cell] += sign * theta
            sign = -sign
        if flow[leave_pos] < -1e-9:
            raise SolverConvergenceError("negative flow after pivot", n_pivots)

        # Swap the leaving edge for the entering one.  Removing the leaving
        # edge detaches the subtree below its child endpoint; the entering
        # edge reconnects that subtree through exactly one of its endpoints,
        # which becomes the subtree's new root.  Only that subtree needs
        # re-labelling; the rest of the tree keeps its potentials.
        li, ljc = rows[leave_pos], n + cols[leave_pos]
        child = li if parent_cell[li] == leave_pos else ljc
        del adj[li][leave_pos]
        del adj[ljc][leave_pos]
        rows[leave_pos] = ei
        cols[leave_pos] = ej
        flow[leave_pos] = theta
        ejc = n + ej
        adj[ei][leave_pos] = ejc
        adj[ejc][leave_pos] = ei

        node = ei
        in_child = False
        while node != -1:
            if node == child:
                in_child = True
                break
            node = parent[node]
        e_in, e_out = (ei, ejc) if in_child else (ejc, ei)
        parent[e_in] = e_out
        parent_cell[e_in] = leave_pos
        depth[e_in] = depth[e_out] + 1
        attach_subtree(e_in)

        if theta <= 1e-14:
            stall += 1
            if stall > n + m:
                bland = True
        else:
            stall = 0
            bland = False

    rows_arr = np.asarray(rows, dtype=np.intp)
    cols_arr = np.asarray(cols, dtype=np.intp)
    flow_arr = np.maximum(np.asarray(flow), 0.0)
    objective = float(np.dot(flow_arr, C[rows_arr, cols_arr]))
    return rows_arr, cols_arr, flow_arr, u, v, objective, n_pivots


@dataclass(frozen=True)
class OTResult:
    """Full solver output including the dual certificate."""

    coupling: Coupling
    cost: float
    potential_source: np.ndarray
    potential_target: np.ndarray
    n_pivots: int


def solve_ot2_full(problem: TransportProblem) -> OTResult:
    """Solve a transport problem, returning the coupling and dual potentials."""
    rows, cols, flow, u, v, objective, n_pivots = network_simplex(
        problem.source.weights, problem.target.weights, problem.cost
    )
    pos = flow > 0.0
    coupling = Coupling(
        (problem.source, problem.target),
        np.column_stack([rows[pos], cols[pos]]),
        flow[pos],
    )
    n, m = problem.cost.shape
    if coupling.n_atoms > n + m - 1:
        raise RuntimeError(
            f"coupling has {coupling.n_atoms} atoms, above the vertex bound {n + m - 1}"
        )
    return OTResult(coupling, objective, u, v, n_pivots)


def solve_ot2(problem: TransportProblem) -> tuple[Coupling, float]:
    """Exact optimal coupling and cost for a two-marginal problem."""
    res = solve_ot2_full(problem)
    return res.coupling, res.cost


_W2_CACHE: dict[tuple[bytes, bytes], float] = {}
_W2_LOCK = threading.Lock()


def w2_squared(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Squared Wasserstein-2 distance between two discrete measures.

    Results are cached by content hash; the distance is symmetric so the
    cache key is the sorted digest pair.
    """
    key = tuple(sorted((mu.digest(), nu.digest())))
    with _W2_LOCK:
        hit = _W2_CACHE.get(key)
    if hit is not None:
        return hit
    _, value = solve_ot2(build_cost_matrix(mu, nu))
    with _W2_LOCK:
        _W2_CACHE[key] = value
    return value


def clear_w2_cache() -> None:
    with _W2_LOCK:
        _W2_CACHE.clear()
