"""Dense two-phase revised simplex for marginal-constrained linear programs.

The programs solved here are ``min c'x  s.t.  Ax = b, x >= 0`` where every
column of ``A`` is a 0/1 vector with exactly one ``1`` per constraint
block.  Columns are therefore represented by an integer array ``idx`` of
shape ``(n_vars, n_blocks)`` giving the row hit in each block, which keeps
the reduced-cost scan a single fancy-indexing sum even for hundreds of
thousands of variables.

Phase 1 starts from an all-artificial identity basis; artificial variables
left in the basis at level zero are pivoted out where possible and their
rows dropped as redundant otherwise (the marginal constraint systems
handled here always carry ``n_blocks - 1`` redundant rows).  Entering
variables are chosen by most negative reduced cost with lowest-index
tie-breaks, falling back to Bland's rule after a run of degenerate pivots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LpResult", "LpError", "solve_block_lp"]


class LpError(RuntimeError):
    pass


@dataclass(frozen=True)
class LpResult:
    """Optimal vertex of a block-structured LP.

    ``support`` holds the variable ids with positive value and ``values``
    their levels.  ``duals`` is indexed by original constraint row (zero on
    rows dropped as redundant) and satisfies
    ``c_j - sum(duals[rows(j)]) >= -tol`` for every variable, with
    ``duals @ b == objective``.
    """

    support: np.ndarray
    values: np.ndarray
    objective: float
    duals: np.ndarray
    basis_size: int
    n_pivots: int


class _BlockSimplex:
    """Revised simplex state over 0/1 block-structured columns.

    Artificial variable ids start at ``n_vars``; artificial ``n_vars + r``
    is the slack of original row ``r``.  Dropped redundant rows are mapped
    to a sentinel position so structural columns lose that coordinate.
    """

    def __init__(self, idx: np.ndarray, c: np.ndarray, b: np.ndarray, tol: float):
        self.idx = idx
        self.c = c
        self.n_vars, self.n_blocks = idx.shape
        self.n_rows_full = b.shape[0]
        self.row_map = np.arange(self.n_rows_full)
        self.n_rows = self.n_rows_full
        self.basis = np.arange(self.n_vars, self.n_vars + self.n_rows)
        self.x_b = np.maximum(b.astype(float), 0.0)
        self.tol = tol
        self.scale = max(1.0, float(np.abs(c).max()) if c.size else 1.0)
        self.n_pivots = 0
        self._cur = None  # cached sentinel-mapped idx

    def cur_idx(self) -> np.ndarray:
        if self._cur is None:
            mapped = self.row_map[self.idx]
            self._cur = np.where(mapped >= 0, mapped, self.n_rows)
        return self._cur

    def column(self, var: int) -> np.ndarray:
        col = np.zeros(self.n_rows + 1)
        if var >= self.n_vars:
            r = self.row_map[var - self.n_vars]
            if r >= 0:
                col[r] = 1.0
        else:
            np.add.at(col, self.cur_idx()[var], 1.0)
        return col[: self.n_rows]

    def basis_matrix(self) -> np.ndarray:
        B = np.empty((self.n_rows, self.n_rows))
        for p, var in enumerate(self.basis):
            B[:, p] = self.column(int(var))
        return B

    def basis_costs(self, phase: int) -> np.ndarray:
        if phase == 1:
            return np.where(self.basis >= self.n_vars, 1.0, 0.0)
        out = np.zeros(self.n_rows)
        struct = self.basis < self.n_vars
        out[struct] = self.c[self.basis[struct]]
        return out

    def run_phase(self, phase: int, max_iter: int) -> np.ndarray:
        """Pivot to optimality for the given phase; returns final duals."""
        stall = 0
        bland = False
        cur = self.cur_idx()
        while True:
            B = self.basis_matrix()
            try:
                y = np.linalg.solve(B.T, self.basis_costs(phase))
            except np.linalg.LinAlgError as exc:
                raise LpError(f"singular basis in phase {phase}") from exc
            y_ext = np.append(y, 0.0)
            obj_c = np.zeros(self.n_vars) if phase == 1 else self.c
            rc = obj_c - y_ext[cur].sum(axis=1)
            in_basis = np.zeros(self.n_vars, dtype=bool)
            struct_in = self.basis[self.basis < self.n_vars]
            in_basis[struct_in] = True
            rc[in_basis] = 0.0

            gate = -self.tol * self.scale
            if bland:
                elig = np.flatnonzero(rc < gate)
                if elig.size == 0:
                    return y
                enter = int(elig[0])
            else:
                enter = int(rc.argmin())
                if rc[enter] >= gate:
                    return y

            d = np.linalg.solve(B, self.column(enter))
            pos = d > 1e-11
            if not np.any(pos):
                raise LpError("unbounded direction in a bounded transport polytope")
            ratios = np.full(self.n_rows, np.inf)
            ratios[pos] = self.x_b[pos] / d[pos]
            theta = float(ratios.min())
            ties = np.flatnonzero(ratios <= theta + 1e-14)
            art_ties = ties[self.basis[ties] >= self.n_vars]
            pool = art_ties if art_ties.size else ties
            leave = int(pool[np.argmin(self.basis[pool])])

            if self.n_pivots >= max_iter:
                raise LpError(f"simplex iteration budget exceeded ({self.n_pivots} pivots)")
            self.n_pivots += 1
            theta = min(theta, float(self.x_b[leave] / d[leave]))
            self.x_b = np.maximum(self.x_b - theta * d, 0.0)
            self.x_b[leave] = theta
            self.basis = self.basis.copy()
            self.basis[leave] = enter

            if theta <= 1e-13:
                stall += 1
                if stall > self.n_rows + self.n_blocks:
                    bland = True
            else:
                stall = 0
                bland = False

    def clear_artificials(self) -> None:
        """Swap out zero-level basic artificials; drop redundant rows."""
        while True:
            art_pos = np.flatnonzero(self.basis >= self.n_vars)
            if art_pos.size == 0:
                return
            p = int(art_pos[0])
            if self.x_b[p] > 1e-9:
                raise LpError("artificial variable stuck at a positive level")
            B = self.basis_matrix()
            e_p = np.zeros(self.n_rows)
            e_p[p] = 1.0
            w = np.linalg.solve(B.T, e_p)
            w_ext = np.append(w, 0.0)
            scores = w_ext[self.cur_idx()].sum(axis=1)
            in_basis = np.zeros(self.n_vars, dtype=bool)
            in_basis[self.basis[self.basis < self.n_vars]] = True
            cands = np.flatnonzero((np.abs(scores) > 1e-9) & ~in_basis)
            if cands.size:
                self.basis = self.basis.copy()
                self.basis[p] = int(cands[0])
                self.x_b[p] = 0.0
                continue
            # No structural column reaches this row: it is redundant.
            drop_row = int(self.row_map[self.basis[p] - self.n_vars])
            keep = np.ones(self.n_rows, dtype=bool)
            keep[drop_row] = False
            old_to_new = -np.ones(self.n_rows + 1, dtype=np.intp)
            old_to_new[:-1][keep] = np.arange(self.n_rows - 1)
            alive = self.row_map >= 0
            self.row_map[alive] = old_to_new[self.row_map[alive]]
            mask = np.ones(self.n_rows, dtype=bool)
            mask[p] = False
            self.basis = self.basis[mask]
            self.x_b = self.x_b[mask]
            self.n_rows -= 1
            self._cur = None


def solve_block_lp(idx, c, b, *, tol: float = 1e-10, max_iter: int | None = None) -> LpResult:
    """Minimize ``c'x`` over ``{x >= 0 : Ax = b}`` for block 0/1 columns.

    Parameters
    ----------
    idx : int array of shape (n_vars, n_blocks)
        Row hit by each variable in each constraint block.
    c : array of shape (n_vars,)
        Objective coefficients.
    b : array of shape (n_rows,)
        Right-hand sides, all nonnegative.
    """
    idx = np.ascontiguousarray(idx, dtype=np.intp)
    c = np.ascontiguousarray(c, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if np.any(b < -1e-12):
        raise LpError("right-hand side must be nonnegative")

    sx = _BlockSimplex(idx, c, b, tol)
    if max_iter is None:
        max_iter = 50 * (sx.n_rows + 1) ** 2 + 1000

    sx.run_phase(1, max_iter)
    art = sx.basis >= sx.n_vars
    phase1_obj = float(sx.x_b[art].sum()) if np.any(art) else 0.0
    if phase1_obj > 1e-9 * max(1.0, float(b.max(initial=0.0))):
        raise LpError(f"no feasible point found (phase-1 objective {phase1_obj:.3e})")
    sx.clear_artificials()
    y = sx.run_phase(2, max_iter)

    duals = np.zeros(sx.n_rows_full)
    alive = sx.row_map >= 0
    duals[alive] = y[sx.row_map[alive]]
    values = sx.x_b
    support_vars = sx.basis
    pos = values > 1e-15
    objective = float(c[support_vars] @ values)
    return LpResult(
        support=support_vars[pos].copy(),
        values=values[pos].copy(),
        objective=objective,
        duals=duals,
        basis_size=sx.n_rows,
        n_pivots=sx.n_pivots,
    )
