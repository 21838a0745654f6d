"""Small dense two-phase primal simplex for standard-form linear programs.

    minimize    c @ x
    subject to  A @ x == b,  x >= 0

Problems here have at most a few dozen equality rows and a few thousand
columns, so a dense tableau is both simple and fast. The entering column
is chosen by Bland's rule, or by the most negative reduced cost with a
fall back to Bland's rule once pivots stop making progress
(``rule="dantzig"``). Either way the method terminates on degenerate
problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LPError", "InfeasibleLP", "UnboundedLP", "LPResult", "solve_standard_form"]

PIVOT_TOL = 1e-11
COST_TOL = 1e-10
FEAS_TOL = 1e-9


class LPError(RuntimeError):
    pass


class InfeasibleLP(LPError):
    pass


class UnboundedLP(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    basis: tuple
    nit: int


class _Tableau:
    def __init__(self, T: np.ndarray, basis: np.ndarray, rule: str, max_iter: int):
        self.T = T
        self.basis = basis
        self.rule = rule
        self.max_iter = max_iter
        self.nit = 0

    def _entering(self, allowed: np.ndarray, bland: bool) -> int:
        red = self.T[-1, :-1]
        candidates = np.flatnonzero((red < -COST_TOL) & allowed)
        if candidates.size == 0:
            return -1
        if bland:
            return int(candidates[0])
        return int(candidates[np.argmin(red[candidates])])

    def _leaving(self, col: int) -> int:
        column = self.T[:-1, col]
        rhs = self.T[:-1, -1]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return -1
        ratios = rhs[rows] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        # smallest basic variable index among ties (Bland)
        return int(tied[np.argmin(self.basis[tied])])

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        factor = T[:, col].copy()
        factor[row] = 0.0
        T -= np.outer(factor, T[row])
        self.basis[row] = col
        self.nit += 1

    def run(self, allowed: np.ndarray) -> None:
        bland = self.rule == "bland"
        stalled = 0
        while True:
            if self.nit >= self.max_iter:
                raise LPError(f"simplex did not converge in {self.max_iter} pivots")
            col = self._entering(allowed, bland)
            if col < 0:
                return
            row = self._leaving(col)
            if row < 0:
                raise UnboundedLP("objective is unbounded below")
            before = self.T[-1, -1]
            self.pivot(row, col)
            if abs(self.T[-1, -1] - before) <= 1e-14 * max(1.0, abs(before)):
                stalled += 1
                if stalled > 10:
                    bland = True
            else:
                stalled = 0


def solve_standard_form(c, A, b, rule: str = "dantzig", max_iter: int = 50_000) -> LPResult:
    """Solve ``min c@x s.t. A@x = b, x >= 0``.

    Parameters
    ----------
    c : array_like, shape (n,)
    A : array_like, shape (m, n)
    b : array_like, shape (m,)
    rule : {"dantzig", "bland"}
        Entering-column rule. ``"bland"`` uses the lowest-index improving
        column throughout; ``"dantzig"`` switches to it after ten pivots
        without objective progress.

    Returns
    -------
    LPResult
        Optimal ``x`` (basic components re-solved from the final basis),
        objective value, basis column indices and the pivot count.

    Raises
    ------
    InfeasibleLP, UnboundedLP
    """
    if rule not in ("dantzig", "bland"):
        raise ValueError(f"unknown pivot rule {rule!r}")
    c = np.asarray(c, dtype=float)
    A = np.array(A, dtype=float, ndmin=2)
    b = np.array(b, dtype=float).reshape(-1)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")

    flip = b < 0
    A[flip] *= -1
    b = np.where(flip, -b, b)

    # phase 1 tableau: [A | I | b] with the artificial-sum objective row
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    tab = _Tableau(T, np.arange(n, n + m), rule, max_iter)
    allowed = np.ones(n + m, dtype=bool)
    tab.run(allowed)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -tab.T[-1, -1] > FEAS_TOL * scale:
        raise InfeasibleLP(f"equality system is infeasible (residual {-tab.T[-1, -1]:.3e})")

    # drive artificials out of the basis; rows that cannot be cleared are redundant
    keep = np.ones(m, dtype=bool)
    for row in range(m):
        if tab.basis[row] < n:
            continue
        nonzero = np.flatnonzero(np.abs(tab.T[row, :n]) > 1e-9)
        if nonzero.size:
            tab.pivot(row, int(nonzero[0]))
        else:
            keep[row] = False
    rows = np.flatnonzero(keep)
    T2 = np.zeros((rows.size + 1, n + 1))
    T2[:-1, :n] = tab.T[rows, :n]
    T2[:-1, -1] = tab.T[rows, -1]
    basis = tab.basis[rows].copy()
    T2[-1, :n] = c
    T2[-1, :] -= c[basis] @ T2[:-1, :]
    tab2 = _Tableau(T2, basis, rule, max_iter)
    tab2.nit = tab.nit
    tab2.run(np.ones(n, dtype=bool))

    x = np.zeros(n)
    B = A[np.ix_(rows, tab2.basis)]
    try:
        xb = np.linalg.solve(B, b[rows])
    except np.linalg.LinAlgError:
        xb = tab2.T[:-1, -1]
    x[tab2.basis] = np.maximum(xb, 0.0)
    return LPResult(x=x, fun=float(c @ x), basis=tuple(int(j) for j in tab2.basis), nit=tab2.nit)
