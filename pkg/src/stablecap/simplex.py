"""Dense two-phase simplex for standard-form linear programs.

Solves ``min c @ x  s.t.  A @ x = b, x >= 0``.  Entering columns follow
Dantzig's rule, with Bland's rule taking over during degenerate stretches.
Problems here are small (a few rows, up to ~1e5 columns), so a dense tableau
is perfectly adequate and keeps the package free of an LP dependency.

When the program is infeasible a Farkas certificate ``y`` is returned with
``A.T @ y <= 0`` and ``b @ y > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
BLAND_AFTER = 50


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    value: float | None = None
    dual: np.ndarray | None = None
    farkas: np.ndarray | None = None
    basis: list[int] | None = None
    pivots: int = 0


class _Tableau:
    """Row-reduced tableau ``[T | rhs]`` with an explicit basis list."""

    def __init__(self, T: np.ndarray, rhs: np.ndarray, basis: list[int], piv_tol: float):
        self.T = T
        self.rhs = rhs
        self.basis = basis
        self.piv_tol = piv_tol
        self.pivots = 0

    def pivot(self, r: int, j: int) -> None:
        T, rhs = self.T, self.rhs
        pv = T[r, j]
        T[r] /= pv
        rhs[r] /= pv
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.nonzero(col)[0]
        if nz.size:
            T[nz] -= np.outer(col[nz], T[r])
            rhs[nz] -= col[nz] * rhs[r]
        T[r, j] = 1.0
        self.basis[r] = j
        self.pivots += 1

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        cb = cost[self.basis]
        return cost - cb @ self.T

    def run(self, cost: np.ndarray, allowed: np.ndarray, tol: float, max_pivots: int) -> str:
        # Dantzig's rule, falling back to Bland's rule after a streak of
        # degenerate pivots; Bland cannot cycle, so the streak always ends
        degenerate = 0
        while self.pivots < max_pivots:
            rc = self.reduced_costs(cost)
            neg = (rc < -tol) & allowed
            cand = np.nonzero(neg)[0]
            if cand.size == 0:
                return OPTIMAL
            bland = degenerate >= BLAND_AFTER
            j = int(cand[0]) if bland else int(cand[np.argmin(rc[cand])])
            col = self.T[:, j]
            rows = np.nonzero(col > self.piv_tol)[0]
            if rows.size == 0:
                return UNBOUNDED
            ratios = self.rhs[rows] / col[rows]
            best = ratios.min()
            tied = rows[ratios <= best + tol * max(1.0, abs(best))]
            if bland:
                # among ties leave the lowest basic variable index
                r = int(min(tied, key=lambda i: self.basis[i]))
            else:
                r = int(tied[np.argmax(col[tied])])
            degenerate = degenerate + 1 if best <= tol else 0
            self.pivot(r, j)
        raise RuntimeError("simplex pivot limit reached")


def linprog_eq(
    c,
    A,
    b,
    tol: float = 1e-9,
    max_pivots: int = 200_000,
) -> LPResult:
    """Minimize ``c @ x`` subject to ``A @ x = b`` and ``x >= 0``."""
    A = np.array(A, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("dimension mismatch in linear program")

    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b *= sign

    # phase 1 on [A | I] with the artificials as the starting basis
    T = np.hstack([A, np.eye(m)])
    tab = _Tableau(T, b.copy(), list(range(n, n + m)), piv_tol=1e-12)
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    allowed = np.ones(n + m, dtype=bool)
    tab.run(cost1, allowed, tol, max_pivots)
    phase1 = float(cost1[tab.basis] @ tab.rhs)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if phase1 > tol * scale:
        y = _basis_duals(T0=np.hstack([A, np.eye(m)]), basis=tab.basis, cost=cost1)
        # phase-1 duals satisfy A'^T y <= 0 < b'.y; undo the row flips
        farkas = y * sign
        return LPResult(INFEASIBLE, farkas=farkas, pivots=tab.pivots)

    # drive artificials out of the basis; rows where that fails are redundant
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if tab.basis[r] >= n:
            row = tab.T[r, :n]
            cand = np.nonzero(np.abs(row) > 1e-9)[0]
            if cand.size:
                tab.pivot(r, int(cand[0]))
            else:
                keep[r] = False
    if not keep.all():
        tab.T = tab.T[keep]
        tab.rhs = tab.rhs[keep]
        tab.basis = [bv for bv, k in zip(tab.basis, keep) if k]

    cost2 = np.concatenate([c, np.zeros(m)])
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    status = tab.run(cost2, allowed, tol, max_pivots)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, pivots=tab.pivots)

    x = np.zeros(n + m)
    x[tab.basis] = tab.rhs
    x = np.clip(x[:n], 0.0, None)
    basis = sorted(tab.basis)
    rows = np.nonzero(keep)[0]
    y = np.zeros(m)
    y[rows] = _basis_duals(np.hstack([A, np.eye(m)])[rows], tab.basis, cost2)
    return LPResult(OPTIMAL, x=x, value=float(c @ x), dual=y * sign, basis=basis, pivots=tab.pivots)


def _basis_duals(T0: np.ndarray, basis: list[int], cost: np.ndarray) -> np.ndarray:
    B = T0[:, basis]
    y, *_ = np.linalg.lstsq(B.T, cost[basis], rcond=None)
    return y


def feasible_point(A, b, tol: float = 1e-9) -> LPResult:
    """Phase-1 only: a point of ``{x >= 0 : A x = b}`` or a Farkas certificate."""
    A = np.asarray(A, dtype=float)
    return linprog_eq(np.zeros(A.shape[1]), A, b, tol=tol)
