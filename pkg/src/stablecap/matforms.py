"""Matrices with prescribed marginals and their product polynomials.

``A`` maps to ``f_A(x) = prod_i (A x)_i``; the permanent of ``A`` is the
coefficient of ``x_1 ... x_n`` in ``f_A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .polycore import PolyError, SparsePoly, linear_form

ROW_TOL = 1e-9
STRUCTURAL_ZERO = 1e-12
PRODUCT_POLY_CAP = 10
RYSER_CAP = 20
ORACLE_CAP = 8


class SinkhornError(RuntimeError):
    """Sinkhorn scaling did not reach the requested tolerance."""

    def __init__(self, msg: str, best: "SinkhornResult"):
        super().__init__(msg)
        self.best = best


@dataclass
class RowStochasticMatrix:
    """Non-negative square matrix together with its target column sums."""

    entries: np.ndarray
    target_marginals: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        self.target_marginals = np.asarray(self.target_marginals, dtype=float)
        n = self.entries.shape[0]
        if self.entries.shape != (n, n) or self.target_marginals.shape != (n,):
            raise PolyError("matrix must be square with one marginal per column")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def membership_error(self) -> float:
        """Max deviation from Mat_n(alpha): row sums 1, column sums alpha, entries >= 0."""
        A = self.entries
        return float(
            max(
                np.abs(A.sum(axis=1) - 1).max(initial=0.0),
                np.abs(A.sum(axis=0) - self.target_marginals).max(initial=0.0),
                -A.min(initial=0.0),
            )
        )

    def in_mat(self, tol: float = ROW_TOL) -> bool:
        return self.membership_error() <= tol


def _square(A) -> np.ndarray:
    A = np.asarray(getattr(A, "entries", A), dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PolyError(f"expected a square matrix, got shape {A.shape}")
    return A


def product_poly(A, cap: int = PRODUCT_POLY_CAP) -> SparsePoly:
    """Expand ``prod_i (A x)_i``."""
    A = _square(A)
    n = A.shape[0]
    if n > cap:
        raise PolyError(f"n = {n} exceeds product expansion cap {cap}")
    if np.any(A < 0):
        raise PolyError("matrix must be entrywise non-negative")
    out = SparsePoly(n, {(0,) * n: 1.0})
    for row in A:
        out = out * linear_form(row)
    if len(out) == 0:
        return SparsePoly(n, {}, degree=n)
    return out


def permanent(A, backend: str = "ryser") -> float:
    A = _square(A)
    if backend == "ryser":
        return permanent_ryser(A)
    if backend == "oracle":
        return permanent_oracle(A)
    raise ValueError(f"unknown permanent backend {backend!r}")


def permanent_ryser(A) -> float:
    """Ryser's formula over Gray-code ordered column subsets.

    ``per(A) = (-1)^n sum_S (-1)^{|S|} prod_i sum_{j in S} a_ij``; the terms are
    accumulated with ``math.fsum`` to keep cancellation under control.
    """
    A = _square(A)
    n = A.shape[0]
    if n > RYSER_CAP:
        raise PolyError(f"n = {n} exceeds Ryser cap {RYSER_CAP}")
    if n == 0:
        return 1.0
    cols = [A[:, j].tolist() for j in range(n)]
    rowsum = [0.0] * n
    terms = []
    in_set = [False] * n
    size = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1  # bit flipped between gray(k-1) and gray(k)
        col = cols[j]
        if in_set[j]:
            in_set[j] = False
            size -= 1
            for i in range(n):
                rowsum[i] -= col[i]
        else:
            in_set[j] = True
            size += 1
            for i in range(n):
                rowsum[i] += col[i]
        prod = 1.0
        for v in rowsum:
            prod *= v
        terms.append(prod if (n - size) % 2 == 0 else -prod)
    return math.fsum(terms)


def permanent_oracle(A) -> float:
    """``d_1 ... d_n prod_i (A x)_i``, i.e. the coefficient of ``x^1``."""
    A = _square(A)
    n = A.shape[0]
    if n > ORACLE_CAP:
        raise PolyError(f"n = {n} exceeds derivative-oracle cap {ORACLE_CAP}")
    return product_poly(A, cap=ORACLE_CAP).coefficient((1,) * n)


@dataclass
class SinkhornResult:
    scaled: RowStochasticMatrix
    row_scalers: np.ndarray
    col_scalers: np.ndarray
    iterations: int
    residual: float


def sinkhorn(A, target=None, tol: float = 1e-9, max_iters: int = 100_000) -> SinkhornResult:
    """Alternate row normalization (to 1) and column normalization (to target).

    Raises :class:`SinkhornError` (carrying the last iterate) when the residual
    does not reach ``tol`` within ``max_iters`` or stops decreasing.
    """
    A = _square(A)
    n = A.shape[0]
    target = np.ones(n) if target is None else np.asarray(target, dtype=float)
    if target.shape != (n,) or np.any(target < 0):
        raise PolyError("target must be a non-negative vector of length n")
    if abs(target.sum() - n) > 1e-9 * n:
        raise PolyError("target must sum to n")
    if np.any(A < 0):
        raise PolyError("matrix must be entrywise non-negative")
    if np.any(A.sum(axis=1) <= 0) or np.any(A.sum(axis=0) <= 0):
        raise PolyError("matrix has a zero row or column")
    if np.any(target == 0):
        raise PolyError("zero target marginal cannot be reached by positive scaling")

    r = np.ones(n)
    c = np.ones(n)
    history: list[float] = []

    def result(it: int, res: float) -> SinkhornResult:
        B = r[:, None] * A * c[None, :]
        return SinkhornResult(RowStochasticMatrix(B, target), r.copy(), c.copy(), it, res)

    residual = math.inf
    for it in range(1, max_iters + 1):
        r = 1.0 / (A @ c)
        c = target / (A.T @ r)
        B = r[:, None] * A * c[None, :]
        residual = float(max(np.abs(B.sum(axis=1) - 1).max(), np.abs(B.sum(axis=0) - target).max()))
        if residual <= tol:
            return result(it, residual)
        history.append(residual)
        if len(history) > 100:
            old = history[-101]
            if old - residual < 1e-14 * old:
                raise SinkhornError(f"residual plateau at {residual:.3e} after {it} iterations", result(it, residual))
    raise SinkhornError(f"no convergence after {max_iters} iterations (residual {residual:.3e})", result(max_iters, residual))


def max_matching(support: np.ndarray) -> list[int]:
    """Maximum bipartite matching (rows to columns) by augmenting paths.

    Returns ``match_row`` with the matched column of each row or -1.
    """
    n_rows, n_cols = support.shape
    adj = [np.nonzero(support[i])[0].tolist() for i in range(n_rows)]
    match_col = [-1] * n_cols
    match_row = [-1] * n_rows

    def augment(i: int, seen: list[bool]) -> bool:
        for j in adj[i]:
            if seen[j]:
                continue
            seen[j] = True
            if match_col[j] < 0 or augment(match_col[j], seen):
                match_col[j] = i
                match_row[i] = j
                return True
        return False

    for i in range(n_rows):
        augment(i, [False] * n_cols)
    return match_row


def zero_block_certificate(A, zero_tol: float = STRUCTURAL_ZERO):
    """A zero block ``A[I, J] = 0`` with ``|I| + |J| > n``, or ``None``.

    Such a block exists iff the support has no perfect matching (Hall/Konig),
    i.e. iff ``per(A) = 0``.  Index sets are 0-based sorted tuples.
    """
    A = _square(A)
    n = A.shape[0]
    support = A > zero_tol
    match_row = max_matching(support)
    if all(j >= 0 for j in match_row):
        return None
    match_col = [-1] * n
    for i, j in enumerate(match_row):
        if j >= 0:
            match_col[j] = i
    # alternating reachability from the unmatched rows
    rows_z = {i for i in range(n) if match_row[i] < 0}
    cols_z: set[int] = set()
    frontier = list(rows_z)
    while frontier:
        i = frontier.pop()
        for j in np.nonzero(support[i])[0]:
            j = int(j)
            if j not in cols_z:
                cols_z.add(j)
                k = match_col[j]
                if k >= 0 and k not in rows_z:
                    rows_z.add(k)
                    frontier.append(k)
    I = tuple(sorted(rows_z))
    J = tuple(j for j in range(n) if j not in cols_z)
    return I, J
