"""Exact minimum capacity over products of linear forms with marginals alpha.

``log cap_1(prod_i (M x)_i)`` is concave in ``M``, so its minimum over the
transportation polytope Mat_n(alpha) sits at a vertex.  Vertices have forest
supports in K_{n,n} and are determined by the forest, so enumerating all forests
and reconstructing each candidate matrix by leaf peeling gives ``L_n(alpha)``.

Also here: the linear program for the minimum of ``p(t)`` over all polynomials
with ``p(1) = 1`` and ``grad p(1) = alpha``, and the dual certificate that a
support set carries an optimal polynomial.
"""

from __future__ import annotations

import functools
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .capsolve import BOUNDARY_UNATTAINED, ZERO, CapacityError, capacity
from .matforms import RowStochasticMatrix, product_poly, zero_block_certificate
from .parallel import pmap
from .polycore import PolyError, all_exponents
from .simplex import INFEASIBLE, OPTIMAL, linprog_eq

FOREST_CAP = 5
NEG_TOL = 1e-12
RESIDUAL_TOL = 1e-10
DEDUPE_DECIMALS = 12
LP_MONOMIAL_CAP = 100_000
CERT_TOL = 1e-9


# -- forests --------------------------------------------------------------------


class _UnionFind:
    """Union by size without path compression, so unions can be undone."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.size = [1] * size

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return None
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return rb

    def undo(self, rb: int) -> None:
        ra = self.parent[rb]
        self.parent[rb] = rb
        self.size[ra] -= self.size[rb]


def _all_edges(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(n)]


def _forests_from(n: int, first: int | None):
    """Forests in lexicographic order; ``first`` fixes the smallest edge (None: empty set)."""
    edges = _all_edges(n)
    uf = _UnionFind(2 * n)
    if first is None:
        yield ()
        return
    stack: list[int] = []

    def grow(start: int):
        yield tuple(edges[e] for e in stack)
        for e in range(start, len(edges)):
            i, j = edges[e]
            undo = uf.union(i, n + j)
            if undo is None:
                continue
            stack.append(e)
            yield from grow(e + 1)
            stack.pop()
            uf.undo(undo)

    i, j = edges[first]
    undo = uf.union(i, n + j)
    stack.append(first)
    yield from grow(first + 1)
    stack.pop()
    uf.undo(undo)


def enumerate_forests(n: int, cap: int = FOREST_CAP):
    """Every acyclic edge set of K_{n,n} exactly once, lexicographically.

    Edges are 0-based ``(row, col)`` pairs; the empty forest comes first.
    """
    if n > cap:
        raise PolyError(f"n = {n} exceeds forest enumeration cap {cap}")
    yield ()
    for first in range(n * n):
        yield from _forests_from(n, first)


@dataclass
class ForestMatrix:
    edges: tuple[tuple[int, int], ...]
    matrix: RowStochasticMatrix | None
    feasible: bool


def matrix_from_forest(edges, alpha) -> RowStochasticMatrix | None:
    """The unique matrix of Mat_n(alpha) supported on the forest, if any.

    Leaves are peeled one at a time: the leaf's remaining marginal is forced
    onto its only edge and subtracted from the other endpoint.
    """
    alpha = np.asarray(alpha, dtype=float)
    n = len(alpha)
    remaining = [1.0] * n + alpha.tolist()
    nbrs: list[set[int]] = [set() for _ in range(2 * n)]
    for i, j in edges:
        nbrs[i].add(n + j)
        nbrs[n + j].add(i)
    M = np.zeros((n, n))
    stack = [v for v in range(2 * n - 1, -1, -1) if len(nbrs[v]) == 1]
    while stack:
        leaf = stack.pop()
        if len(nbrs[leaf]) != 1:
            continue
        other = nbrs[leaf].pop()
        nbrs[other].discard(leaf)
        val = remaining[leaf]
        if val < -NEG_TOL:
            return None
        val = max(val, 0.0)
        if leaf < n:
            M[leaf, other - n] = val
        else:
            M[other, leaf - n] = val
        remaining[leaf] = 0.0
        remaining[other] -= val
        if len(nbrs[other]) == 1:
            stack.append(other)
    if any(nbrs):
        raise PolyError("edge set is not a forest")
    if max(abs(r) for r in remaining) > RESIDUAL_TOL:
        return None
    return RowStochasticMatrix(M, alpha)


def _chunk_vertices(args):
    n, alpha, first = args
    out = []
    for edges in (_forests_from(n, first) if first is not None else [()]):
        M = matrix_from_forest(edges, alpha)
        if M is not None:
            out.append((edges, M.entries))
    return out


def forest_vertices(alpha, threads: int = 1, cap: int = FOREST_CAP) -> list[ForestMatrix]:
    """Feasible forest matrices, deduplicated by rounded entries, in forest order."""
    alpha = np.asarray(alpha, dtype=float)
    n = len(alpha)
    if n > cap:
        raise PolyError(f"n = {n} exceeds forest enumeration cap {cap}")
    chunks = [(n, alpha, None)] + [(n, alpha, e) for e in range(n * n)]
    seen = set()
    out = []
    for part in pmap(_chunk_vertices, chunks, threads):
        for edges, A in part:
            key = np.round(A, DEDUPE_DECIMALS).tobytes()
            if key in seen:
                continue
            seen.add(key)
            out.append(ForestMatrix(edges, RowStochasticMatrix(A, alpha), True))
    return out


@functools.lru_cache(maxsize=64)
def _cached_vertices(alpha: tuple, threads: int, cap: int) -> tuple[ForestMatrix, ...]:
    # vertex sets are reused across evaluation points; callers must not mutate them
    return tuple(forest_vertices(np.array(alpha), threads, cap))


# -- L_n(alpha) ---------------------------------------------------------------------


@dataclass
class LnAlphaResult:
    value: float
    argmin_forest: ForestMatrix | None
    per_vertex: list[tuple[ForestMatrix, float]]
    alpha: np.ndarray
    failures: list[tuple[ForestMatrix, str]] = field(default_factory=list)
    boundary_flag: bool = False


def _vertex_capacity(args):
    A, tol = args
    if zero_block_certificate(A) is not None:
        return 0.0, ZERO, None
    try:
        res = capacity(product_poly(A), tol=tol)
    except CapacityError as err:
        return err.best_value, "FAILED", str(err)
    return res.value, res.status, None


def _check_alpha(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    n = len(alpha)
    if alpha.ndim != 1 or np.any(alpha < 0):
        raise PolyError("alpha must be a non-negative vector")
    if abs(alpha.sum() - n) > 1e-9 * n:
        raise PolyError(f"alpha sums to {alpha.sum()}, expected {n}")
    return alpha


def l_n_alpha(alpha, tol: float = 1e-9, threads: int = 1, cap: int = FOREST_CAP) -> LnAlphaResult:
    """``min cap_1(prod_i (M x)_i)`` over the vertices of Mat_n(alpha)."""
    alpha = _check_alpha(alpha)
    verts = forest_vertices(alpha, threads, cap)
    caps = pmap(_vertex_capacity, [(v.matrix.entries, tol) for v in verts], threads)
    per_vertex, failures = [], []
    best, arg, flag = math.inf, None, False
    for v, (val, status, err) in zip(verts, caps):
        if err is not None:
            failures.append((v, err))
            continue
        per_vertex.append((v, val))
        flag |= status == BOUNDARY_UNATTAINED
        if val < best:
            best, arg = val, v
    return LnAlphaResult(best, arg, per_vertex, alpha, failures, flag)


def prod_min_at_point(alpha, x, threads: int = 1, cap: int = FOREST_CAP) -> tuple[float, ForestMatrix]:
    """``min prod_i (M x)_i`` over Mat_n(alpha); attained at a forest vertex."""
    alpha = _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    if x.shape != alpha.shape or np.any(x <= 0):
        raise PolyError("x must be a positive vector of the same length as alpha")
    best, arg = math.inf, None
    for v in _cached_vertices(tuple(alpha.tolist()), threads, cap):
        val = float(np.prod(v.matrix.entries @ x))
        if val < best:
            best, arg = val, v
    return best, arg


# -- general polynomials: linear program and support certificate -------------


@dataclass
class LPMinResult:
    status: str
    value: float | None
    coefficients: dict[tuple[int, ...], float]
    support: list[tuple[int, ...]]
    farkas: np.ndarray | None = None


def _monomials(n: int, m: int) -> list[tuple[int, ...]]:
    if math.comb(n + m - 1, m - 1) > LP_MONOMIAL_CAP:
        raise PolyError("too many monomials for the dense linear program")
    return list(all_exponents(m, n))


def lp_min_general(t, alpha, n: int, m: int, tol: float = 1e-9) -> LPMinResult:
    """``min sum_mu p_mu t^mu`` over ``p_mu >= 0`` with ``sum_mu mu p_mu = alpha``.

    With ``sum alpha = n`` this forces ``p(1) = 1``.  On infeasibility the
    Farkas vector ``y`` has ``mu . y <= 0`` for every monomial and ``alpha . y > 0``.
    """
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if t.shape != (m,) or alpha.shape != (m,):
        raise PolyError("t and alpha must have length m")
    if np.any(t <= 0):
        raise PolyError("t must be positive")
    if abs(alpha.sum() - n) > 1e-9 * max(1, n):
        raise PolyError(f"alpha sums to {alpha.sum()}, expected {n}")
    mons = _monomials(n, m)
    E = np.array(mons, dtype=float)
    cost = np.exp(E @ np.log(t))
    res = linprog_eq(cost, E.T, alpha, tol=tol)
    if res.status == INFEASIBLE:
        return LPMinResult(INFEASIBLE, None, {}, [], farkas=res.farkas)
    if res.status != OPTIMAL:
        raise PolyError(f"linear program is {res.status}")
    coeffs = {mu: float(v) for mu, v in zip(mons, res.x) if v > tol}
    return LPMinResult(OPTIMAL, float(cost @ res.x), coeffs, sorted(coeffs))


@dataclass
class SupportCertificate:
    beta: np.ndarray
    slack_poly_coeffs: dict[tuple[int, ...], float]
    value: float | None = None


def _expand_residual(t: np.ndarray, beta: np.ndarray, n: int) -> dict[tuple[int, ...], float]:
    # (t.x)^n - (beta.x)(1.x)^(n-1) by repeated multiplication of coefficient maps
    m = len(t)

    def times_linear(poly, c):
        out: dict[tuple[int, ...], float] = defaultdict(float)
        for mu, a in poly.items():
            for i in range(m):
                nu = list(mu)
                nu[i] += 1
                out[tuple(nu)] += a * c[i]
        return out

    one = {(0,) * m: 1.0}
    tn = one
    for _ in range(n):
        tn = times_linear(tn, t)
    ones = one
    for _ in range(n - 1):
        ones = times_linear(ones, np.ones(m))
    bx = times_linear(ones, beta)
    keys = set(tn) | set(bx)
    return {mu: float(tn.get(mu, 0.0) - bx.get(mu, 0.0)) for mu in sorted(keys)}


def check_support_certificate(S, t, n: int, m: int, alpha=None, tol: float = CERT_TOL) -> SupportCertificate | None:
    """Search for ``beta`` making ``(t.x)^n - (beta.x)(1.x)^(n-1)`` vanish on ``S``
    and non-negative elsewhere.

    Such ``beta`` certifies that any ``p`` supported on ``S`` with marginals
    ``alpha`` minimizes ``p(t)``, with value ``alpha . beta / n``.  When ``alpha``
    is given that value is cross-checked against :func:`lp_min_general`.
    """
    t = np.asarray(t, dtype=float)
    S = {tuple(int(e) for e in mu) for mu in S}
    if not S:
        raise PolyError("support set must be non-empty")
    if any(len(mu) != m or sum(mu) != n for mu in S):
        raise PolyError(f"support entries must be degree-{n} exponents in {m} variables")
    mons = _monomials(n, m)
    # coefficient of x^mu divided by the multinomial: t^mu - mu . beta / n
    E = np.array(mons, dtype=float)
    tm = np.exp(E @ np.log(t))
    in_S = np.array([mu in S for mu in mons])
    out_idx = np.nonzero(~in_S)[0]
    k = len(out_idx)
    # variables: beta+ (m), beta- (m), slacks for the inequalities (k)
    A = np.zeros((len(mons), 2 * m + k))
    A[:, :m] = E / n
    A[:, m : 2 * m] = -E / n
    A[out_idx, 2 * m + np.arange(k)] = 1.0
    res = linprog_eq(np.zeros(2 * m + k), A, tm, tol=tol * 1e-3)
    if res.status != OPTIMAL:
        return None
    beta = res.x[:m] - res.x[m : 2 * m]
    resid = _expand_residual(t, beta, n)
    scale = max(1.0, max(abs(v) for v in resid.values()))
    for mu, v in resid.items():
        if mu in S and abs(v) > tol * scale:
            return None
        if mu not in S and v < -tol * scale:
            return None
    cert = SupportCertificate(beta, resid)
    if alpha is not None:
        alpha = np.asarray(alpha, dtype=float)
        cert.value = float(alpha @ beta) / n
        lp = lp_min_general(t, alpha, n, m)
        if lp.status == OPTIMAL and set(lp.support) <= S and abs(lp.value - cert.value) > 1e-8 * max(1.0, lp.value):
            raise PolyError(f"certificate value {cert.value} disagrees with LP value {lp.value}")
    return cert
