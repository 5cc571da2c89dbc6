"""Productization of real stable polynomials.

Given a homogeneous real stable ``p`` with ``p(1) = 1`` and ``grad p(1) = alpha``
and a point ``y > 0``, build ``A`` in Mat_n(alpha) with ``prod_i (A y)_i = p(y)``.

The roots ``lambda(y)`` of ``t -> p(t*1 - y)`` are majorized by ``y``; a chain
of T-transforms realizes that majorization as a doubly stochastic ``D`` with
``D y = lambda``.  Rational ``alpha = k/N`` is handled by replicating
coordinates and block-averaging the doubly stochastic matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .matforms import RowStochasticMatrix
from .polycore import PolyError, SparsePoly, evaluate_with_gradient

BISECTION_STEPS = 200
RESIDUAL_TOL = 1e-8
MAJORIZATION_TOL = 1e-9
DENOMINATOR_CAP = 12
REPLICATION_CAP = 64


class StabilityViolation(ValueError):
    """The restriction polynomial has a non-real root: the input is not stable."""

    def __init__(self, msg: str, root: float | None = None):
        super().__init__(msg)
        self.root = root


# -- univariate real-rooted polynomials ---------------------------------------


def _horner(coeffs: np.ndarray, t: float) -> float:
    # coeffs in ascending order
    acc = 0.0
    for a in coeffs[::-1]:
        acc = acc * t + a
    return acc


def _abs_scale(coeffs: np.ndarray, t: float) -> float:
    return _horner(np.abs(coeffs), abs(t))


def restriction_coefficients(p: SparsePoly, y) -> np.ndarray:
    """Ascending coefficients of ``f(t) = p(t*1 - y)``.

    ``f`` is sampled at ``t = 0, 1, ..., n`` and interpolated in Newton form.
    """
    y = np.asarray(y, dtype=float)
    n = p.degree
    ts = np.arange(n + 1, dtype=float)
    dd = np.array([p(t - y) for t in ts])
    # divided differences in place
    for k in range(1, n + 1):
        dd[k:] = (dd[k:] - dd[k - 1 : -1]) / (ts[k:] - ts[: n + 1 - k])
    coeffs = np.zeros(n + 1)
    coeffs[0] = dd[n]
    # nested form: c = dd[k] + (t - ts[k]) * c
    for k in range(n - 1, -1, -1):
        shifted = np.zeros(n + 1)
        shifted[1:] = coeffs[:-1]
        coeffs = shifted - ts[k] * coeffs
        coeffs[0] += dd[k]
    return coeffs


def real_roots(coeffs, tol: float = RESIDUAL_TOL) -> np.ndarray:
    """All roots of a real-rooted polynomial, ascending.

    Roots of ``f^(k)`` are isolated between consecutive roots of ``f^(k+1)`` and
    refined by bisection.  A missing sign change is accepted only when an
    endpoint already has negligible residual (multiple root); otherwise the
    polynomial is not real-rooted and :class:`StabilityViolation` is raised.
    """
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    deg = len(coeffs) - 1
    if deg < 1:
        return np.zeros(0)
    lead = coeffs[-1]
    bound = 1.0 + float(np.abs(coeffs[:-1] / lead).max())
    derivs = [coeffs]
    for _ in range(deg - 1):
        c = derivs[-1]
        derivs.append(c[1:] * np.arange(1, len(c)))
    a1, a0 = derivs[-1][1], derivs[-1][0]
    roots = [-a0 / a1]
    for c in reversed(derivs[:-1]):
        knots = [-bound] + roots + [bound]
        new = []
        for lo, hi in zip(knots[:-1], knots[1:]):
            new.append(_root_in(c, lo, hi, tol))
        roots = new
    return np.array(roots)


def _root_in(c: np.ndarray, lo: float, hi: float, tol: float) -> float:
    flo, fhi = _horner(c, lo), _horner(c, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        # no sign change: only a (numerically) multiple root at an endpoint is legal
        rlo = abs(flo) / max(_abs_scale(c, lo), 1e-300)
        rhi = abs(fhi) / max(_abs_scale(c, hi), 1e-300)
        t, r = (lo, rlo) if rlo <= rhi else (hi, rhi)
        if r <= tol:
            return t
        raise StabilityViolation(
            f"no real root in [{lo:.6g}, {hi:.6g}] (endpoint residual {r:.3e})", root=t
        )
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = _horner(c, mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def restriction_roots(p: SparsePoly, y) -> np.ndarray:
    """Roots of ``t -> p(t*1 - y)``, sorted descending."""
    y = np.asarray(y, dtype=float)
    if y.shape != (p.num_vars,):
        raise PolyError(f"point has shape {y.shape}, expected ({p.num_vars},)")
    if not p.is_homogeneous:
        raise PolyError("restriction roots need a homogeneous polynomial")
    lead = p(np.ones(p.num_vars))
    if abs(lead - 1.0) > 1e-9:
        raise PolyError(f"p(1) = {lead}, expected 1 (monic restriction)")
    coeffs = restriction_coefficients(p, y)
    roots = real_roots(coeffs)
    for r in roots:
        res = abs(_horner(coeffs, r)) / max(_abs_scale(coeffs, r), 1e-300)
        if res > RESIDUAL_TOL:
            raise StabilityViolation(f"root {r:.6g} has residual {res:.3e}", root=float(r))
    return np.sort(roots)[::-1]


# -- majorization ---------------------------------------------------------------


def check_majorization(lam, y, tol: float = MAJORIZATION_TOL) -> bool:
    """``lam`` is majorized by ``y``: sorted partial sums bounded, totals equal."""
    lam = np.sort(np.asarray(lam, dtype=float))[::-1]
    y = np.sort(np.asarray(y, dtype=float))[::-1]
    if lam.shape != y.shape:
        raise ValueError("vectors must have equal length")
    scale = max(1.0, float(np.abs(y).sum()))
    ps_l, ps_y = np.cumsum(lam), np.cumsum(y)
    if abs(ps_l[-1] - ps_y[-1]) > tol * scale:
        return False
    return bool(np.all(ps_l <= ps_y + tol * scale))


def _desc_order(v: np.ndarray) -> np.ndarray:
    # descending with ties broken by original index
    return np.array(sorted(range(len(v)), key=lambda i: (-v[i], i)), dtype=int)


def ds_from_majorization(y, lam, tol: float = MAJORIZATION_TOL) -> RowStochasticMatrix:
    """Doubly stochastic ``D`` with ``D y = lam`` built from T-transforms."""
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if not check_majorization(lam, y, tol):
        raise ValueError("lam is not majorized by y")
    n = len(y)
    py, pl = _desc_order(y), _desc_order(lam)
    x = y[py].copy()
    l = lam[pl]
    scale = max(1.0, float(np.abs(y).max()))
    eps = 1e-13 * scale
    D = np.eye(n)
    for _ in range(n * n):
        over = np.nonzero(x - l > eps)[0]
        if over.size == 0:
            break
        j = int(over[-1])
        under = [k for k in range(j + 1, n) if l[k] - x[k] > eps]
        if not under:
            break
        k = under[0]
        delta = min(x[j] - l[j], l[k] - x[k])
        t = (x[j] - delta - x[k]) / (x[j] - x[k])
        T = np.eye(n)
        T[j, j] = T[k, k] = t
        T[j, k] = T[k, j] = 1.0 - t
        D = T @ D
        x = T @ x
    # D acts on sorted y and produces sorted lam; conjugate by the sort orders
    out = np.zeros((n, n))
    out[np.ix_(pl, py)] = D
    return RowStochasticMatrix(out, np.ones(n))


# -- productization -----------------------------------------------------------


@dataclass
class ProductizationCertificate:
    point: np.ndarray
    roots: np.ndarray
    row_roots: np.ndarray
    ds_matrix: RowStochasticMatrix
    product_matrix: RowStochasticMatrix
    value_residual: float
    marginal_residual: float
    replication: tuple[int, ...]
    denominator: int

    def to_json_obj(self) -> dict:
        return {
            "point": self.point.tolist(),
            "roots": self.roots.tolist(),
            "row_roots": self.row_roots.tolist(),
            "D": self.ds_matrix.entries.tolist(),
            "A": self.product_matrix.entries.tolist(),
            "alpha": self.product_matrix.target_marginals.tolist(),
            "replication": list(self.replication),
            "denominator": self.denominator,
            "value_residual": self.value_residual,
            "marginal_residual": self.marginal_residual,
        }


def rationalize(alpha, cap: int = DENOMINATOR_CAP, tol: float = 1e-9) -> tuple[tuple[int, ...], int]:
    """Write ``alpha = k / N`` with ``N <= cap``; raises if no such form exists."""
    alpha = np.asarray(alpha, dtype=float)
    fracs = [Fraction(float(a)).limit_denominator(cap) for a in alpha]
    if any(abs(float(f) - a) > tol for f, a in zip(fracs, alpha)):
        raise PolyError(
            f"alpha {alpha.tolist()} is not rational with denominator <= {cap}; "
            "round it to nearby rational marginals first"
        )
    N = 1
    for f in fracs:
        N = N * f.denominator // np.gcd(N, f.denominator)
    if N > cap:
        raise PolyError(f"common denominator {N} exceeds cap {cap}")
    return tuple(int(f * N) for f in fracs), int(N)


def product_gradient_at_ones(A: np.ndarray) -> np.ndarray:
    """``grad prod_i (A x)_i`` at ``x = 1``."""
    r = A.sum(axis=1)
    n = len(r)
    others = np.array([np.prod(np.delete(r, i)) for i in range(n)])
    return others @ A


def productize(p: SparsePoly, y, alpha=None, cap: int = DENOMINATOR_CAP) -> ProductizationCertificate:
    """``A`` in Mat_n(alpha) with ``prod_i (A y)_i = p(y)``."""
    y = np.asarray(y, dtype=float)
    n = p.num_vars
    if p.degree != n or not p.is_homogeneous:
        raise PolyError("productization needs a homogeneous polynomial of degree n in n variables")
    if y.shape != (n,) or np.any(y <= 0):
        raise PolyError("point must be a positive vector of length n")
    value1, grad1 = evaluate_with_gradient(p, np.ones(n))
    if abs(value1 - 1) > 1e-9:
        raise PolyError(f"p(1) = {value1}, expected 1")
    alpha = grad1 if alpha is None else np.asarray(alpha, dtype=float)
    if np.abs(grad1 - alpha).max() > 1e-9:
        raise PolyError(f"grad p(1) = {grad1.tolist()} does not match alpha")
    k, N = rationalize(alpha, cap)
    if n * N > REPLICATION_CAP:
        raise PolyError(f"replicated size {n * N} exceeds cap {REPLICATION_CAP}")

    lam = restriction_roots(p, y)
    # the j-th largest root goes to the row of the j-th largest coordinate of y
    lam_rows = np.empty(n)
    lam_rows[_desc_order(y)] = lam
    if N == 1 and all(ki == 1 for ki in k):
        D = ds_from_majorization(y, lam_rows)
        A = D.entries.copy()
    else:
        # rows: N consecutive copies of each root; columns: k_i copies of y_i
        y_rep = np.repeat(y, k)
        lam_rep = np.repeat(lam_rows, N)
        D = ds_from_majorization(y_rep, lam_rep)
        col_owner = np.repeat(np.arange(n), k)
        A = np.zeros((n, n))
        for i in range(n):
            block = D.entries[i * N : (i + 1) * N]
            A[i] = np.bincount(col_owner, weights=block.sum(axis=0), minlength=n) / N
    exact_alpha = np.array(k, dtype=float) / N
    prod_val = float(np.prod(A @ y))
    py = p(y)
    return ProductizationCertificate(
        point=y,
        roots=lam,
        row_roots=lam_rows,
        ds_matrix=D,
        product_matrix=RowStochasticMatrix(A, exact_alpha),
        value_residual=abs(py - prod_val) / py,
        marginal_residual=float(np.abs(product_gradient_at_ones(A) - exact_alpha).max()),
        replication=k,
        denominator=N,
    )


def replicated_majorization(cert: ProductizationCertificate, tol: float = MAJORIZATION_TOL) -> bool:
    """``lambda`` repeated ``N`` times is majorized by ``y_i`` repeated ``k_i`` times.

    For ``alpha = 1`` this is plain ``lambda(y) < y``.
    """
    lam = np.repeat(cert.roots, cert.denominator)
    y = np.repeat(cert.point, cert.replication)
    return check_majorization(lam, y, tol)
