"""Closed-form capacity bounds in terms of the marginals ``alpha``.

All functions take ``alpha`` with ``sum alpha = n`` and write ``delta = 1 - alpha``.
A lower bound whose hypothesis fails returns ``None`` rather than a vacuous 0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .polycore import PolyError, SparsePoly, marginals

GUARD = 1e-12
SUBSET_CAP = 20


def _alpha(alpha, n: int | None = None) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if n is None:
        n = len(alpha)
    if alpha.ndim != 1:
        raise PolyError("alpha must be a vector")
    if abs(alpha.sum() - n) > 1e-9 * max(1, n):
        raise PolyError(f"alpha sums to {alpha.sum()}, expected {n}")
    return alpha


def main_capacity_lower(alpha, n: int | None = None) -> float | None:
    """``(1 - ||delta||_1 / 2)^n`` when ``||delta||_1 < 2``."""
    alpha = _alpha(alpha, n)
    n = len(alpha)
    l1 = float(np.abs(1 - alpha).sum())
    if not l1 < 2 - GUARD:
        return None
    return (1 - l1 / 2) ** n


def two_norm_lower(alpha, n: int | None = None) -> float | None:
    """``(1 - sqrt(n) ||delta||_2 / 2)^n`` when ``||delta||_2 < 2 / sqrt(n)``."""
    alpha = _alpha(alpha, n)
    n = len(alpha)
    s = math.sqrt(n) * float(np.linalg.norm(1 - alpha))
    if not s < 2 - GUARD:
        return None
    return (1 - s / 2) ** n


def lsw_lower(alpha, n: int | None = None) -> float | None:
    """``(1 - sqrt(n) ||delta||_2)^n`` when ``||delta||_2 < 1 / sqrt(n)``."""
    alpha = _alpha(alpha, n)
    n = len(alpha)
    s = math.sqrt(n) * float(np.linalg.norm(1 - alpha))
    if not s < 1 - GUARD:
        return None
    return (1 - s) ** n


def upper_bounds(alpha, n: int | None = None) -> tuple[float, float]:
    """``(prod alpha, (prod alpha)^(1/n))``: log-concave and general upper bounds."""
    alpha = _alpha(alpha, n)
    n = len(alpha)
    prod = float(np.prod(alpha))
    return prod, prod ** (1.0 / n)


# -- van der Waerden type bound ---------------------------------------------------


def vdw_coefficient_lower(p: SparsePoly, cap: float) -> float:
    """``(n! / n^n) cap``, a lower bound for ``d_1 ... d_n p``."""
    n = p.num_vars
    return math.factorial(n) / n**n * cap


def mixed_derivative(p: SparsePoly) -> float:
    """``d_1 ... d_n p`` for homogeneous degree-n ``p``: the coefficient of ``x_1 ... x_n``."""
    if p.degree != p.num_vars or not p.is_homogeneous:
        raise PolyError("need a homogeneous polynomial of degree n in n variables")
    return p.coefficient((1,) * p.num_vars)


def vdw_check(p: SparsePoly, cap: float, tol: float = 1e-9) -> tuple[bool, float, float]:
    """``(holds, derivative, bound)``."""
    d = mixed_derivative(p)
    b = vdw_coefficient_lower(p, cap)
    return d >= b - tol, d, b


# -- pointwise comparisons -------------------------------------------------------


@dataclass
class PointwiseReport:
    ratio: float
    amgm_bound: float
    concave_bound: float
    monomial_bound: float
    amgm_holds: bool
    concave_holds: bool
    monomial_holds: bool
    concave_asserted: bool

    @property
    def ok(self) -> bool:
        base = self.amgm_holds and self.monomial_holds
        return base and (self.concave_holds or not self.concave_asserted)


def pointwise_bounds(p: SparsePoly, x, y, log_concave: bool = False, tol: float = 1e-9) -> PointwiseReport:
    """Bounds on ``p(x) / p(y)`` from the marginals ``gamma`` of ``p`` at ``y``.

    * ``<= (1/n) sum gamma_i (x_i / y_i)^n``  (AM-GM, any non-negative p)
    * ``<= ((1/n) sum gamma_i x_i / y_i)^n``  (needs log-concavity; only asserted
      when ``log_concave`` is set)
    * ``>= prod (x_i / y_i)^gamma_i``         (any non-negative p)

    Comparisons are relative, with slack ``tol``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise PolyError("x and y must be positive")
    if not p.is_homogeneous:
        raise PolyError("pointwise bounds need a homogeneous polynomial")
    n = p.degree
    gamma = marginals(p, y)
    r = x / y
    ratio = p(x) / p(y)
    amgm = float(gamma @ r**n) / n
    conc = (float(gamma @ r) / n) ** n
    mono = float(np.exp(gamma @ np.log(r)))

    def le(a, b):
        return a <= b + tol * max(1.0, abs(b))

    return PointwiseReport(
        ratio, amgm, conc, mono, le(ratio, amgm), le(ratio, conc), le(mono, ratio), log_concave
    )


# -- equivalent forms of the norm hypothesis ------------------------------------------


@dataclass
class EquivalenceReport:
    delta_l1: float
    min_subset_slack: float
    worst_subset: tuple[int, ...]
    norm_verdict: bool
    subset_verdict: bool

    @property
    def agree(self) -> bool:
        return self.norm_verdict == self.subset_verdict


def marginal_equivalences(alpha, cap: int = SUBSET_CAP) -> EquivalenceReport:
    """Compare ``||delta||_1 < 2`` with ``sum_{i in F} alpha_i > |F| - 1`` for all ``F``.

    Subset sums are built by doubling, so all ``2^n - 1`` non-empty subsets are
    visited (``n <= 20``).
    """
    alpha = _alpha(alpha)
    n = len(alpha)
    if n > cap:
        raise PolyError(f"n = {n} exceeds subset enumeration cap {cap}")
    sums = np.zeros(1)
    sizes = np.zeros(1, dtype=np.int64)
    for a in alpha:
        sums = np.concatenate([sums, sums + a])
        sizes = np.concatenate([sizes, sizes + 1])
    slack = sums[1:] - sizes[1:] + 1
    k = int(np.argmin(slack))
    mask = k + 1
    worst = tuple(i for i in range(n) if mask >> i & 1)
    l1 = float(np.abs(1 - alpha).sum())
    s = float(slack[k])
    return EquivalenceReport(l1, s, worst, l1 < 2 - GUARD, s > GUARD)


def tsp_threshold(n: int, eps: float, d: int) -> float:
    """``e^(-n) eps^d``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if d < n:
        raise ValueError("d must be at least n")
    return math.exp(-n) * eps**d


# -- summary --------------------------------------------------------------------------


@dataclass
class BoundReport:
    alpha: list[float]
    delta_l1: float
    delta_l2: float
    main_lower: float | None
    two_norm_lower: float | None
    lsw_lower: float | None
    upper_lc: float
    upper_general: float
    main_applicable: bool
    two_norm_applicable: bool
    lsw_applicable: bool

    def to_json_obj(self) -> dict:
        return asdict(self)


def bound_report(alpha) -> BoundReport:
    alpha = _alpha(alpha)
    d = 1 - alpha
    main, two, lsw = main_capacity_lower(alpha), two_norm_lower(alpha), lsw_lower(alpha)
    lc, gen = upper_bounds(alpha)
    return BoundReport(
        alpha.tolist(), float(np.abs(d).sum()), float(np.linalg.norm(d)),
        main, two, lsw, lc, gen, main is not None, two is not None, lsw is not None,
    )


# -- record-only probe of the log-concave minimum question -----------------------------


@dataclass
class LCProbe:
    trials: int
    min_gap: float
    counterexamples: int


def lorentzian_cubic(rng: np.random.Generator, n: int = 3) -> SparsePoly:
    """Product of a Lorentzian quadratic form and a positive linear form, normalized to ``p(1) = 1``.

    ``Q = v v^T - D`` (diagonal ``D`` kept below ``v_i^2``) has non-negative entries
    and a single positive eigenvalue, so ``x^T Q x`` is Lorentzian; products of
    Lorentzian polynomials stay Lorentzian.  Needs ``n = 3``.
    """
    if n != 3:
        raise ValueError("only n = 3 is supported")
    v = rng.uniform(0.2, 1.0, n)
    Q = np.outer(v, v) - np.diag(rng.uniform(0, 1, n) * v**2)
    c = rng.uniform(0.1, 1.0, n)
    terms: dict[tuple[int, ...], float] = {}
    for i in range(n):
        for j in range(n):
            for k in range(n):
                e = [0] * n
                e[i] += 1
                e[j] += 1
                e[k] += 1
                terms[tuple(e)] = terms.get(tuple(e), 0.0) + Q[i, j] * c[k]
    p = SparsePoly(n, terms, degree=3)
    return p * (1.0 / p(np.ones(n)))


def lc_falsification(seed: int, trials: int = 50) -> LCProbe:
    """Compare random log-concave ``p`` with the product minimum at random points.

    Records ``min (p(x) - min_{Prod(alpha)} f(x))`` without asserting its sign.
    """
    from .lnalpha import prod_min_at_point

    rng = np.random.default_rng(seed)
    gap, bad = math.inf, 0
    for _ in range(trials):
        p = lorentzian_cubic(rng)
        alpha = marginals(p, np.ones(3))
        x = rng.uniform(0.2, 3.0, 3)
        m, _ = prod_min_at_point(alpha, x)
        g = p(x) - m
        gap = min(gap, g)
        bad += g < -1e-9
    return LCProbe(trials, gap, bad)
