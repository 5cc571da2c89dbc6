"""Sparse polynomials with non-negative coefficients.

A :class:`SparsePoly` is an immutable map from exponent vectors to positive
coefficients.  Exponents are kept as a lexicographically sorted ``int32``
array so iteration order, hashing and serialization are reproducible.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .simplex import INFEASIBLE, OPTIMAL, linprog_eq

COEFF_DROP = 1e-15
FEAS_TOL = 1e-9
MAX_SUBSET_VARS = 20
MAX_EXCHANGE_SUPPORT = 5000


class PolyError(ValueError):
    """Invalid polynomial input (shape, sign, or size limits)."""


class SparsePoly:
    """Polynomial ``sum_mu c_mu x^mu`` with ``c_mu > 0``.

    ``degree`` is the maximum total degree of the support.  Most of the package
    works with homogeneous polynomials, see :attr:`is_homogeneous`.
    """

    __slots__ = ("num_vars", "degree", "exps", "coeffs", "_hash")

    def __init__(self, num_vars: int, terms: Mapping[Sequence[int], float] | Iterable, degree: int | None = None):
        if isinstance(terms, Mapping):
            items = terms.items()
        else:
            items = terms
        acc: dict[tuple[int, ...], float] = defaultdict(float)
        for exp, c in items:
            exp = tuple(int(e) for e in exp)
            if len(exp) != num_vars:
                raise PolyError(f"exponent {exp} has length {len(exp)}, expected {num_vars}")
            if any(e < 0 for e in exp):
                raise PolyError(f"negative exponent in {exp}")
            c = float(c)
            if not math.isfinite(c):
                raise PolyError(f"non-finite coefficient for {exp}")
            acc[exp] += c
        kept = {}
        for exp, c in acc.items():
            if c < -COEFF_DROP:
                raise PolyError(f"negative coefficient {c!r} for exponent {exp}")
            if abs(c) > COEFF_DROP:
                kept[exp] = c
        keys = sorted(kept)
        self.num_vars = int(num_vars)
        self.exps = np.array(keys, dtype=np.int32).reshape(len(keys), self.num_vars)
        self.coeffs = np.array([kept[k] for k in keys], dtype=float)
        self.exps.setflags(write=False)
        self.coeffs.setflags(write=False)
        top = int(self.exps.sum(axis=1).max()) if keys else 0
        if degree is not None and keys and int(degree) != top:
            raise PolyError(f"declared degree {degree} but support has degree {top}")
        self.degree = int(degree) if degree is not None else top
        self._hash = None

    # -- basic protocol -------------------------------------------------------

    def __len__(self) -> int:
        return len(self.coeffs)

    def __repr__(self) -> str:
        body = " + ".join(f"{c:.6g}*x^{tuple(int(e) for e in mu)}" for mu, c in self.terms())
        return f"SparsePoly(n={self.num_vars}, d={self.degree}, {body or '0'})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return (
            self.num_vars == other.num_vars
            and np.array_equal(self.exps, other.exps)
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.num_vars, self.exps.tobytes(), self.coeffs.tobytes()))
        return self._hash

    def terms(self):
        for mu, c in zip(self.exps, self.coeffs):
            yield tuple(int(e) for e in mu), float(c)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return dict(self.terms())

    def coefficient(self, exp: Sequence[int]) -> float:
        return self.as_dict().get(tuple(int(e) for e in exp), 0.0)

    @property
    def support(self) -> list[tuple[int, ...]]:
        return [mu for mu, _ in self.terms()]

    @property
    def is_homogeneous(self) -> bool:
        return len(self) == 0 or bool(np.all(self.exps.sum(axis=1) == self.degree))

    # -- arithmetic -----------------------------------------------------------

    def __mul__(self, other):
        if isinstance(other, SparsePoly):
            if other.num_vars != self.num_vars:
                raise PolyError("variable count mismatch")
            acc: dict[tuple[int, ...], float] = defaultdict(float)
            for a, ca in self.terms():
                for b, cb in other.terms():
                    acc[tuple(x + y for x, y in zip(a, b))] += ca * cb
            return SparsePoly(self.num_vars, acc)
        s = float(other)
        if s < 0:
            raise PolyError("scaling by a negative number")
        return SparsePoly(self.num_vars, {mu: s * c for mu, c in self.terms()})

    __rmul__ = __mul__

    def __add__(self, other: "SparsePoly") -> "SparsePoly":
        if other.num_vars != self.num_vars:
            raise PolyError("variable count mismatch")
        return SparsePoly(self.num_vars, itertools.chain(self.terms(), other.terms()))

    def __pow__(self, k: int) -> "SparsePoly":
        out = SparsePoly(self.num_vars, {(0,) * self.num_vars: 1.0})
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    # -- evaluation -----------------------------------------------------------

    def __call__(self, x) -> float:
        """Evaluate at an arbitrary real point (no positivity required)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_vars,):
            raise PolyError(f"point has shape {x.shape}, expected ({self.num_vars},)")
        if len(self) == 0:
            return 0.0
        return float(self.coeffs @ np.prod(x[None, :] ** self.exps, axis=1))

    def log_terms(self, y: np.ndarray) -> np.ndarray:
        """``log c_mu + mu . y`` for every term (log-domain evaluation at e^y)."""
        return np.log(self.coeffs) + self.exps @ y

    # -- serialization --------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "num_vars": self.num_vars,
            "degree": self.degree,
            "terms": [{"exp": list(mu), "coeff": c} for mu, c in self.terms()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj) -> "SparsePoly":
        try:
            n = obj["num_vars"]
            d = obj["degree"]
            terms = [(t["exp"], t["coeff"]) for t in obj["terms"]]
        except (KeyError, TypeError) as exc:
            raise PolyError(f"malformed polynomial JSON: {exc}") from exc
        if not isinstance(n, int) or not isinstance(d, int) or n < 0 or d < 0:
            raise PolyError("num_vars and degree must be non-negative integers")
        for exp, c in terms:
            if not isinstance(exp, list) or not all(isinstance(e, int) for e in exp):
                raise PolyError(f"exponent must be a list of integers, got {exp!r}")
            if not isinstance(c, (int, float)) or isinstance(c, bool):
                raise PolyError(f"coefficient must be a number, got {c!r}")
        return cls(n, terms, degree=d)

    @classmethod
    def from_json(cls, text: str) -> "SparsePoly":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PolyError(f"invalid JSON: {exc}") from exc
        return cls.from_json_obj(obj)


def monomial(exp: Sequence[int], coeff: float = 1.0) -> SparsePoly:
    return SparsePoly(len(exp), {tuple(exp): coeff})


def linear_form(c: Sequence[float]) -> SparsePoly:
    n = len(c)
    return SparsePoly(n, {tuple(int(i == j) for j in range(n)): ci for i, ci in enumerate(c)})


def _check_point(p: SparsePoly, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.num_vars,):
        raise PolyError(f"point has shape {x.shape}, expected ({p.num_vars},)")
    if not np.all(x > 0):
        raise PolyError("point must be strictly positive")
    return x


def evaluate_with_gradient(p: SparsePoly, x) -> tuple[float, np.ndarray]:
    """Value and gradient of ``p`` at a strictly positive point."""
    x = _check_point(p, x)
    if len(p) == 0:
        raise PolyError("zero polynomial has no positive value")
    mono = p.coeffs * np.prod(x[None, :] ** p.exps, axis=1)
    value = float(mono.sum())
    grad = (mono @ p.exps) / x
    return value, grad


def marginals(p: SparsePoly, y) -> np.ndarray:
    """``gamma_i = y_i d_i p(y) / p(y)``; sums to the degree for homogeneous p."""
    y = _check_point(p, y)
    if len(p) == 0:
        raise PolyError("p(y) = 0")
    # log-domain weights avoid overflow at extreme points
    lt = p.log_terms(np.log(y))
    w = np.exp(lt - lt.max())
    return (w @ p.exps) / w.sum()


# -- Newton polytope ----------------------------------------------------------


@dataclass
class NewtonCertificate:
    contains: bool
    weights: np.ndarray | None = None  # convex weights over p.support
    separator: np.ndarray | None = None  # h with h.target > max_mu h.mu

    def __bool__(self) -> bool:
        return self.contains


def _hull_system(p: SparsePoly, target: np.ndarray):
    A = np.vstack([p.exps.T.astype(float), np.ones((1, len(p)))])
    b = np.concatenate([target, [1.0]])
    return A, b


def newton_contains(p: SparsePoly, target) -> NewtonCertificate:
    """Decide ``target in Newt(p)`` by LP feasibility, with a certificate."""
    target = np.asarray(target, dtype=float)
    if target.shape != (p.num_vars,):
        raise PolyError(f"target has shape {target.shape}, expected ({p.num_vars},)")
    if len(p) == 0:
        return NewtonCertificate(False, separator=np.zeros(p.num_vars))
    A, b = _hull_system(p, target)
    res = linprog_eq(np.zeros(len(p)), A, b, tol=FEAS_TOL)
    if res.status == OPTIMAL:
        return NewtonCertificate(True, weights=res.x)
    assert res.status == INFEASIBLE
    h = _canonical_separator(res.farkas[:-1], p, target)
    return NewtonCertificate(False, separator=h)


def _canonical_separator(h: np.ndarray, p: SparsePoly, target: np.ndarray) -> np.ndarray:
    h = np.array(h, dtype=float)
    if p.is_homogeneous and abs(target.sum() - p.degree) <= 1e-9 * max(1, p.degree):
        # points share the hyperplane sum = degree, so h is defined modulo 1
        h = h - h.min()
    scale = np.abs(h).max()
    if scale > 0:
        h = h / scale
    h[np.abs(h) < 1e-12] = 0.0
    return h


def newton_face(p: SparsePoly, target, tol: float = FEAS_TOL) -> np.ndarray | None:
    """Indices of support points on the minimal face of Newt(p) containing target.

    Returns ``None`` when ``target`` is outside Newt(p).  ``target`` lies in the
    relative interior of Newt(p) iff every support point is returned.
    """
    target = np.asarray(target, dtype=float)
    A, b = _hull_system(p, target)
    k = len(p)
    # maximize the smallest weight: w = s*1 + v, v >= 0, s >= 0
    A_s = np.hstack([A, A.sum(axis=1, keepdims=True)])
    c = np.zeros(k + 1)
    c[-1] = -1.0
    res = linprog_eq(c, A_s, b, tol=tol)
    if res.status != OPTIMAL:
        return None
    if res.x[-1] > tol:
        return np.arange(k)
    res0 = linprog_eq(np.zeros(k), A, b, tol=tol)
    marked = res0.x > tol
    while not marked.all():
        c = np.where(marked, 0.0, -1.0)
        res = linprog_eq(c, A, b, tol=tol)
        gain = res.x > tol
        if not (gain & ~marked).any():
            break
        marked |= gain
    return np.nonzero(marked)[0]


def face_poly(p: SparsePoly, idx) -> SparsePoly:
    idx = np.asarray(idx, dtype=int)
    return SparsePoly(p.num_vars, zip(map(tuple, p.exps[idx]), p.coeffs[idx]), degree=p.degree)


# -- Hall condition and exchange -----------------------------------------------


def restricted_degree(p: SparsePoly, S: Iterable[int]) -> int:
    """Max over the support of the total exponent on the variables in ``S``."""
    S = sorted(set(S))
    if any(i < 0 or i >= p.num_vars for i in S):
        raise PolyError(f"index set {S} out of range")
    if len(p) == 0:
        return 0
    return int(p.exps[:, S].sum(axis=1).max()) if S else 0


@dataclass
class HallResult:
    is_hall: bool
    witness: tuple[int, ...] | None = None


def is_hall(p: SparsePoly, max_vars: int = MAX_SUBSET_VARS) -> HallResult:
    """Check ``deg_S(p) >= |S|`` over all subsets; a violating S on failure."""
    n = p.num_vars
    if n > max_vars:
        raise PolyError(f"{n} variables exceeds exhaustive subset limit {max_vars}")
    for size in range(1, n + 1):
        for S in itertools.combinations(range(n), size):
            if restricted_degree(p, S) < size:
                return HallResult(False, S)
    return HallResult(True)


def check_exchange(support: Iterable[Sequence[int]], max_size: int = MAX_EXCHANGE_SUPPORT):
    """Symmetric exchange property of a support set.

    Returns ``(True, None)`` or ``(False, (mu, nu, i))`` for the first violation.
    """
    pts = sorted({tuple(int(e) for e in mu) for mu in support})
    if len(pts) > max_size:
        raise PolyError(f"support of size {len(pts)} exceeds limit {max_size}")
    if pts:
        n = len(pts[0])
        if any(len(mu) != n for mu in pts) or len({sum(mu) for mu in pts}) > 1:
            raise PolyError("support vectors must share length and coordinate sum")
    have = set(pts)
    for mu in pts:
        for nu in pts:
            for i in range(len(mu)):
                if mu[i] <= nu[i]:
                    continue
                ok = False
                for j in range(len(mu)):
                    if mu[j] >= nu[j]:
                        continue
                    a = list(mu)
                    a[i] -= 1
                    a[j] += 1
                    b = list(nu)
                    b[i] += 1
                    b[j] -= 1
                    if tuple(a) in have and tuple(b) in have:
                        ok = True
                        break
                if not ok:
                    return False, (mu, nu, i)
    return True, None


# -- structural transforms ----------------------------------------------------


def homogenize(p: SparsePoly, target_degree: int) -> SparsePoly:
    """Add one variable so every term has total degree ``target_degree``."""
    top = int(p.exps.sum(axis=1).max()) if len(p) else 0
    if target_degree < top:
        raise PolyError(f"target degree {target_degree} below polynomial degree {top}")
    terms = {mu + (target_degree - sum(mu),): c for mu, c in p.terms()}
    return SparsePoly(p.num_vars + 1, terms, degree=target_degree)


def collapse_variables(p: SparsePoly, partition: Sequence[Iterable[int]]) -> SparsePoly:
    """Substitute ``x_j`` for every ``z_i`` with ``i in partition[j]``."""
    parts = [sorted(set(S)) for S in partition]
    seen = [i for S in parts for i in S]
    if sorted(seen) != list(range(p.num_vars)):
        raise PolyError("partition must cover the variables disjointly")
    owner = np.empty(p.num_vars, dtype=int)
    for j, S in enumerate(parts):
        owner[S] = j
    acc: dict[tuple[int, ...], float] = defaultdict(float)
    for mu, c in p.terms():
        kappa = [0] * len(parts)
        for i, e in enumerate(mu):
            kappa[owner[i]] += e
        acc[tuple(kappa)] += c
    return SparsePoly(len(parts), acc, degree=p.degree if len(p) else None)


def compose_linear(p: SparsePoly, L) -> SparsePoly:
    """``p(L x)``: variable ``i`` is replaced by the linear form ``L[i] . x``.

    ``L`` must be entrywise non-negative (the result keeps non-negative
    coefficients).
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != p.num_vars:
        raise PolyError("L must have one row per variable")
    if np.any(L < 0):
        raise PolyError("substitution matrix must be non-negative")
    m = L.shape[1]
    forms = [linear_form(row) for row in L]
    powers: dict[tuple[int, int], SparsePoly] = {}

    def power(i: int, k: int) -> SparsePoly:
        if (i, k) not in powers:
            powers[(i, k)] = forms[i] ** k
        return powers[(i, k)]

    out = SparsePoly(m, {})
    for mu, c in p.terms():
        term = SparsePoly(m, {(0,) * m: c})
        for i, e in enumerate(mu):
            if e:
                term = term * power(i, e)
        out = out + term
    return out


def all_exponents(num_vars: int, degree: int):
    """All exponent vectors of the given degree, ascending lexicographic."""
    if num_vars == 0:
        if degree == 0:
            yield ()
        return
    for first in range(degree + 1):
        for rest in all_exponents(num_vars - 1, degree - first):
            yield (first,) + rest


def multinomial(exp: Sequence[int]) -> int:
    out = math.factorial(sum(exp))
    for e in exp:
        out //= math.factorial(e)
    return out
