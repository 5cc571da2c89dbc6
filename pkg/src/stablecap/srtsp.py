"""Strongly Rayleigh distributions and the capacity route to the TSP bound.

A distribution ``mu`` on subsets of ``[m]`` has generating polynomial
``p_mu(z) = sum_T P(T) z^T``.  Grouping the ground set into blocks
``S_1..S_n`` and counting ``A_i = |T cap S_i|`` gives ``p_{mu,S}(x)``, whose
coefficient of ``x^kappa`` is ``P(A = kappa)``.  Homogenizing to degree ``d``
and spreading the extra variable evenly over ``d - n`` new ones yields a
degree-``d`` polynomial ``Q`` in ``d`` variables, to which the capacity and
coefficient bounds apply.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .capsolve import capacity
from .polycore import PolyError, SparsePoly, compose_linear, homogenize, marginals

TREE_EDGE_CAP = 16
SUPPORT_TOL = 1e-15

HOLDS = "HOLDS"
VIOLATED = "VIOLATED"
NOT_APPLICABLE = "NOT_APPLICABLE"


@dataclass
class SRDistribution:
    ground_size: int
    generating_poly: SparsePoly
    provenance: str

    def __post_init__(self):
        p = self.generating_poly
        if p.num_vars != self.ground_size:
            raise PolyError("generating polynomial has the wrong number of variables")
        if len(p) and p.exps.max() > 1:
            raise PolyError("generating polynomial must be multiaffine")
        total = float(p.coeffs.sum())
        if abs(total - 1.0) > 1e-12:
            raise PolyError(f"probabilities sum to {total}, expected 1")

    def atoms(self):
        """``(subset, probability)`` pairs with positive probability."""
        for mu, c in self.generating_poly.terms():
            yield tuple(i for i, e in enumerate(mu) if e), c


def _find(parent: list[int], a: int) -> int:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def spanning_tree_poly(edges, weights=None) -> SRDistribution:
    """Weighted spanning-tree measure: ``P(T)`` proportional to ``prod_{e in T} w_e``."""
    edges = [tuple(int(v) for v in e) for e in edges]
    m = len(edges)
    if m == 0:
        raise PolyError("graph has no edges")
    if m > TREE_EDGE_CAP:
        raise PolyError(f"{m} edges exceeds the enumeration cap {TREE_EDGE_CAP}")
    w = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (m,) or np.any(w <= 0):
        raise PolyError("need one positive weight per edge")
    verts = sorted({v for e in edges for v in e})
    index = {v: k for k, v in enumerate(verts)}
    k = len(verts)
    terms = {}
    for T in itertools.combinations(range(m), k - 1):
        parent = list(range(k))
        ok = True
        for e in T:
            a, b = _find(parent, index[edges[e][0]]), _find(parent, index[edges[e][1]])
            if a == b:
                ok = False
                break
            parent[a] = b
        if ok:
            terms[tuple(int(i in T) for i in range(m))] = float(np.prod(w[list(T)]))
    if not terms:
        raise PolyError("graph is disconnected")
    total = sum(terms.values())
    poly = SparsePoly(m, {mu: c / total for mu, c in terms.items()}, degree=k - 1)
    return SRDistribution(m, poly, "spanning_tree")


def product_measure(probs) -> SRDistribution:
    """Independent elements, ``z_i`` present with probability ``probs[i]``."""
    probs = np.asarray(probs, dtype=float)
    m = len(probs)
    if np.any(probs < 0) or np.any(probs > 1):
        raise PolyError("probabilities must lie in [0, 1]")
    terms = {}
    for mu in itertools.product((0, 1), repeat=m):
        terms[mu] = float(np.prod(np.where(np.array(mu) == 1, probs, 1 - probs)))
    return SRDistribution(m, SparsePoly(m, terms), "product_measure")


def explicit(poly: SparsePoly) -> SRDistribution:
    """Caller-asserted strongly Rayleigh multiaffine polynomial."""
    return SRDistribution(poly.num_vars, poly, "explicit")


# -- instance construction -------------------------------------------------------


@dataclass
class TspInstance:
    distribution: SRDistribution
    partition: list[tuple[int, ...]]
    collapsed: SparsePoly
    homogenized: SparsePoly
    q_poly: SparsePoly
    beta: np.ndarray
    d: int
    eps: float
    q_degree: int

    @property
    def n(self) -> int:
        return len(self.partition)


def collapse_blocks(p: SparsePoly, partition) -> SparsePoly:
    """``p_{mu,S}``: ``z_i -> x_j`` for ``i in S_j``; elements in no block are set to 1."""
    parts = [tuple(sorted(set(int(i) for i in S))) for S in partition]
    owner = np.full(p.num_vars, -1)
    for j, S in enumerate(parts):
        for i in S:
            if not 0 <= i < p.num_vars or owner[i] >= 0:
                raise PolyError("blocks must be disjoint subsets of the ground set")
            owner[i] = j
    acc: dict[tuple[int, ...], float] = {}
    for mu, c in p.terms():
        kappa = [0] * len(parts)
        for i, e in enumerate(mu):
            if owner[i] >= 0:
                kappa[owner[i]] += e
        key = tuple(kappa)
        acc[key] = acc.get(key, 0.0) + c
    return SparsePoly(len(parts), acc)


def build_instance(dist: SRDistribution, partition) -> TspInstance:
    """Collapse, homogenize and spread out the homogenizing variable.

    ``d`` is the largest set with positive probability.  When ``d = n`` and the
    collapsed polynomial is already homogeneous, ``Q = P = p_{mu,S}``; when
    ``d = n`` but it is not, ``Q`` is built with degree ``n + 1`` so that the
    homogenizing variable has somewhere to go.
    """
    parts = [tuple(sorted(set(int(i) for i in S))) for S in partition]
    n = len(parts)
    if n == 0:
        raise PolyError("partition is empty")
    p = collapse_blocks(dist.generating_poly, parts)
    gp = dist.generating_poly
    sizes = gp.exps.sum(axis=1)[gp.coeffs > SUPPORT_TOL]
    d = int(sizes.max())
    if d < n:
        raise PolyError(f"largest set has {d} elements, fewer than the {n} blocks")
    beta = marginals(p, np.ones(n))
    if p.is_homogeneous and p.degree == n and d == n:
        D = n
        P = homogenize(p, n)
        Q = p
    else:
        D = d if d > n else n + 1
        P = homogenize(p, D)
        L = np.zeros((n + 1, D))
        L[np.arange(n), np.arange(n)] = 1.0
        L[n, n:] = 1.0 / (D - n)
        Q = compose_linear(P, L)
    eps = 1.0 - float(np.abs(beta - 1).sum())
    alpha = marginals(Q, np.ones(D))
    lhs = float(np.abs(alpha - 1).sum())
    rhs = float(np.abs(beta - 1).sum()) + abs(float(np.sum(1 - beta)))
    if abs(lhs - rhs) > 1e-9:
        raise PolyError(f"marginal norm identity fails: {lhs} vs {rhs}")
    return TspInstance(dist, parts, p, P, Q, beta, d, eps, D)


# -- verification -----------------------------------------------------------------


@dataclass
class TspReport:
    status: str
    probability: float
    brute_force_probability: float
    threshold: float | None
    eps: float
    d: int
    q_degree: int
    capacity: float | None
    q_coefficient: float
    coefficient_relation_error: float
    checks: dict[str, bool] = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "status": self.status,
            "probability": self.probability,
            "brute_force_probability": self.brute_force_probability,
            "threshold": self.threshold,
            "eps": self.eps,
            "d": self.d,
            "q_degree": self.q_degree,
            "capacity": self.capacity,
            "q_coefficient": self.q_coefficient,
            "coefficient_relation_error": self.coefficient_relation_error,
            "checks": self.checks,
        }


def block_count_probability(dist: SRDistribution, partition, kappa) -> float:
    """``P(A = kappa)`` summed directly over the atoms of the distribution."""
    kappa = tuple(kappa)
    total = 0.0
    for T, prob in dist.atoms():
        s = set(T)
        if tuple(len(s.intersection(S)) for S in partition) == kappa:
            total += prob
    return total


def coefficient_factor(k: int) -> float:
    """``k^k / k!`` with ``0^0 = 0! = 1``."""
    return k**k / math.factorial(k) if k else 1.0


def verify_tsp_bound(inst: TspInstance, tol: float = 1e-9, eps: float | None = None) -> TspReport:
    """Check the chain ``P(A = 1) = c * <x^1>Q >= c * (D!/D^D) cap(Q) > e^-n eps^D``.

    ``eps`` defaults to ``1 - ||beta - 1||_1``; a smaller positive value may be
    passed.  With ``eps <= 0`` the hypothesis fails and only the exact
    identities are checked.
    """
    n, D = inst.n, inst.q_degree
    ones = (1,) * n
    prob = inst.collapsed.coefficient(ones)
    brute = block_count_probability(inst.distribution, inst.partition, ones)
    qc = inst.q_poly.coefficient((1,) * D)
    rel = coefficient_factor(D - n) * qc
    rel_err = abs(prob - rel) / max(prob, 1e-300) if prob > 0 else abs(rel)
    e = inst.eps if eps is None else float(eps)
    if e > inst.eps + 1e-12:
        raise ValueError(f"eps = {e} exceeds 1 - ||beta - 1||_1 = {inst.eps}")
    checks = {
        "coefficient_identity": abs(prob - brute) <= 1e-12,
        "coefficient_relation": rel_err <= 1e-10,
    }
    if not e > 0:
        threshold = 0.0 if e == 0 else None
        return TspReport(NOT_APPLICABLE, prob, brute, threshold, e, inst.d, D, None, qc, rel_err, checks)
    cap = capacity(inst.q_poly).value
    threshold = math.exp(-n) * e**D
    checks["capacity_lower"] = cap > e**D - tol
    checks["coefficient_lower"] = qc >= math.factorial(D) / D**D * cap - tol
    checks["probability_lower"] = prob > threshold
    status = HOLDS if all(checks.values()) else VIOLATED
    return TspReport(status, prob, brute, threshold, e, inst.d, D, cap, qc, rel_err, checks)
