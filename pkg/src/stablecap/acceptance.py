"""The acceptance suite: each criterion is a function of ``(seed, threads)``.

Criteria 1-9 return a :class:`CriterionResult` whose ``metrics`` hold only
deterministic quantities (no timings), so the report produced by
:func:`run_all` is byte-identical for any worker count.  Criterion 10 compares
two such reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import main_capacity_lower
from .capsolve import capacity
from .families import case_rng, determinantal_family, random_alpha, random_doubly_stochastic, random_mat
from .lnalpha import check_support_certificate, l_n_alpha, lp_min_general, prod_min_at_point
from .matforms import permanent_oracle, permanent_ryser, product_poly
from .parallel import pmap
from .polyscale import CONVERGED, certify_rate, log_product_bound_check, run_scaling
from .productize import productize, replicated_majorization
from .srtsp import HOLDS, build_instance, spanning_tree_poly, verify_tsp_bound

RUNTIME_LIMITS = {1: 20.0, 2: 60.0, 3: 120.0, 4: 30.0, 5: 60.0, 6: 30.0, 7: 5.0, 8: 10.0, 9: 5.0}


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {"id": self.id, "name": self.name, "passed": self.passed, "metrics": self.metrics}


def _f(x) -> float | None:
    # plain floats for JSON; inf/nan become None
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


# -- 1. doubly stochastic capacity -------------------------------------------------


def _c1_case(args):
    seed, i = args
    D = random_doubly_stochastic(case_rng(seed, 1, i), 5)
    return capacity(product_poly(D)).value


def criterion_1(seed: int, threads: int = 1) -> CriterionResult:
    caps = np.array(pmap(_c1_case, [(seed, i) for i in range(100)], threads))
    err = float(np.abs(caps - 1).max())
    return CriterionResult(1, "doubly stochastic capacity", err <= 1e-6, {"cases": 100, "max_error": err})


# -- 2. main bound on Mat_n(alpha) ------------------------------------------------------


def _c2_case(args):
    seed, i = args
    rng = case_rng(seed, 2, i)
    n = (3, 4, 5)[i % 3]
    l1 = float(rng.uniform(1e-3, 2 - 1e-3))
    alpha = random_alpha(rng, n, l1)
    A = random_mat(rng, alpha, sparsity=float(rng.choice([0.0, 0.5, 0.8])))
    cap = capacity(product_poly(A)).value
    return cap - main_capacity_lower(alpha)


def criterion_2(seed: int, threads: int = 1) -> CriterionResult:
    gaps = np.array(pmap(_c2_case, [(seed, i) for i in range(200)], threads))
    viol = int(np.sum(gaps < -1e-9))
    return CriterionResult(2, "main capacity bound", viol == 0, {"cases": 200, "violations": viol, "min_gap": float(gaps.min())})


# -- 3. exact L_n(alpha) -------------------------------------------------------------------


def alpha_grid(seed: int) -> list[np.ndarray]:
    """20 points for n = 2 and 20 for n = 3, including cases with ``||1 - alpha||_1 >= 2``."""
    out = [np.array([1 + s, 1 - s]) for s in np.linspace(0, 1, 20)]
    lattice = []
    for a in range(13):
        for b in range(13 - a):
            lattice.append(np.array([a, b, 12 - a - b]) / 4)
    rng = case_rng(seed, 3)
    pick = rng.choice(len(lattice), size=18, replace=False)
    out += [np.ones(3), np.array([2.25, 0.25, 0.5])] + [lattice[k] for k in sorted(pick)]
    return out


def _c3_case(alpha):
    res = l_n_alpha(alpha)
    return res.value, len(res.failures)


def criterion_3(seed: int, threads: int = 1) -> CriterionResult:
    grid = alpha_grid(seed)
    vals = pmap(_c3_case, grid, threads)
    bound_viol = positivity_mismatch = failures = 0
    min_gap = math.inf
    for alpha, (L, nfail) in zip(grid, vals):
        failures += nfail
        l1 = float(np.abs(1 - alpha).sum())
        b = main_capacity_lower(alpha)
        if b is not None:
            min_gap = min(min_gap, L - b)
            bound_viol += L < b - 1e-9
        positivity_mismatch += (L > 1e-12) != (l1 < 2 - 1e-12)
    h1 = l_n_alpha([1.0, 1.0]).value
    h2 = l_n_alpha([1.5, 0.5]).value
    hand = abs(h1 - 1) <= 1e-8 and abs(h2 - 0.5) <= 1e-8
    ok = bound_viol == 0 and positivity_mismatch == 0 and failures == 0 and hand
    return CriterionResult(3, "exact L_n(alpha)", ok, {
        "grid_points": len(grid), "bound_violations": bound_viol, "positivity_mismatches": positivity_mismatch,
        "solver_failures": failures, "min_gap": _f(min_gap), "L2_ones": h1, "L2_three_halves": h2,
    })


# -- 4. productization -------------------------------------------------------------------------


def _c4_case(args):
    seed, idx = args
    p, alpha, _, _ = determinantal_family(seed)[idx]
    rng = case_rng(seed, 4, idx)
    out = []
    for _ in range(4):
        y = rng.uniform(0.1, 3.0, 4)
        cert = productize(p, y, alpha)
        out.append((cert.value_residual, cert.marginal_residual, replicated_majorization(cert)))
    return out


def closed_form_error() -> float:
    from .polycore import SparsePoly

    p = SparsePoly(2, {(2, 0): 1 / 8, (1, 1): 6 / 8, (0, 2): 1 / 8})
    d = (1 + math.sqrt(0.5)) / 2
    A = productize(p, [1.0, 2.0]).product_matrix.entries
    return float(np.abs(A - np.array([[d, 1 - d], [1 - d, d]])).max())


def criterion_4(seed: int, threads: int = 1) -> CriterionResult:
    rows = [r for part in pmap(_c4_case, [(seed, i) for i in range(25)], threads) for r in part]
    vr = max(r[0] for r in rows)
    mr = max(r[1] for r in rows)
    maj = sum(r[2] for r in rows)
    cf = closed_form_error()
    ok = vr <= 1e-6 and mr <= 1e-8 and maj == len(rows) and cf <= 1e-10
    return CriterionResult(4, "productization", ok, {
        "cases": len(rows), "max_value_residual": vr, "max_marginal_residual": mr,
        "majorization_holds": maj, "closed_form_error": cf,
    })


# -- 5. scaling convergence --------------------------------------------------------------------


def _c5_case(args):
    seed, idx = args
    p, _, _, _ = determinantal_family(seed)[idx]
    cap = capacity(p).value
    tr = run_scaling(p)
    vals = tr.values
    monotone = bool(np.all(np.diff(vals) <= 1e-12 * vals[:-1]))
    prod_err = max(abs(float(np.prod(s.x)) - 1) for s in tr.steps)
    rep = certify_rate(tr, cap, p.num_vars)
    return (
        monotone, prod_err, abs(tr.final_capacity_estimate - cap), len(rep.in_regime_violations),
        tr.status == CONVERGED, len(tr.steps), _f(rep.max_recursion_excess),
    )


def criterion_5(seed: int, threads: int = 1) -> CriterionResult:
    rows = pmap(_c5_case, [(seed, i) for i in range(25)], threads)
    mono = sum(r[0] for r in rows)
    prod_err = max(r[1] for r in rows)
    est_err = max(r[2] for r in rows)
    viol = sum(r[3] for r in rows)
    conv = sum(r[4] for r in rows)
    excess = max((r[6] for r in rows if r[6] is not None), default=None)
    ok = mono == 25 and prod_err <= 1e-9 and est_err <= 1e-4 and viol == 0 and conv == 25
    return CriterionResult(5, "scaling convergence", ok, {
        "cases": 25, "monotone": mono, "converged": conv, "max_prod_error": prod_err,
        "max_estimate_error": est_err, "in_regime_violations": viol, "max_recursion_excess": excess,
        "max_steps": max(r[5] for r in rows),
    })


# -- 6. permanent sandwich --------------------------------------------------------------------


def _c6_case(args):
    seed, i = args
    rng = case_rng(seed, 6, i)
    n = 2 + i % 6
    A = rng.exponential(size=(n, n))
    if i % 2:
        A = A * np.where(rng.random((n, n)) < 0.4, 1e-3, 1.0)
    r, o = permanent_ryser(A), permanent_oracle(A)
    cap = capacity(product_poly(A)).value
    lower = math.factorial(n) / n**n * cap
    scale = max(cap, 1e-300)
    return abs(r - o) / abs(o), (r - lower) / scale, (cap - r) / scale


def criterion_6(seed: int, threads: int = 1) -> CriterionResult:
    rows = pmap(_c6_case, [(seed, i) for i in range(100)], threads)
    rel = max(r[0] for r in rows)
    lo = min(r[1] for r in rows)
    hi = min(r[2] for r in rows)
    ok = rel <= 1e-10 and lo >= -1e-9 and hi >= -1e-9
    return CriterionResult(6, "permanent sandwich", ok, {
        "cases": 100, "max_relative_disagreement": rel, "min_lower_slack": lo, "min_upper_slack": hi,
    })


# -- 7. log-product inequality -------------------------------------------------------------------------


def criterion_7(seed: int, threads: int = 1) -> CriterionResult:
    rng = case_rng(seed, 7)
    worst, viol = -math.inf, 0
    for k in range(10_000):
        n = 2 + k % 9
        gamma = random_alpha(rng, n, float(rng.uniform(0, 2)))
        rep = log_product_bound_check(gamma)
        worst = max(worst, rep.log_product - rep.quadratic_bound)
        viol += not rep.holds
    return CriterionResult(7, "log-product inequality", viol == 0, {"cases": 10_000, "violations": viol, "max_excess": worst})


# -- 8. general-polynomial LP and certificate ---------------------------------------------------


def criterion_8(seed: int, threads: int = 1) -> CriterionResult:
    lp = lp_min_general([2.0, 1.0], [1.5, 0.5], 2, 2)
    cert = check_support_certificate(lp.support, [2.0, 1.0], 2, 2, alpha=[1.5, 0.5])
    hand = (
        abs(lp.value - 3) <= 1e-9
        and set(lp.support) == {(2, 0), (1, 1)}
        and cert is not None
        and np.abs(cert.beta - [4, 0]).max() <= 1e-9
        and abs(cert.value - 3) <= 1e-9
    )
    rng = case_rng(seed, 8)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        cuts = np.sort(rng.integers(0, n + 1, size=n - 1))
        alpha = np.diff(np.concatenate([[0], cuts, [n]])).astype(float)
        t = rng.uniform(0.2, 3.0, n)
        val = lp_min_general(t, alpha, n, n).value
        target = float(np.prod(t**alpha))
        pm, _ = prod_min_at_point(alpha, t)
        worst = max(worst, abs(val - target) / target, abs(pm - target) / target)
    ok = hand and worst <= 1e-8
    return CriterionResult(8, "linear program and certificate", ok, {
        "hand_value": lp.value, "hand_support": [list(mu) for mu in lp.support],
        "beta": None if cert is None else cert.beta.tolist(), "integer_cases": 50, "max_relative_error": worst,
    })


# -- 9. TSP block-count bound --------------------------------------------------------------------------


def tsp_instances():
    tri = spanning_tree_poly([(0, 1), (1, 2), (0, 2)])
    cyc = spanning_tree_poly([(0, 1), (1, 2), (2, 3), (3, 0)])
    return [
        ("triangle {1},{2,3}", build_instance(tri, [[0], [1, 2]])),
        ("4-cycle {e1},{e3}", build_instance(cyc, [[0], [2]])),
    ]


def criterion_9(seed: int, threads: int = 1) -> CriterionResult:
    ok = True
    metrics = {}
    for name, inst in tsp_instances():
        rep = verify_tsp_bound(inst)
        ok &= rep.status == HOLDS and rep.coefficient_relation_error <= 1e-10
        metrics[name] = {
            "probability": rep.probability, "threshold": rep.threshold, "eps": rep.eps,
            "d": rep.d, "n": inst.n, "capacity": rep.capacity,
            "coefficient_relation_error": rep.coefficient_relation_error, "status": rep.status,
        }
    return CriterionResult(9, "TSP block-count bound", bool(ok), metrics)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9,
}


def run_all(seed: int = 42, threads: int = 1) -> dict:
    results = [CRITERIA[k](seed, threads).to_json_obj() for k in sorted(CRITERIA)]
    return {"seed": seed, "criteria": results, "all_passed": all(r["passed"] for r in results)}


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)
