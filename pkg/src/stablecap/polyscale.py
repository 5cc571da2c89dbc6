"""Multiplicative scaling towards a doubly stochastic polynomial.

Starting from ``x = 1`` the iteration

    gamma = x * grad p(x) / p(x),   c = (prod gamma)^(1/n),   x <- (c / gamma) * x

keeps ``prod x = 1`` (so ``p(x)`` is always an upper bound on ``cap_1(p)``)
and, for real stable ``p``, decreases ``p(x)`` by at least the factor
``prod gamma``.  Writing ``eps_t = log p(x_t) - log cap``, once
``||1 - gamma||_1 < 2`` every step satisfies
``eps_{t+1} <= eps_t - (2 / 3n^3) eps_t^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .polycore import PolyError, SparsePoly, evaluate_with_gradient

GAMMA_VANISH = 1e-14
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 10**6
LOG_PRODUCT_C = 1.0 - math.log(2.0)
RECURSION_SLACK = 1e-9

CONVERGED = "CONVERGED"
UNCONVERGED = "UNCONVERGED"


class VanishingMarginal(PolyError):
    """A marginal ``gamma_i`` vanished; the target lies outside the support cone."""

    def __init__(self, msg: str, index: int):
        super().__init__(msg)
        self.index = index


@dataclass
class ScalingStep:
    x: np.ndarray
    gamma: np.ndarray
    c: float
    value: float


@dataclass
class ScalingTrace:
    steps: list[ScalingStep] = field(default_factory=list)
    final_capacity_estimate: float = math.inf
    status: str = UNCONVERGED
    regime_entry: int | None = None

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.steps])

    def epsilons(self, cap: float) -> np.ndarray:
        return np.log(self.values) - math.log(cap)

    def to_json_lines(self) -> list[dict]:
        return [
            {"t": t, "x": s.x.tolist(), "gamma": s.gamma.tolist(), "c": s.c, "value": s.value}
            for t, s in enumerate(self.steps)
        ]


def _gamma(p: SparsePoly, x: np.ndarray) -> tuple[float, np.ndarray]:
    val, grad = evaluate_with_gradient(p, x)
    if not val > 0:
        raise PolyError(f"p(x) = {val} is not positive")
    return val, x * grad / val


def _check_input(p: SparsePoly) -> None:
    if not p.is_homogeneous or p.degree != p.num_vars:
        raise PolyError("scaling needs a homogeneous polynomial of degree n in n variables")


def scale_step(p: SparsePoly, x) -> tuple[np.ndarray, np.ndarray, float]:
    """One scaling update; returns ``(x_next, gamma, c)``."""
    _check_input(p)
    x = np.asarray(x, dtype=float)
    _, gamma = _gamma(p, x)
    small = np.nonzero(gamma <= GAMMA_VANISH)[0]
    if small.size:
        i = int(small[0])
        raise VanishingMarginal(f"marginal gamma_{i} = {gamma[i]:.3e} vanished", i)
    c = float(np.exp(np.mean(np.log(gamma))))
    return (c / gamma) * x, gamma, c


def run_scaling(p: SparsePoly, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> ScalingTrace:
    """Iterate from ``x = 1`` until ``||gamma - 1||_inf <= tol``.

    Every visited point is recorded; the last step holds the final ``x`` and its
    marginals.  ``regime_entry`` is the first ``t`` with ``||1 - gamma||_1 < 2``.
    """
    _check_input(p)
    n = p.num_vars
    x = np.ones(n)
    trace = ScalingTrace()
    for t in range(max_iters + 1):
        val, gamma = _gamma(p, x)
        if trace.regime_entry is None and np.abs(1 - gamma).sum() < 2:
            trace.regime_entry = t
        done = float(np.abs(gamma - 1).max()) <= tol
        if done or t == max_iters:
            c = float(np.exp(np.mean(np.log(np.maximum(gamma, 1e-300)))))
            trace.steps.append(ScalingStep(x, gamma, c, val))
            trace.status = CONVERGED if done else UNCONVERGED
            break
        x_next, gamma, c = scale_step(p, x)
        trace.steps.append(ScalingStep(x, gamma, c, val))
        # renormalize the gauge against drift; prod x = 1 holds exactly in theory
        x = x_next / np.exp(np.mean(np.log(x_next)))
    trace.final_capacity_estimate = trace.steps[-1].value
    return trace


@dataclass
class RateReport:
    in_regime_violations: list[int]
    envelope_violations: list[int]
    out_of_regime_flags: list[int]
    regime_entry: int | None
    max_recursion_excess: float

    @property
    def ok(self) -> bool:
        return not self.in_regime_violations and not self.envelope_violations


def certify_rate(trace: ScalingTrace, cap: float, n: int) -> RateReport:
    """Check the quadratic decrease of ``eps_t`` against an independent ``cap``.

    In-regime steps (``||1 - gamma_t||_1 < 2``) must satisfy the recursion with
    slack ``1e-9``; from the first in-regime step the closed-form envelope
    ``eps_t <= eps_0 / (1 + 2 eps_0 t / 3n^3)`` is checked too.  Out-of-regime
    steps violating ``eps_{t+1} <= eps_t - 2/(3n)`` are only flagged.
    """
    if not cap > 0:
        raise ValueError("rate certification needs a positive capacity")
    eps = trace.epsilons(cap)
    k = 2.0 / (3.0 * n**3)
    in_viol, env_viol, flags = [], [], []
    excess = -math.inf
    start = None
    for t in range(len(trace.steps) - 1):
        l1 = float(np.abs(1 - trace.steps[t].gamma).sum())
        if l1 < 2:
            if start is None:
                start = t
            bound = eps[t] - k * eps[t] ** 2
            excess = max(excess, eps[t + 1] - bound)
            if eps[t + 1] > bound + RECURSION_SLACK:
                in_viol.append(t)
        elif eps[t + 1] > eps[t] - 2.0 / (3.0 * n):
            flags.append(t)
    if start is not None:
        e0 = max(eps[start], 0.0)
        for t in range(start, len(eps)):
            s = t - start
            env = e0 / (1.0 + k * e0 * s)
            if eps[t] > env + RECURSION_SLACK:
                env_viol.append(t)
    return RateReport(in_viol, env_viol, flags, trace.regime_entry, excess)


@dataclass
class LogProductReport:
    log_product: float
    quadratic_bound: float
    l1: float
    in_regime: bool
    holds: bool


def log_product_bound_check(gamma, tol: float = 1e-12) -> LogProductReport:
    """``log prod gamma <= -||1 - gamma||_2^2 / 6`` for ``||1 - gamma||_1 < 2``.

    Outside that regime ``holds`` records the weaker comparison with
    ``max(-C, -||1 - gamma||_2^2 / 6)``, ``C = 1 - log 2``, which is not proven
    for every ``n`` and therefore never asserted.
    """
    gamma = np.asarray(gamma, dtype=float)
    n = len(gamma)
    if np.any(gamma < 0):
        raise ValueError("gamma must be non-negative")
    if abs(gamma.sum() - n) > 1e-9 * n:
        raise ValueError(f"gamma sums to {gamma.sum()}, expected {n}")
    with np.errstate(divide="ignore"):
        lp = float(np.sum(np.log(gamma)))
    d = 1 - gamma
    quad = -float(d @ d) / 6.0
    l1 = float(np.abs(d).sum())
    if l1 < 2:
        return LogProductReport(lp, quad, l1, True, lp <= quad + tol)
    return LogProductReport(lp, quad, l1, False, lp <= max(-LOG_PRODUCT_C, quad) + tol)
