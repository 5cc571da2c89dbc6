"""Capacity ``cap_alpha(p) = inf_{x>0} p(x) / x^alpha``.

With ``x = e^y`` the objective ``F(y) = log p(e^y) - alpha . y`` is a
log-sum-exp minus a linear term, hence convex.  For homogeneous ``p`` with
``sum(alpha) = deg p`` it is constant along ``1``, so the search is restricted
to ``sum(y) = 0``.

The target is first located relative to Newt(p):

* outside: capacity 0, certified by a separating functional;
* relative interior: the infimum is attained and found by damped Newton;
* relative boundary: the infimum equals the capacity of the face polynomial
  (terms on the minimal face containing the target), which is attained and
  computed the same way; the original problem has no minimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .polycore import PolyError, SparsePoly, face_poly, marginals, newton_contains, newton_face

POSITIVE_ATTAINED = "POSITIVE_ATTAINED"
ZERO = "ZERO"
BOUNDARY_UNATTAINED = "BOUNDARY_UNATTAINED"

MAX_NEWTON_STEPS = 10_000
ARMIJO_C = 1e-4


class CapacityError(RuntimeError):
    """Newton iteration failed to converge; carries the best iterate."""

    def __init__(self, msg: str, best_y: np.ndarray, best_value: float):
        super().__init__(msg)
        self.best_y = best_y
        self.best_value = best_value


@dataclass
class CapacityResult:
    value: float
    status: str
    minimizer: np.ndarray | None = None
    grad_residual: float = 0.0
    weights: np.ndarray | None = None
    separator: np.ndarray | None = None
    face: np.ndarray | None = None
    newton_steps: int = 0
    log_value: float = field(default=-math.inf)

    def to_json_obj(self) -> dict:
        out = {
            "capacity": self.value,
            "status": self.status,
            "minimizer": None if self.minimizer is None else self.minimizer.tolist(),
            "residual": self.grad_residual,
        }
        if self.separator is not None:
            out["separator"] = self.separator.tolist()
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        return out


def _objective(p: SparsePoly, target: np.ndarray, y: np.ndarray):
    """F(y), gradient, Hessian via the Gibbs weights of the terms at e^y."""
    lt = p.log_terms(y)
    top = lt.max()
    w = np.exp(lt - top)
    s = w.sum()
    F = top + math.log(s) - float(target @ y)
    w /= s
    E = p.exps.astype(float)
    mean = w @ E
    H = (E * w[:, None]).T @ E - np.outer(mean, mean)
    return F, mean - target, H


def _F(p: SparsePoly, target: np.ndarray, y: np.ndarray) -> float:
    lt = p.log_terms(y)
    top = lt.max()
    return top + math.log(np.exp(lt - top).sum()) - float(target @ y)


def _newton_step(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    # pseudo-inverse on the range of H; H annihilates 1 and the directions
    # normal to the Newton polytope, so the step stays in the gauge slice
    n = len(g)
    P = np.eye(n) - 1.0 / n
    Hs = P @ H @ P
    vals, vecs = np.linalg.eigh(Hs)
    cut = 1e-12 * max(1.0, vals.max(initial=0.0))
    inv = np.where(vals > cut, 1.0 / np.where(vals > cut, vals, 1.0), 0.0)
    return -(vecs * inv) @ (vecs.T @ (P @ g))


def minimize_log_objective(p: SparsePoly, target: np.ndarray, tol: float = 1e-9, y0=None, max_steps: int = MAX_NEWTON_STEPS):
    """Damped Newton with Armijo backtracking on the gauge slice ``sum y = 0``.

    Returns ``(y, F, grad_inf_norm, steps)``.
    """
    n = p.num_vars
    y = np.zeros(n) if y0 is None else np.asarray(y0, dtype=float) - np.mean(y0)
    F, g, H = _objective(p, target, y)
    for step in range(max_steps):
        gnorm = float(np.abs(g).max())
        if gnorm <= tol:
            return y, F, gnorm, step
        d = _newton_step(H, g)
        slope = float(g @ d)
        if not slope < 0:
            d = -(g - g.mean())
            slope = float(g @ d)
        t = 1.0
        accepted = False
        for _ in range(60):
            y_new = y + t * d
            F_new = _F(p, target, y_new)
            if F_new <= F + ARMIJO_C * t * slope + 1e-15 * (1.0 + abs(F)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # rounding floor: accept the full step only if it shrinks the gradient
            F_new, g_new, H_new = _objective(p, target, y + d)
            if np.abs(g_new).max() < gnorm:
                y, F, g, H = y + d, F_new, g_new, H_new
                continue
            raise CapacityError(f"line search stalled with gradient {gnorm:.3e}", y, math.exp(F))
        y = y_new
        F, g, H = _objective(p, target, y)
    raise CapacityError(
        f"no convergence in {max_steps} Newton steps (gradient {np.abs(g).max():.3e})", y, math.exp(F)
    )


def capacity(p: SparsePoly, target=None, tol: float = 1e-9) -> CapacityResult:
    """Capacity of ``p`` at ``target`` (default the all-ones vector)."""
    n = p.num_vars
    target = np.ones(n) if target is None else np.asarray(target, dtype=float)
    if target.shape != (n,):
        raise PolyError(f"target has shape {target.shape}, expected ({n},)")
    if np.any(target < 0):
        raise PolyError("target must be non-negative")
    if not p.is_homogeneous:
        raise PolyError("capacity requires a homogeneous polynomial")
    if abs(target.sum() - p.degree) > 1e-9 * max(1, p.degree):
        raise PolyError(f"target sums to {target.sum()}, expected degree {p.degree}")
    if len(p) == 0:
        return CapacityResult(0.0, ZERO, separator=np.zeros(n))

    cert = newton_contains(p, target)
    if not cert.contains:
        return CapacityResult(0.0, ZERO, separator=cert.separator)

    face = newton_face(p, target)
    if face is None:  # tolerance disagreement between the two LPs; trust the first
        face = np.nonzero(cert.weights > 0)[0]
    interior = len(face) == len(p)
    q = p if interior else face_poly(p, face)
    y, F, gnorm, steps = minimize_log_objective(q, target, tol=tol)
    if interior:
        return CapacityResult(
            math.exp(F), POSITIVE_ATTAINED, minimizer=np.exp(y), grad_residual=gnorm,
            weights=cert.weights, newton_steps=steps, log_value=F,
        )
    return CapacityResult(
        math.exp(F), BOUNDARY_UNATTAINED, minimizer=None, grad_residual=gnorm,
        weights=cert.weights, face=face, newton_steps=steps, log_value=F,
    )


def gradient_consistency(p: SparsePoly, result: CapacityResult, target=None) -> float:
    """``|| marginals(p, x*) - target ||_inf`` at the returned minimizer."""
    target = np.ones(p.num_vars) if target is None else np.asarray(target, dtype=float)
    if result.minimizer is None:
        raise ValueError("no minimizer to check")
    return float(np.abs(marginals(p, result.minimizer) - target).max())


def capacity_of_linear_power(c, verify: bool = False) -> float:
    """``cap_1((c . x)^n) = n^n prod c_i``.

    With ``verify=True`` (n <= 6) the closed form is checked against a numeric
    capacity solve of the expanded power.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 1 or np.any(c <= 0):
        raise PolyError("c must be a positive vector")
    n = len(c)
    value = float(n**n * np.prod(c))
    if verify and n <= 6:
        from .polycore import linear_form

        numeric = capacity(linear_form(c) ** n).value
        if abs(numeric - value) > 1e-6 * value:
            raise CapacityError(f"closed form {value} disagrees with solver {numeric}", np.zeros(n), numeric)
    return value
