"""Seeded generators for the test families.

Every generator takes a ``numpy.random.Generator`` so callers control seeding;
``case_rng(seed, *keys)`` derives an independent stream per case, which keeps
results identical however the cases are distributed over workers.
"""

from __future__ import annotations

import itertools

import numpy as np

from .matforms import RowStochasticMatrix, sinkhorn
from .polycore import SparsePoly


def case_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([seed, *keys])


def random_alpha(rng: np.random.Generator, n: int, l1: float) -> np.ndarray:
    """Positive ``alpha`` with ``sum alpha = n`` and ``||1 - alpha||_1 = l1 < 2``."""
    if not 0 <= l1 < 2:
        raise ValueError("l1 must lie in [0, 2)")
    delta = rng.standard_normal(n)
    delta -= delta.mean()
    norm = np.abs(delta).sum()
    if norm == 0:
        return np.ones(n)
    # sum delta = 0 and ||delta||_1 < 2 force delta_i < 1, so alpha > 0
    return 1.0 - delta * (l1 / norm)


def random_mat(rng: np.random.Generator, alpha, sparsity: float = 0.0, tol: float = 1e-12) -> RowStochasticMatrix:
    """Random element of Mat_n(alpha) by Sinkhorn scaling a random positive matrix.

    ``sparsity`` shrinks a random subset of entries towards zero (kept positive
    so the scaling always converges) to push samples towards the boundary.
    """
    alpha = np.asarray(alpha, dtype=float)
    n = len(alpha)
    M = rng.exponential(size=(n, n)) ** 2
    if sparsity > 0:
        M = np.where(rng.random((n, n)) < sparsity, 1e-3 * M, M)
    return sinkhorn(M, alpha, tol=tol).scaled


def random_doubly_stochastic(rng: np.random.Generator, n: int, tol: float = 1e-12) -> RowStochasticMatrix:
    return random_mat(rng, np.ones(n), tol=tol)


def random_rational_alpha(rng: np.random.Generator, n: int, N: int, max_l1: float = 1.5) -> tuple[np.ndarray, np.ndarray]:
    """``alpha = k / N`` with positive integers ``k``, ``sum k = nN``, ``||1 - alpha||_1 <= max_l1``."""
    for _ in range(10_000):
        k = np.full(n, N)
        for _ in range(rng.integers(1, 2 * n)):
            i, j = rng.choice(n, size=2, replace=False)
            if k[i] > 1:
                k[i] -= 1
                k[j] += 1
        if np.abs(N - k).sum() / N <= max_l1:
            return k / N, k
    raise RuntimeError("could not sample a rational alpha")


def _normalize_pencil(Bs: np.ndarray, alpha: np.ndarray, iters: int = 10_000, tol: float = 1e-14) -> np.ndarray:
    # alternate sum B_i = I and tr B_i = alpha_i (operator Sinkhorn); end on the sum
    n = Bs.shape[1]
    for _ in range(iters):
        S = Bs.sum(axis=0)
        w, V = np.linalg.eigh(S)
        R = (V / np.sqrt(w)) @ V.T
        Bs = np.einsum("ab,ibc,cd->iad", R, Bs, R)
        tr = np.trace(Bs, axis1=1, axis2=2)
        if np.abs(tr - alpha).max() <= tol:
            break
        Bs = Bs * (alpha / tr)[:, None, None]
    Bs = 0.5 * (Bs + Bs.transpose(0, 2, 1))
    return Bs


def determinantal_pencil(rng: np.random.Generator, alpha) -> np.ndarray:
    """PSD ``B_1..B_n`` with ``sum B_i = I`` and ``tr B_i = alpha_i``."""
    alpha = np.asarray(alpha, dtype=float)
    n = len(alpha)
    G = rng.standard_normal((n, n, n))
    Bs = np.einsum("iab,icb->iac", G, G)
    return _normalize_pencil(Bs, alpha)


def determinantal_poly(Bs, drop: float = 1e-13) -> SparsePoly:
    """Expand ``det(sum_i x_i B_i)`` by multilinearity in the columns."""
    Bs = np.asarray(Bs, dtype=float)
    m, n, _ = Bs.shape
    sigmas = np.array(list(itertools.product(range(m), repeat=n)))
    cols = np.arange(n)
    # mats[s][:, j] = B_{sigma_s(j)}[:, j]
    mats = Bs[sigmas, :, cols[None, :]].transpose(0, 2, 1)
    dets = np.linalg.det(mats)
    terms: dict[tuple[int, ...], float] = {}
    for sig, d in zip(sigmas, dets):
        exp = tuple(np.bincount(sig, minlength=m).tolist())
        terms[exp] = terms.get(exp, 0.0) + float(d)
    top = max(abs(v) for v in terms.values())
    terms = {e: max(v, 0.0) for e, v in terms.items() if v > drop * top}
    return SparsePoly(m, terms, degree=n)


def determinantal_family(seed: int, count: int = 25, n: int = 4, N: int = 4):
    """``count`` seeded determinantal polynomials with rational marginals ``k / N``.

    Yields ``(p, alpha, k, Bs)``.
    """
    out = []
    for i in range(count):
        rng = case_rng(seed, 4001, i)
        alpha, k = random_rational_alpha(rng, n, N)
        Bs = determinantal_pencil(rng, alpha)
        out.append((determinantal_poly(Bs), alpha, k, Bs))
    return out
