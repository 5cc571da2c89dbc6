import itertools
import math

import numpy as np
import pytest

from stablecap.bounds import main_capacity_lower, marginal_equivalences
from stablecap.capsolve import capacity
from stablecap.families import case_rng, determinantal_family, random_alpha, random_mat
from stablecap.lnalpha import (
    _expand_residual,
    check_support_certificate,
    enumerate_forests,
    forest_vertices,
    l_n_alpha,
    lp_min_general,
    matrix_from_forest,
    prod_min_at_point,
)
from stablecap.matforms import product_poly
from stablecap.polycore import PolyError, all_exponents, multinomial
from stablecap.simplex import INFEASIBLE, OPTIMAL


def same_rows(A, B):
    """Row order is irrelevant for prod_i (M x)_i."""
    key = lambda M: sorted(map(tuple, np.round(np.asarray(M, dtype=float), 12)))
    return key(A) == key(B)


def is_forest_by_rank(n, edges):
    """Independent acyclicity test: oriented incidence columns are independent."""
    if not edges:
        return True
    M = np.zeros((2 * n, len(edges)))
    for k, (i, j) in enumerate(edges):
        M[i, k] = 1
        M[n + j, k] = -1
    return np.linalg.matrix_rank(M) == len(edges)


# -- forests -------------------------------------------------------------------------


@pytest.mark.parametrize("n, count", [(1, 2), (2, 15), (3, 328)])
def test_forest_counts(n, count):
    forests = list(enumerate_forests(n))
    assert len(forests) == count
    assert len({frozenset(f) for f in forests}) == count
    assert () in [tuple(f) for f in forests]


def test_forests_match_rank_oracle():
    n = 3
    all_edges = [(i, j) for i in range(n) for j in range(n)]
    expected = {
        frozenset(S)
        for r in range(len(all_edges) + 1)
        for S in itertools.combinations(all_edges, r)
        if is_forest_by_rank(n, list(S))
    }
    got = {frozenset(f) for f in enumerate_forests(n)}
    assert got == expected


def test_spanning_trees_k22():
    trees = [f for f in enumerate_forests(2) if len(f) == 3]
    assert len(trees) == 4


def test_forest_order_deterministic():
    assert list(enumerate_forests(3)) == list(enumerate_forests(3))


def test_forest_cap():
    with pytest.raises(PolyError):
        list(enumerate_forests(6))


# -- leaf peeling --------------------------------------------------------------------


def test_peeling_examples():
    M = matrix_from_forest([(0, 0), (1, 1)], [1, 1])
    np.testing.assert_allclose(M.entries, np.eye(2))
    M = matrix_from_forest([(0, 0), (0, 1), (1, 1)], [0.5, 1.5])
    np.testing.assert_allclose(M.entries, [[0.5, 0.5], [0, 1]])
    assert matrix_from_forest([(0, 0), (0, 1), (1, 1)], [1.5, 0.5]) is None
    # isolated row vertex
    assert matrix_from_forest([(0, 0)], [1, 1]) is None


def test_vertices_are_in_mat():
    rng = np.random.default_rng(0)
    for n in (2, 3):
        alpha = random_alpha(rng, n, 0.8)
        verts = forest_vertices(alpha)
        assert verts
        for v in verts:
            assert v.matrix.in_mat(1e-9)


# -- L_n(alpha) ----------------------------------------------------------------------


@pytest.mark.parametrize("alpha, value", [((1, 1), 1.0), ((1.5, 0.5), 0.5), ((2, 0), 0.0)])
def test_l_n_examples(alpha, value):
    res = l_n_alpha(alpha)
    assert res.value == pytest.approx(value, abs=1e-9)
    assert not res.failures


def test_l_n_argmin_vertex():
    res = l_n_alpha((1.5, 0.5))
    assert same_rows(res.argmin_forest.matrix.entries, [[1, 0], [0.5, 0.5]])


def test_l_n_closed_form_two_by_two():
    # L_2((1+s, 1-s)) = 1 - s, attained at [[1,0],[s,1-s]]
    for s in np.linspace(0, 0.95, 8):
        assert l_n_alpha((1 + s, 1 - s)).value == pytest.approx(1 - s, abs=1e-8)


def _grid(n, step):
    k = round(n / step)
    for c in itertools.product(range(k + 1), repeat=n - 1):
        if sum(c) <= k:
            yield np.array(list(c) + [k - sum(c)]) * step


def test_positivity_equivalences_and_lower_bound():
    rng = np.random.default_rng(3)
    cases = list(_grid(2, 0.25)) + list(_grid(3, 0.5))
    cases += [random_alpha(rng, 4, l1) for l1 in (0.3, 1.2, 1.9)]
    cases += [np.array([2.0, 0.0, 1.0, 1.0]), np.array([1.5, 0.5, 2.0, 0.0])]
    for alpha in cases:
        L = l_n_alpha(alpha).value
        eq = marginal_equivalences(alpha)
        assert eq.agree
        assert (L > 1e-12) == eq.norm_verdict, alpha
        lower = main_capacity_lower(alpha)
        if lower is not None:
            assert L >= lower - 1e-9


def test_concavity_of_log_capacity():
    for k in range(20):
        rng = case_rng(9, k)
        n = 3 + k % 2
        alpha = random_alpha(rng, n, rng.uniform(0.1, 1.5))
        M1 = random_mat(rng, alpha, sparsity=0.3).entries
        M2 = random_mat(rng, alpha, sparsity=0.3).entries
        c1 = capacity(product_poly(M1)).value
        c2 = capacity(product_poly(M2)).value
        if c1 <= 0 or c2 <= 0:
            continue
        cm = capacity(product_poly((M1 + M2) / 2)).value
        assert math.log(cm) >= 0.5 * (math.log(c1) + math.log(c2)) - 1e-8


# -- prod_min and the general LP ------------------------------------------------------


def test_prod_min_examples():
    v, _ = prod_min_at_point((1, 1), (1, 4))
    assert v == pytest.approx(4.0)
    v, arg = prod_min_at_point((1.5, 0.5), (2, 1))
    assert v == pytest.approx(3.0)
    assert same_rows(arg.matrix.entries, [[1, 0], [0.5, 0.5]])
    for alpha in ((1.5, 0.5), (0.5, 1.0, 1.5)):
        assert prod_min_at_point(alpha, np.ones(len(alpha)))[0] == pytest.approx(1.0)


def test_prod_min_integer_alpha_is_monomial():
    rng = np.random.default_rng(2)
    for alpha in ((1, 1, 1), (2, 1, 0), (0, 3, 0), (2, 0, 1, 1)):
        x = rng.uniform(0.2, 4, len(alpha))
        v, _ = prod_min_at_point(alpha, x)
        assert v == pytest.approx(float(np.prod(x ** np.array(alpha))), rel=1e-10)


def test_lp_examples():
    assert lp_min_general((1, 1), (1.5, 0.5), 2, 2).value == pytest.approx(1.0)
    assert lp_min_general((1, 4), (1, 1), 2, 2).value == pytest.approx(4.0)
    res = lp_min_general((2, 1), (1.5, 0.5), 2, 2)
    assert res.status == OPTIMAL
    assert res.value == pytest.approx(3.0)
    assert res.support == [(1, 1), (2, 0)]
    assert res.coefficients == pytest.approx({(2, 0): 0.5, (1, 1): 0.5})


def test_lp_infeasible_farkas():
    # alpha with a negative entry lies outside the exponent cone
    res = lp_min_general((1, 1), (2.5, -0.5), 2, 2)
    assert res.status == INFEASIBLE
    y = res.farkas
    E = np.array(list(all_exponents(2, 2)), dtype=float)
    assert np.all(E @ y <= 1e-9)
    assert np.array([2.5, -0.5]) @ y > 0


def test_lp_below_products():
    rng = np.random.default_rng(5)
    for k in range(15):
        n = 2 + k % 2
        alpha = random_alpha(rng, n, rng.uniform(0, 1.8))
        t = rng.uniform(0.2, 3, n)
        lp = lp_min_general(t, alpha, n, n).value
        pm = prod_min_at_point(alpha, t)[0]
        assert lp <= pm + 1e-9
    for alpha in ((1, 1), (2, 0), (1, 1, 1), (2, 1, 0)):
        t = rng.uniform(0.2, 3, len(alpha))
        n = len(alpha)
        assert lp_min_general(t, alpha, n, n).value == pytest.approx(prod_min_at_point(alpha, t)[0], rel=1e-9)


def test_squeeze_interval():
    for p, alpha, k, Bs in determinantal_family(42, count=6):
        rng = np.random.default_rng(sum(k))
        for _ in range(5):
            x = rng.uniform(0.2, 3, 4)
            lo, _ = prod_min_at_point(alpha, x)
            hi = (float(alpha @ x) / 4) ** 4
            assert lo - 1e-8 <= p(x) <= hi + 1e-8


# -- support certificates -------------------------------------------------------------


def _residual_oracle(t, beta, n):
    # coefficient of x^mu in (t.x)^n - (beta.x)(1.x)^(n-1) by the multinomial formula
    m = len(t)
    out = {}
    for mu in all_exponents(m, n):
        a = multinomial(mu) * math.prod(ti**e for ti, e in zip(t, mu))
        b = 0.0
        for i in range(m):
            if mu[i]:
                nu = list(mu)
                nu[i] -= 1
                b += beta[i] * multinomial(nu)
        out[mu] = a - b
    return out


def test_certificate_examples():
    cert = check_support_certificate({(2, 0), (1, 1)}, (2, 1), 2, 2, alpha=(1.5, 0.5))
    np.testing.assert_allclose(cert.beta, [4, 0], atol=1e-9)
    assert cert.value == pytest.approx(3.0)
    assert cert.slack_poly_coeffs[(0, 2)] == pytest.approx(1.0)
    cert = check_support_certificate({(1, 1)}, (1, 1), 2, 2)
    np.testing.assert_allclose(cert.beta, [1, 1], atol=1e-9)
    assert all(abs(v) <= 1e-9 for v in cert.slack_poly_coeffs.values())


def test_certificate_full_support_generic_t():
    rng = np.random.default_rng(4)
    for _ in range(5):
        t = rng.uniform(0.5, 3, 2)
        assert check_support_certificate(set(all_exponents(2, 2)), t, 2, 2) is None


def test_residual_expansion_matches_multinomial_formula():
    rng = np.random.default_rng(6)
    for m, n in ((2, 2), (3, 3), (2, 4)):
        t = rng.uniform(0.2, 2, m)
        beta = rng.normal(size=m)
        got = _expand_residual(t, beta, n)
        want = _residual_oracle(t, beta, n)
        assert set(got) == set(want)
        for mu in want:
            assert got[mu] == pytest.approx(want[mu], abs=1e-10)


def test_certificates_agree_with_lp():
    rng = np.random.default_rng(8)
    found = 0
    for _ in range(20):
        alpha = random_alpha(rng, 3, rng.uniform(0, 1.5))
        t = rng.uniform(0.3, 3, 3)
        lp = lp_min_general(t, alpha, 3, 3)
        cert = check_support_certificate(set(lp.support), t, 3, 3, alpha=alpha)
        if cert is not None:
            found += 1
            assert cert.value == pytest.approx(lp.value, rel=1e-8)
    assert found > 0
