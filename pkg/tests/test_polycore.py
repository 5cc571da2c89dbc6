import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablecap.matforms import product_poly
from stablecap.polycore import (
    PolyError,
    SparsePoly,
    all_exponents,
    check_exchange,
    collapse_variables,
    compose_linear,
    evaluate_with_gradient,
    face_poly,
    homogenize,
    is_hall,
    linear_form,
    marginals,
    monomial,
    multinomial,
    newton_contains,
    newton_face,
    restricted_degree,
)

X1X2 = monomial((1, 1))
HALF_SQ = linear_form([0.5, 0.5]) ** 2
X1_AVG = SparsePoly(2, {(2, 0): 0.5, (1, 1): 0.5})


@st.composite
def homogeneous_polys(draw, max_vars=4, max_degree=4):
    n = draw(st.integers(1, max_vars))
    d = draw(st.integers(1, max_degree))
    exps = list(all_exponents(n, d))
    chosen = draw(st.lists(st.sampled_from(exps), min_size=1, max_size=8, unique=True))
    coeffs = draw(st.lists(st.floats(0.01, 10.0), min_size=len(chosen), max_size=len(chosen)))
    return SparsePoly(n, dict(zip(chosen, coeffs)), degree=d)


# -- construction and serialization -------------------------------------------------


def test_terms_sorted_and_merged():
    p = SparsePoly(2, [((0, 2), 1.0), ((2, 0), 2.0), ((0, 2), 0.5)])
    assert p.support == [(0, 2), (2, 0)]
    assert p.coefficient((0, 2)) == 1.5
    assert p.degree == 2 and p.is_homogeneous


def test_tiny_coefficients_dropped():
    p = SparsePoly(2, {(1, 1): 1.0, (2, 0): 1e-16})
    assert p.support == [(1, 1)]


@pytest.mark.parametrize(
    "terms, kwargs",
    [
        ({(1, 1): -1.0}, {}),
        ({(1,): 1.0}, {}),
        ({(1, -1): 1.0}, {}),
        ({(1, 1): float("nan")}, {}),
        ({(1, 1): 1.0}, {"degree": 3}),
    ],
)
def test_invalid_construction(terms, kwargs):
    with pytest.raises(PolyError):
        SparsePoly(2, terms, **kwargs)


def test_json_roundtrip_exact():
    p = SparsePoly(3, {(1, 1, 0): 0.1, (0, 0, 2): 1 / 3, (2, 0, 0): 7.25})
    text = p.to_json()
    obj = json.loads(text)
    assert [t["exp"] for t in obj["terms"]] == sorted(t["exp"] for t in obj["terms"])
    q = SparsePoly.from_json(text)
    assert q == p
    assert q.to_json() == text


@pytest.mark.parametrize(
    "text",
    [
        "not json",
        '{"num_vars": 2}',
        '{"num_vars": 2, "degree": 2, "terms": [{"exp": [1, 1]}]}',
        '{"num_vars": 2, "degree": 2, "terms": [{"exp": [1.5, 0.5], "coeff": 1}]}',
        '{"num_vars": 2, "degree": 2, "terms": [{"exp": [1, 1], "coeff": "1"}]}',
        '{"num_vars": -1, "degree": 2, "terms": []}',
    ],
)
def test_malformed_json(text):
    with pytest.raises(PolyError):
        SparsePoly.from_json(text)


def test_arithmetic():
    p = linear_form([1.0, 2.0])
    q = p * p
    assert q.as_dict() == {(2, 0): 1.0, (1, 1): 4.0, (0, 2): 4.0}
    assert (p**2) == q
    assert (2 * p).coefficient((0, 1)) == 4.0
    with pytest.raises(PolyError):
        p * -1.0
    s = p + monomial((1, 0), 3.0)
    assert s.coefficient((1, 0)) == 4.0


# -- evaluation -----------------------------------------------------------------------


@pytest.mark.parametrize(
    "p, x, value, grad",
    [
        (X1X2, (2, 3), 6.0, (3, 2)),
        (HALF_SQ, (1, 1), 1.0, (1, 1)),
        (HALF_SQ, (1, 3), 4.0, (2, 2)),
    ],
)
def test_evaluate_with_gradient(p, x, value, grad):
    v, g = evaluate_with_gradient(p, x)
    assert v == pytest.approx(value, rel=1e-14)
    np.testing.assert_allclose(g, grad, rtol=1e-14)


def test_evaluate_rejects_bad_points():
    with pytest.raises(PolyError):
        evaluate_with_gradient(X1X2, (1.0, 0.0))
    with pytest.raises(PolyError):
        evaluate_with_gradient(X1X2, (1.0, 1.0, 1.0))


@pytest.mark.parametrize(
    "p, y, expected",
    [
        (X1X2, (0.3, 7.0), (1, 1)),
        (HALF_SQ, (1, 3), (0.5, 1.5)),
        (X1_AVG, (1, 1), (1.5, 0.5)),
    ],
)
def test_marginals_examples(p, y, expected):
    np.testing.assert_allclose(marginals(p, y), expected, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(homogeneous_polys(), st.integers(0, 2**31))
def test_euler_identity(p, seed):
    y = np.random.default_rng(seed).uniform(0.1, 5.0, p.num_vars)
    v, g = evaluate_with_gradient(p, y)
    assert float(y @ g) == pytest.approx(p.degree * v, rel=1e-10)
    assert marginals(p, y).sum() == pytest.approx(p.degree, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(homogeneous_polys(), st.integers(0, 2**31))
def test_gradient_matches_finite_differences(p, seed):
    rng = np.random.default_rng(seed)
    for _ in range(10):
        y = rng.uniform(0.2, 3.0, p.num_vars)
        _, g = evaluate_with_gradient(p, y)
        for i in range(p.num_vars):
            h = 1e-5 * y[i]
            e = np.zeros(p.num_vars)
            e[i] = h
            fd = (p(y + e) - p(y - e)) / (2 * h)
            assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-9 * max(1.0, abs(g).max()))


# -- Newton polytope ---------------------------------------------------------------------


def test_newton_midpoint():
    p = SparsePoly(2, {(2, 0): 1.0, (0, 2): 1.0})
    cert = newton_contains(p, (1, 1))
    assert cert.contains
    np.testing.assert_allclose(cert.weights, [0.5, 0.5], atol=1e-12)


def _separates(cert, p, target):
    h = cert.separator
    return float(h @ np.asarray(target)) > float((p.exps @ h).max()) + 1e-12


def test_newton_separator_x1_squared():
    p = monomial((2, 0))
    cert = newton_contains(p, (1, 1))
    assert not cert.contains
    np.testing.assert_allclose(cert.separator, [0, 1])
    assert _separates(cert, p, (1, 1))


def test_newton_outside_segment():
    # (0.5, 1.5) would need weight 1.5 on (1, 1): outside the segment
    p = SparsePoly(2, {(1, 1): 1.0, (2, 0): 1.0})
    cert = newton_contains(p, (0.5, 1.5))
    assert not cert.contains
    assert _separates(cert, p, (0.5, 1.5))
    # the unnormalized functional (-1, 0) is equivalent modulo the all-ones direction
    h = cert.separator
    assert h[1] - h[0] > 0


@settings(max_examples=40, deadline=None)
@given(homogeneous_polys())
def test_support_points_are_in_newton(p):
    for mu in p.support:
        cert = newton_contains(p, mu)
        assert cert.contains
        np.testing.assert_allclose(cert.weights @ p.exps, mu, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(homogeneous_polys(), st.integers(0, 2**31))
def test_newton_certificates_are_valid(p, seed):
    rng = np.random.default_rng(seed)
    target = rng.dirichlet(np.ones(p.num_vars)) * p.degree
    cert = newton_contains(p, target)
    if cert.contains:
        assert cert.weights.min() >= -1e-12
        assert cert.weights.sum() == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(cert.weights @ p.exps, target, atol=1e-8)
    else:
        assert _separates(cert, p, target)


def test_newton_face():
    np.testing.assert_array_equal(newton_face(HALF_SQ, (1, 1)), [0, 1, 2])
    idx = newton_face(X1_AVG, (1, 1))
    assert [X1_AVG.support[i] for i in idx] == [(1, 1)]
    assert newton_face(monomial((2, 0)), (1, 1)) is None
    q = face_poly(X1_AVG, idx)
    assert q.as_dict() == {(1, 1): 0.5}


def test_product_polys_have_saturated_support():
    # integer points of Newt(p) are exactly the support for products of linear forms
    rng = np.random.default_rng(5)
    for n in (2, 3, 4):
        for _ in range(3):
            A = rng.exponential(size=(n, n)) * (rng.random((n, n)) < 0.6)
            A[np.arange(n), rng.permutation(n)] += 0.1
            p = product_poly(A)
            supp = set(p.support)
            for mu in all_exponents(n, n):
                assert newton_contains(p, mu).contains == (mu in supp)


# -- Hall and exchange --------------------------------------------------------------------


def test_hall_examples():
    assert restricted_degree(X1X2, [0]) == 1
    assert restricted_degree(X1X2, [0, 1]) == 2
    assert is_hall(X1X2).is_hall
    res = is_hall(monomial((2, 0)))
    assert not res.is_hall and res.witness == (1,)
    assert is_hall(SparsePoly(2, {(2, 0): 0.5, (0, 2): 0.5})).is_hall


@settings(max_examples=40, deadline=None)
@given(homogeneous_polys())
def test_non_hall_means_outside_newton(p):
    if p.degree != p.num_vars:
        return
    if not is_hall(p).is_hall:
        assert not newton_contains(p, np.ones(p.num_vars)).contains


def test_exchange_examples():
    ok, bad = check_exchange([(2, 0), (0, 2)])
    assert not ok
    mu, nu, i = bad
    assert {mu, nu} == {(2, 0), (0, 2)} and mu[i] > nu[i]
    assert check_exchange([(2, 0), (1, 1), (0, 2)]) == (True, None)
    assert check_exchange([(1, 1)]) == (True, None)
    with pytest.raises(PolyError):
        check_exchange([(1, 1), (2, 1)])


def test_product_support_has_exchange():
    rng = np.random.default_rng(11)
    for _ in range(5):
        A = rng.exponential(size=(3, 3)) * (rng.random((3, 3)) < 0.6)
        A[np.arange(3), np.arange(3)] += 0.5
        assert check_exchange(product_poly(A).support)[0]


# -- transforms ---------------------------------------------------------------------------


def test_homogenize():
    p = SparsePoly(2, {(1, 0): 1.0, (1, 1): 1.0})
    q = homogenize(p, 2)
    assert q.as_dict() == {(1, 0, 1): 1.0, (1, 1, 0): 1.0}
    assert q(np.array([0.7, 1.3, 1.0])) == pytest.approx(p(np.array([0.7, 1.3])))
    assert homogenize(X1X2, 2).as_dict() == {(1, 1, 0): 1.0}
    with pytest.raises(PolyError):
        homogenize(p, 1)


def test_collapse_variables():
    tri = SparsePoly(3, {(1, 1, 0): 1 / 3, (1, 0, 1): 1 / 3, (0, 1, 1): 1 / 3})
    q = collapse_variables(tri, [[0], [1, 2]])
    assert q.as_dict() == pytest.approx({(1, 1): 2 / 3, (0, 2): 1 / 3})
    assert collapse_variables(linear_form([0.5, 0.5]), [[0, 1]]).as_dict() == {(1,): 1.0}
    assert collapse_variables(X1X2, [[0], [1]]) == X1X2
    with pytest.raises(PolyError):
        collapse_variables(tri, [[0], [1]])
    with pytest.raises(PolyError):
        collapse_variables(tri, [[0, 1], [1, 2]])


def test_compose_linear_matches_evaluation():
    rng = np.random.default_rng(3)
    p = SparsePoly(2, {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 0.5})
    L = rng.uniform(0, 1, (2, 3))
    q = compose_linear(p, L)
    for _ in range(5):
        x = rng.uniform(0.1, 2, 3)
        assert q(x) == pytest.approx(p(L @ x), rel=1e-12)


def test_all_exponents_and_multinomial():
    exps = list(all_exponents(3, 4))
    assert len(exps) == 15 and exps == sorted(exps)
    assert multinomial((2, 1, 1)) == 12
    total = sum(multinomial(mu) for mu in exps)
    assert total == 3**4


def test_evaluation_on_grid_matches_expansion():
    p = linear_form([1.0, 2.0, 0.5]) ** 3
    for x in itertools.product([0.5, 1.0, 2.0], repeat=3):
        x = np.array(x)
        assert p(x) == pytest.approx(float(np.array([1.0, 2.0, 0.5]) @ x) ** 3, rel=1e-12)
