import itertools
import math

import numpy as np
import pytest

from stablecap.polycore import PolyError, SparsePoly, evaluate_with_gradient, marginals
from stablecap.productize import restriction_roots
from stablecap.srtsp import (
    HOLDS,
    NOT_APPLICABLE,
    block_count_probability,
    build_instance,
    coefficient_factor,
    collapse_blocks,
    explicit,
    product_measure,
    spanning_tree_poly,
    verify_tsp_bound,
)

TRIANGLE = [(0, 1), (1, 2), (0, 2)]
CYCLE4 = [(0, 1), (1, 2), (2, 3), (3, 0)]


def test_spanning_tree_examples():
    assert spanning_tree_poly([(0, 1)]).generating_poly.as_dict() == {(1,): 1.0}
    p = spanning_tree_poly(TRIANGLE).generating_poly
    assert p.as_dict() == pytest.approx({(1, 1, 0): 1 / 3, (1, 0, 1): 1 / 3, (0, 1, 1): 1 / 3})
    p = spanning_tree_poly(TRIANGLE, [2, 1, 1]).generating_poly
    assert p.as_dict() == pytest.approx({(1, 1, 0): 2 / 5, (1, 0, 1): 2 / 5, (0, 1, 1): 1 / 5})


def test_spanning_tree_counts_match_matrix_tree_theorem():
    # K4 has 16 spanning trees; the weighted total is the Laplacian cofactor
    edges = list(itertools.combinations(range(4), 2))
    rng = np.random.default_rng(0)
    w = rng.uniform(0.5, 2, len(edges))
    dist = spanning_tree_poly(edges, w)
    assert len(dist.generating_poly) == 16
    L = np.zeros((4, 4))
    for (a, b), we in zip(edges, w):
        L[a, a] += we
        L[b, b] += we
        L[a, b] -= we
        L[b, a] -= we
    total = np.linalg.det(L[1:, 1:])
    for mu, prob in dist.generating_poly.terms():
        weight = np.prod([w[i] for i, e in enumerate(mu) if e])
        assert prob == pytest.approx(weight / total, rel=1e-10)


def test_spanning_tree_errors():
    with pytest.raises(PolyError):
        spanning_tree_poly([(0, 1), (2, 3)])
    with pytest.raises(PolyError):
        spanning_tree_poly([(i, i + 1) for i in range(17)])
    with pytest.raises(PolyError):
        spanning_tree_poly([(0, 1)], [0.0])


def test_distribution_validation():
    with pytest.raises(PolyError):
        explicit(SparsePoly(2, {(2, 0): 1.0}))
    with pytest.raises(PolyError):
        explicit(SparsePoly(2, {(1, 0): 0.5}))


def test_build_examples():
    dist = spanning_tree_poly(TRIANGLE)
    inst = build_instance(dist, [[0], [1, 2]])
    assert inst.collapsed.as_dict() == pytest.approx({(1, 1): 2 / 3, (0, 2): 1 / 3})
    np.testing.assert_allclose(inst.beta, [2 / 3, 4 / 3])
    assert inst.d == 2 and inst.q_degree == 2
    assert inst.q_poly == inst.collapsed

    inst = build_instance(dist, [[0, 1], [2]])
    assert inst.collapsed.as_dict() == pytest.approx({(2, 0): 1 / 3, (1, 1): 2 / 3})
    np.testing.assert_allclose(inst.beta, [4 / 3, 2 / 3])

    inst = build_instance(product_measure([0.5, 0.5]), [[0], [1]])
    assert inst.collapsed.as_dict() == pytest.approx({(0, 0): 0.25, (1, 0): 0.25, (0, 1): 0.25, (1, 1): 0.25})
    np.testing.assert_allclose(inst.beta, [0.5, 0.5])
    assert inst.d == 2


def test_build_errors():
    dist = spanning_tree_poly(TRIANGLE)
    with pytest.raises(PolyError):
        build_instance(dist, [[0], [1], [2]])
    with pytest.raises(PolyError):
        collapse_blocks(dist.generating_poly, [[0, 1], [1, 2]])


def test_verify_examples():
    inst = build_instance(spanning_tree_poly(TRIANGLE), [[0], [1, 2]])
    rep = verify_tsp_bound(inst, eps=0.3)
    assert rep.status == HOLDS
    assert rep.probability == pytest.approx(2 / 3)
    assert rep.threshold == pytest.approx(math.exp(-2) * 0.09)
    with pytest.raises(ValueError):
        verify_tsp_bound(inst, eps=0.5)

    rep = verify_tsp_bound(build_instance(product_measure([0.5, 0.5]), [[0], [1]]))
    assert rep.status == NOT_APPLICABLE

    inst = build_instance(spanning_tree_poly(CYCLE4), [[0], [2]])
    assert inst.eps == pytest.approx(0.5) and inst.d == 3
    rep = verify_tsp_bound(inst)
    assert rep.status == HOLDS
    assert rep.probability == pytest.approx(0.5)


def test_uniform_cycle_covering_partitions_not_applicable():
    dist = spanning_tree_poly(CYCLE4)
    for parts in ([[0, 2], [1, 3]], [[0, 1], [2, 3]], [[0], [1], [2, 3]]):
        assert build_instance(dist, parts).eps <= 0
        assert verify_tsp_bound(build_instance(dist, parts)).status == NOT_APPLICABLE


def _partitions(m, n):
    # assign each element to a block or to no block (-1); keep assignments with non-empty blocks
    for owner in itertools.product(range(-1, n), repeat=m):
        blocks = [[i for i in range(m) if owner[i] == j] for j in range(n)]
        if all(blocks):
            yield blocks


def test_collapsed_coefficients_match_enumeration():
    dist = spanning_tree_poly(CYCLE4, [1, 2, 0.5, 1.5])
    for n in (1, 2, 3):
        for blocks in _partitions(4, n):
            p = collapse_blocks(dist.generating_poly, blocks)
            support = set(p.support)
            for kappa in itertools.product(range(5), repeat=n):
                prob = block_count_probability(dist, blocks, kappa)
                if kappa in support:
                    assert p.coefficient(kappa) == pytest.approx(prob, abs=1e-14)
                else:
                    assert prob == 0


def test_q_properties():
    rng = np.random.default_rng(1)
    graphs = [TRIANGLE, CYCLE4, list(itertools.combinations(range(4), 2))]
    for edges in graphs:
        dist = spanning_tree_poly(edges, rng.uniform(0.5, 2, len(edges)))
        m = len(edges)
        for n in (1, 2):
            for blocks in list(_partitions(m, n))[:15]:
                try:
                    inst = build_instance(dist, blocks)
                except PolyError:
                    continue
                Q = inst.q_poly
                D = inst.q_degree
                assert Q.num_vars == D and Q.is_homogeneous and Q.degree == D
                v, g = evaluate_with_gradient(Q, np.ones(D))
                assert v == pytest.approx(1.0, abs=1e-12)
                if D > n:
                    tail = (D - inst.beta.sum()) / (D - n)
                    np.testing.assert_allclose(g, list(inst.beta) + [tail] * (D - n), atol=1e-10)
                rep = verify_tsp_bound(inst)
                assert rep.checks["coefficient_identity"]
                assert rep.checks["coefficient_relation"]
                if rep.status != NOT_APPLICABLE:
                    assert rep.status == HOLDS


def test_q_restriction_roots_are_real():
    rng = np.random.default_rng(2)
    dist = spanning_tree_poly(list(itertools.combinations(range(4), 2)))
    inst = build_instance(dist, [[0, 1], [5]])
    for _ in range(20):
        y = rng.uniform(0.1, 3, inst.q_degree)
        lam = restriction_roots(inst.q_poly, y)
        assert np.all(np.isfinite(lam))
        assert float(np.prod(lam)) == pytest.approx(inst.q_poly(y), rel=1e-8)


def test_coefficient_factor():
    assert coefficient_factor(0) == 1.0
    assert coefficient_factor(1) == 1.0
    assert coefficient_factor(3) == pytest.approx(27 / 6)


def test_beta_is_expected_block_count():
    dist = spanning_tree_poly(CYCLE4, [1, 2, 3, 4])
    blocks = [[0, 1], [3]]
    inst = build_instance(dist, blocks)
    expected = [sum(prob * len(set(T) & set(S)) for T, prob in dist.atoms()) for S in blocks]
    np.testing.assert_allclose(inst.beta, expected, atol=1e-12)
    np.testing.assert_allclose(marginals(inst.collapsed, np.ones(2)), expected, atol=1e-12)
