"""
基函数、排序函数与积分规则
"""
import numpy as np
import pytest

from stdg.core.assembly import build_temporal_matrices
from stdg.core.basis import (
    SpaceTimeBasis, eval_quad_basis, eval_time_basis, eval_tri_basis, merge_indices, quad_nodes,
    quadrature, sort_indices, time_nodes, tri_nodes,
)
from stdg.utils.errors import BasisError


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_tri_basis_is_nodal(p):
    values = eval_tri_basis(p, tri_nodes(p))
    assert np.allclose(values, np.eye(len(tri_nodes(p))), atol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_quad_basis_is_nodal(p):
    values = eval_quad_basis(p, quad_nodes(p))
    assert np.allclose(values, np.eye((p + 1) ** 2), atol=1e-12)


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_time_basis_is_nodal(p):
    assert np.allclose(eval_time_basis(p, time_nodes(p)), np.eye(p + 1), atol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_partition_of_unity(p):
    rng = np.random.default_rng(p)
    pts = rng.random((20, 2))
    pts = pts[pts.sum(axis=1) <= 1.0]
    values, grads = eval_tri_basis(p, pts, with_gradients=True)
    assert np.allclose(values.sum(axis=-1), 1.0, atol=1e-12)
    assert np.allclose(grads.sum(axis=-2), 0.0, atol=1e-10)
    qv, qg = eval_quad_basis(p, rng.random((20, 2)), with_gradients=True)
    assert np.allclose(qv.sum(axis=-1), 1.0, atol=1e-12)
    assert np.allclose(qg.sum(axis=-2), 0.0, atol=1e-10)
    tv, td = eval_time_basis(p, rng.random(7), with_derivative=True)
    assert np.allclose(tv.sum(axis=-1), 1.0, atol=1e-12)
    assert np.allclose(td.sum(axis=-1), 0.0, atol=1e-10)


def test_tri_gradients_match_finite_differences():
    p = 3
    x = np.array([[0.21, 0.33]])
    _, grads = eval_tri_basis(p, x, with_gradients=True)
    h = 1e-6
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (eval_tri_basis(p, x + e) - eval_tri_basis(p, x - e)) / (2 * h)
        assert np.allclose(grads[..., d], fd, atol=1e-6)


def test_sort_indices_bijection():
    n, n_gamma = 6, 3
    seen = set()
    for k in range(1, n * n_gamma + 1):
        l1, l2 = sort_indices(k, n, n_gamma)
        assert 1 <= l1 <= n and 1 <= l2 <= n_gamma
        assert merge_indices(l1, l2, n) == k
        seen.add((l1, l2))
    assert len(seen) == n * n_gamma


def test_sort_indices_examples():
    assert sort_indices(1, 3) == (1, 1)
    assert sort_indices(4, 3) == (1, 2)
    assert sort_indices(9, 3) == (3, 3)


def test_sort_indices_out_of_range():
    with pytest.raises(BasisError):
        sort_indices(0, 3)
    with pytest.raises(BasisError):
        sort_indices(10, 3, 3)


@pytest.mark.parametrize("order", [2, 5, 9])
def test_triangle_rule_exactness(order):
    rule = quadrature('triangle', order)
    assert np.isclose(rule.weights.sum(), 0.5)
    # ∫ ξ^a η^b = a! b! / (a+b+2)!
    from math import factorial
    for a in range(order + 1):
        b = order - a
        exact = factorial(a) * factorial(b) / factorial(a + b + 2)
        num = np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b)
        assert np.isclose(num, exact, rtol=1e-12, atol=1e-15)


def test_interval_and_square_rules():
    line = quadrature('interval', 7)
    assert np.isclose(np.sum(line.weights * line.points ** 7), 1.0 / 8.0)
    square = quadrature('square', 6)
    num = np.sum(square.weights * square.points[:, 0] ** 6 * square.points[:, 1] ** 3)
    assert np.isclose(num, 1.0 / 28.0)


@pytest.mark.parametrize("p_gamma", [0, 1, 2, 3])
def test_temporal_integration_by_parts(p_gamma):
    tm = build_temporal_matrices(p_gamma)
    boundary = np.outer(tm.gamma_at_1, tm.gamma_at_1) - np.outer(tm.gamma_at_0, tm.gamma_at_0)
    assert np.allclose(tm.Dt + tm.Dt.T, boundary, atol=1e-12)
    assert np.allclose(tm.Mt, tm.Mt.T)
    assert np.isclose(tm.Mt.sum(), 1.0)


def test_invalid_degrees():
    with pytest.raises(BasisError):
        SpaceTimeBasis(5, 1)
    with pytest.raises(BasisError):
        eval_tri_basis(-1, np.zeros(2))
    with pytest.raises(BasisError):
        quadrature('hexagon', 2)


def test_basis_sizes():
    basis = SpaceTimeBasis(2, 1)
    assert (basis.n_phi, basis.n_psi, basis.n_gamma) == (6, 9, 2)
    assert basis.n_phi_st == 12 and basis.n_psi_st == 18
