"""
单元算子：质量矩阵、梯度/散度、压力算子与缓存
"""
import numpy as np
import pytest

from stdg.core.assembly import (
    BoundaryCondition, ElementOperators, assemble_continuity_operators, assemble_edge_operators,
    build_temporal_matrices, eval_phi, eval_psi, invert_update_matrix,
    parse_boundary_condition, periodic_pairs,
)
from stdg.core.basis import eval_quad_basis, eval_time_basis, eval_tri_basis, quadrature, time_nodes
from stdg.core.mesh import bilinear_map, det2
from stdg.core.operators import pressure_mass
from stdg.utils.errors import AssemblyError, ConfigError, SingularMatrixError
from tests.conftest import PERIODIC_BCS, WALL_BCS, build_ops


def test_parse_boundary_conditions():
    assert parse_boundary_condition("wall") == BoundaryCondition('wall')
    assert parse_boundary_condition("lid:2.5") == BoundaryCondition('lid', 2.5)
    assert parse_boundary_condition("outflow") == BoundaryCondition('outflow', 0.0)
    assert parse_boundary_condition("periodic:3").partner == 3
    assert parse_boundary_condition("outflow:1").transmissive
    assert parse_boundary_condition("pressure").category == 'pressure'
    for text in ("slip", "lid:fast", "periodic", "wall:1"):
        with pytest.raises(ConfigError):
            parse_boundary_condition(text)


def test_periodic_pairs_must_be_mutual():
    assert periodic_pairs(PERIODIC_BCS) == [(1, 3), (2, 4)]
    with pytest.raises(ConfigError):
        periodic_pairs({1: BoundaryCondition('periodic', partner=3), 3: BoundaryCondition('wall')})


def test_invert_update_matrix():
    M = np.array([[2.0, 1.0], [0.0, 3.0]])
    assert np.allclose(invert_update_matrix(M) @ M, np.eye(2))
    with pytest.raises(SingularMatrixError):
        invert_update_matrix(np.ones((3, 3)))


def test_mass_matrix_partition_of_unity(square_path):
    ops = build_ops(square_path, p=2, p_gamma=1)
    assert np.allclose(ops.Ms.sum(axis=(1, 2)), ops.mesh.dual_area)
    assert np.allclose(ops.Ms, np.transpose(ops.Ms, (0, 2, 1)))
    assert np.all(np.linalg.eigvalsh(ops.Ms) > 0)


def test_mass_matrix_against_direct_quadrature(square_path):
    """平行四边形对偶单元上直接用双线性映射积分"""
    ops = build_ops(square_path, p=2, p_gamma=1)
    mesh = ops.mesh
    rule = quadrature('square', 10)
    c = mesh.dual_corners
    skew = np.abs(c[:, 0] + c[:, 2] - c[:, 1] - c[:, 3]).max(axis=1)
    cells = np.flatnonzero(~mesh.is_boundary & (skew < 1e-12))
    assert len(cells)
    for j in cells[:5]:
        corners = np.repeat(mesh.dual_corners[j][None], rule.size, axis=0)
        _, J = bilinear_map(corners, rule.points)
        psi = ops.basis.psi(rule.points)
        direct = np.einsum('q,q,qk,qm->km', rule.weights, np.abs(det2(J)), psi, psi)
        assert np.allclose(ops.Ms[j], direct, atol=1e-12)


def test_space_time_blocks_are_kronecker(square_path):
    ops = build_ops(square_path, p=1, p_gamma=2, dt=0.3)
    j = int(np.flatnonzero(~ops.mesh.is_boundary)[0])
    eo = assemble_edge_operators(ops, j)
    tm = ops.temporal
    assert np.allclose(eo.M, eo.Mplus - eo.Mcirc)
    assert np.allclose(eo.M, np.kron(tm.update, ops.Ms[j]))
    assert np.allclose(eo.Minv @ eo.M, np.eye(len(eo.M)), atol=1e-10)
    nphi, npsi, ng = ops.basis.n_phi, ops.basis.n_psi, ops.basis.n_gamma
    assert eo.Q_left.shape == (ng * npsi, ng * nphi, 2)
    with pytest.raises(AssemblyError):
        assemble_edge_operators(ops, ops.mesh.n_edges)


def test_divergence_is_negative_gradient_transpose(square_path):
    ops = build_ops(square_path, p=1, p_gamma=1, bcs={t: BoundaryCondition('outflow') for t in (1, 2, 3, 4)})
    rng = np.random.default_rng(0)
    P = rng.standard_normal((ops.mesh.n_tri, ops.basis.n_gamma, ops.basis.n_phi))
    V = rng.standard_normal((ops.mesh.n_edges, 2, ops.basis.n_gamma, ops.basis.n_psi))
    lhs = np.sum(V * ops.apply_gradient(P))
    rhs = -np.sum(P * ops.apply_divergence(V))
    assert np.isclose(lhs, rhs, rtol=1e-12)


def test_continuity_operators_dense_view(square_path):
    ops = build_ops(square_path, p=1, p_gamma=1)
    blocks = assemble_continuity_operators(ops, 0)
    assert len(blocks) == 3
    rng = np.random.default_rng(1)
    V = rng.standard_normal((ops.mesh.n_edges, 2, ops.basis.n_gamma, ops.basis.n_psi))
    dense = sum(np.einsum('kmd,dm->k', blk, V[j].reshape(2, -1))
                for blk, j in zip(blocks, ops.mesh.tri_edges[0]))
    assert np.allclose(dense, ops.apply_divergence(V)[0].ravel())


def test_constant_pressure_has_zero_gradient(periodic_ops):
    P = np.full((periodic_ops.mesh.n_tri, 2, periodic_ops.basis.n_phi), 3.0)
    assert np.abs(periodic_ops.apply_gradient(P)).max() < 1e-11


def test_constant_velocity_is_divergence_free(periodic_ops):
    V = np.zeros((periodic_ops.mesh.n_edges, 2, 2, periodic_ops.basis.n_psi))
    V[:, 0] = 0.7
    V[:, 1] = -1.3
    assert np.abs(periodic_ops.apply_divergence(V)).max() < 1e-11


def test_pressure_operator_matches_composition(periodic_ops):
    ops = periodic_ops
    rng = np.random.default_rng(4)
    X = rng.standard_normal((ops.mesh.n_tri, ops.basis.n_gamma, ops.basis.n_phi))
    composed = -ops.apply_divergence(ops.apply_mass_inverse(ops.apply_gradient(X)))
    assert np.allclose(ops.apply_pressure_operator(X), composed, atol=1e-12)
    assert periodic_ops.has_pressure_nullspace


def test_set_dt_scales_operators(periodic_ops):
    rng = np.random.default_rng(5)
    P = rng.standard_normal((periodic_ops.mesh.n_tri, 2, periodic_ops.basis.n_phi))
    g1 = periodic_ops.apply_gradient(P)
    periodic_ops.set_dt(2 * periodic_ops.dt)
    assert np.allclose(periodic_ops.apply_gradient(P), 2 * g1)
    with pytest.raises(AssemblyError):
        periodic_ops.set_dt(0.0)


def test_unconfigured_boundary_tag(square_path):
    with pytest.raises(ConfigError):
        build_ops(square_path, bcs={1: BoundaryCondition('wall')})


def test_operator_dump_and_restore(tmp_path, square_path):
    cache = str(tmp_path / "ops.stdg")
    first = build_ops(square_path, p=1, p_gamma=1, nu=0.01)
    first.dump(cache)
    with open(cache, 'rb') as fh:
        assert fh.readline().startswith(b"STDG-OPS 1")
    again = ElementOperators(first.mesh, first.basis, first.tables, 0.2, WALL_BCS, 0.01, cache)
    for name in ElementOperators.ARRAY_NAMES:
        assert np.array_equal(getattr(first, name), getattr(again, name))
    # 参数不同时忽略缓存
    other = ElementOperators(first.mesh, first.basis, first.tables, 0.2, WALL_BCS, 0.02, cache)
    assert not np.allclose(other.visc_diag, first.visc_diag)


# --------------------------------------------------------------------------
# 独立积分的对照
# --------------------------------------------------------------------------

def _parallelogram_edges(mesh):
    """对偶单元为平行四边形的内部边，其上速度基函数是多项式"""
    c = mesh.dual_corners
    skew = np.abs(c[:, 0] + c[:, 2] - c[:, 1] - c[:, 3]).max(axis=1)
    return np.flatnonzero(~mesh.is_boundary & (skew < 1e-12))


def _spatial_factors(ops, i, j, order=10):
    """在子三角形 T_{i,j} 与边 Γ_j 上直接积分

    Returns:
        (∫ ψ_k ∇φ_l，∫ ψ_k φ_l n)，形状均为 (N_ψ, N_φ, 2)
    """
    mesh, basis = ops.mesh, ops.basis
    l = int(np.flatnonzero(mesh.tri_edges[i] == j)[0])
    verts = mesh.nodes[mesh.triangles[i]]
    b, va, vc = verts.mean(axis=0), verts[l], verts[(l + 1) % 3]
    tri = quadrature('triangle', order)
    x = b + tri.points[:, :1] * (va - b) + tri.points[:, 1:] * (vc - b)
    w = tri.weights * abs(det2(np.stack([va - b, vc - b], axis=-1)[None]))[0]
    phi, dphi = eval_phi(mesh, basis, np.full(len(x), i), x)
    psi, _ = eval_psi(mesh, basis, np.full(len(x), j), x)
    vol = np.einsum('q,qk,qld->kld', w, psi, dphi)

    line = quadrature('interval', order)
    n1, n2 = mesh.nodes[mesh.edge_nodes[j]]
    xe = n1 + line.points[:, None] * (n2 - n1)
    we = line.weights * np.linalg.norm(n2 - n1)
    phi_e, _ = eval_phi(mesh, basis, np.full(len(xe), i), xe)
    psi_e, _ = eval_psi(mesh, basis, np.full(len(xe), j), xe)
    surf = np.einsum('g,gk,gl,d->kld', we, psi_e, phi_e, mesh.edge_normal[j])
    return vol, surf


def _space_time(factor, p_gamma, dt, order=10):
    """时空张量积点上逐点求积：∫∫ ψ_k γ_a · f_l γ_b，编号 K = a·N + k"""
    rule = quadrature('interval', order)
    g = eval_time_basis(p_gamma, rule.points)
    nk, nl = factor.shape[:2]
    ng = g.shape[1]
    out = np.zeros((ng * nk, ng * nl, 2))
    for wr, gr in zip(dt * rule.weights, g):
        out += wr * np.einsum('a,b,kld->akbld', gr, gr, factor).reshape(ng * nk, ng * nl, 2)
    return out


def test_continuity_operators_against_space_time_quadrature(square_path):
    ops = build_ops(square_path, p=2, p_gamma=1, dt=0.37)
    mesh = ops.mesh
    cells = set(_parallelogram_edges(mesh).tolist())
    candidates = [i for i in range(mesh.n_tri) if cells.issuperset(mesh.tri_edges[i].tolist())]
    assert candidates
    i = int(np.random.default_rng(11).choice(candidates))
    for l, block in enumerate(assemble_continuity_operators(ops, i)):
        j = int(mesh.tri_edges[i, l])
        vol, surf = _spatial_factors(ops, i, j)
        sigma = mesh.sigma(i, j)
        q = _space_time(vol - sigma * surf, 1, 0.37)
        assert np.allclose(block, -np.transpose(q, (1, 0, 2)), atol=1e-12)


def test_left_right_operators_from_surface_and_volume(square_path):
    ops = build_ops(square_path, p=1, p_gamma=2, dt=0.3)
    mesh = ops.mesh
    for j in _parallelogram_edges(mesh)[:4]:
        eo = assemble_edge_operators(ops, int(j))
        vol_l, surf_l = _spatial_factors(ops, int(mesh.edge_left[j]), int(j))
        vol_r, surf_r = _spatial_factors(ops, int(mesh.edge_right[j]), int(j))
        L = _space_time(surf_l - vol_l, 2, 0.3)
        R = _space_time(surf_r + vol_r, 2, 0.3)
        assert np.allclose(eo.Q_left, -L, atol=1e-12)
        assert np.allclose(eo.Q_right, R, atol=1e-12)


def test_lowest_order_pressure_operator(two_triangles_path):
    dt = 0.5
    ops = build_ops(two_triangles_path, p=0, p_gamma=0, dt=dt)
    mesh = ops.mesh
    dense = np.column_stack([ops.apply_pressure_operator(e.reshape(2, 1, 1)).ravel() for e in np.eye(2)])
    # 壁面边不贡献面积分；内部对角边 |Γ|²/area(R) = 2/(1/3)
    assert np.allclose(dense, 6 * dt ** 2 * np.array([[1.0, -1.0], [-1.0, 1.0]]), atol=1e-12)

    composed = np.zeros((2, 2))
    for j in range(mesh.n_edges):
        eo = assemble_edge_operators(ops, j)
        owners = [(int(mesh.edge_left[j]), eo.Q_left)]
        if eo.Q_right is not None:
            owners.append((int(mesh.edge_right[j]), eo.Q_right))
        for i, _ in owners:
            D = assemble_continuity_operators(ops, i)[int(np.flatnonzero(mesh.tri_edges[i] == j)[0])]
            for k, Q in owners:
                composed[i, k] -= np.einsum('kmd,mn,nld->', D, eo.Minv, Q)
    assert np.allclose(composed, dense, atol=1e-12)


def test_linear_triangle_mass_matrix(two_triangles_path):
    rule = quadrature('triangle', 4)
    phi = eval_tri_basis(1, rule.points)
    mass = np.einsum('q,qk,ql->kl', rule.weights, phi, phi)
    expected = np.full((3, 3), 1.0 / 24.0) + np.eye(3) / 24.0
    assert np.allclose(mass, expected, atol=1e-14)

    # 面积 1/2 的直边三角形与参考三角形的质量矩阵相同
    ops = build_ops(two_triangles_path, p=1, p_gamma=0)
    assert np.allclose(ops.mesh.tri_area, 0.5)
    assert np.allclose(pressure_mass(ops), expected, atol=1e-14)


def test_bilinear_basis_at_square_center():
    assert np.allclose(eval_quad_basis(1, np.array([0.5, 0.5])), 0.25, atol=1e-15)
    assert np.allclose(eval_quad_basis(1, np.array([0.0, 0.0])), [1.0, 0.0, 0.0, 0.0])


def test_quadratic_time_mass_matrix():
    tm = build_temporal_matrices(2)
    # Gauss-Legendre 节点上的 Lagrange 基：三点 Gauss 规则对乘积精确，Mt = diag(5/18, 4/9, 5/18)
    assert np.allclose(tm.Mt, np.diag([5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0]), atol=1e-13)
    # 用多项式系数逐项积分再核对一遍
    P = np.polynomial.Polynomial
    nodes = time_nodes(2)
    lag = []
    for k, xk in enumerate(nodes):
        others = np.delete(nodes, k)
        lag.append(P.fromroots(others) / np.prod(xk - others))
    exact = np.array([[(a * b).integ()(1.0) - (a * b).integ()(0.0) for b in lag] for a in lag])
    stiff = np.array([[(a.deriv() * b).integ()(1.0) - (a.deriv() * b).integ()(0.0) for b in lag] for a in lag])
    assert np.allclose(tm.Mt, exact, atol=1e-13)
    assert np.allclose(tm.Dt, stiff, atol=1e-12)
