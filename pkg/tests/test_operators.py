"""
数值通量、对流残差、边界数据与投影
"""
import math

import numpy as np
import pytest

from stdg.core.assembly import BoundaryCondition
from stdg.core.operators import (
    BoundaryData, FieldState, PhysicsParams, convective_residual, evaluate_pressure, evaluate_velocity,
    project_pressure, project_velocity, rusanov_flux, slab_forcing,
)
from stdg.utils.errors import CaseError, ConfigError
from tests.conftest import PERIODIC_BCS, build_ops


def test_flux_consistency():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((6, 2))
    grad = rng.standard_normal((6, 2, 2))
    n = rng.standard_normal((6, 2))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    flux = rusanov_flux(v, v, grad, grad, n, nu=0.3, p=2)
    expected = v * np.sum(v * n, axis=1, keepdims=True) - 0.3 * np.einsum('kde,ke->kd', grad, n)
    assert np.allclose(flux, expected)


def test_flux_antisymmetry():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 5, 2))
    ga, gb = rng.standard_normal((2, 5, 2, 2))
    n = np.array([0.6, 0.8])
    forward = rusanov_flux(a, b, ga, gb, n, nu=0.05, h_minus=0.1, h_plus=0.2, p=1)
    backward = rusanov_flux(b, a, gb, ga, -n, nu=0.05, h_minus=0.2, h_plus=0.1, p=1)
    assert np.allclose(forward, -backward)


def test_flux_dissipation_coefficient():
    n = np.array([1.0, 0.0])
    vm, vp = np.array([1.0, 0.0]), np.array([3.0, 0.0])
    flux = rusanov_flux(vm, vp, None, None, n)
    # 中心通量 (1 + 9)/2，耗散 −½·2·3·(3 − 1)
    assert np.isclose(flux[0], 5.0 - 6.0)


def _uniform_state(ops, u=(0.8, -0.4), dt=0.05):
    state = FieldState.zeros(ops.mesh, ops.basis, dt=dt)
    state.v[:, 0] = u[0]
    state.v[:, 1] = u[1]
    return state


def test_free_stream_convection_periodic(periodic_ops):
    physics = PhysicsParams(nu=0.1)
    bdata = BoundaryData(periodic_ops, physics)
    residual = convective_residual(_uniform_state(periodic_ops), periodic_ops, bdata)
    assert np.abs(residual).max() < 1e-11


def test_free_stream_viscous_operator(periodic_ops):
    V = _uniform_state(periodic_ops).v
    assert np.abs(periodic_ops.apply_viscous(V)).max() < 1e-11


def test_free_stream_with_inflow_boundary(square_path):
    bcs = {1: BoundaryCondition('inflow', 1.0), 2: BoundaryCondition('inflow', 1.0),
           3: BoundaryCondition('inflow', 1.0), 4: BoundaryCondition('inflow', 1.0)}
    ops = build_ops(square_path, p=2, p_gamma=1, bcs=bcs, dt=0.05)
    physics = PhysicsParams(nu=0.0)
    bdata = BoundaryData(ops, physics)
    residual = convective_residual(_uniform_state(ops, (1.0, 0.0)), ops, bdata)
    assert np.abs(residual).max() < 1e-11


def test_boundary_data_requires_exact_solution(square_path):
    bcs = {t: BoundaryCondition('pressure') for t in (1, 2, 3, 4)}
    ops = build_ops(square_path, bcs=bcs)
    with pytest.raises(CaseError):
        BoundaryData(ops, PhysicsParams(nu=0.0))


def test_boundary_data_values(square_path):
    bcs = {1: BoundaryCondition('wall'), 2: BoundaryCondition('outflow', 0.5),
           3: BoundaryCondition('lid', 2.0), 4: BoundaryCondition('wall')}
    ops = build_ops(square_path, bcs=bcs)
    bdata = BoundaryData(ops, PhysicsParams(nu=0.0))
    tags = ops.mesh.edge_tag[bdata.edges]
    x = ops.tables.edge_x[bdata.edges]
    interior = np.full(x.shape, 7.0)
    vel = bdata.velocity(bdata.edges, x, 0.0, interior)
    assert np.allclose(vel[tags == 3, :, 0], 2.0) and np.allclose(vel[tags == 3, :, 1], 0.0)
    assert np.allclose(vel[tags == 1], 0.0)
    assert np.allclose(vel[tags == 2], 7.0)
    pres = bdata.pressure(bdata.edges, x, 0.0)
    assert np.allclose(pres[tags == 2], 0.5)
    assert set(bdata.pressure_edges) == set(bdata.edges[tags == 2])


def test_projection_reproduces_polynomials(square_path):
    ops = build_ops(square_path, p=2, p_gamma=1)

    def velocity(x, y, t):
        return np.stack([1.0 + x - 2 * y * y, 3.0 * x * y + t], axis=-1)

    def pressure(x, y, t):
        return 2.0 * x * x - y + t

    v = project_velocity(ops, velocity, 0.5)
    p = project_pressure(ops, pressure, 0.5)
    tris, locs = ops.mesh.locate(np.array([[0.13, -0.27], [-0.41, 0.33]]))
    pts = np.array([[0.13, -0.27], [-0.41, 0.33]])
    cells = ops.mesh.tri_edges[tris, locs]
    vel = evaluate_velocity(ops, v, cells, pts + ops.mesh.tri_offsets[tris, locs], 0.3)
    assert np.allclose(vel, velocity(pts[:, 0], pts[:, 1], 0.5), atol=1e-10)
    pres = evaluate_pressure(ops, p, tris, pts, 0.7)
    assert np.allclose(pres, pressure(pts[:, 0], pts[:, 1], 0.5), atol=1e-10)


def test_space_time_projection_is_linear_in_time(square_path):
    ops = build_ops(square_path, p=1, p_gamma=1)
    p = project_pressure(ops, lambda x, y, t: 1.0 + 4.0 * t + 0.0 * x, 0.0, dt=0.5)
    tris = np.array([0, 7])
    pts = ops.mesh.barycenters[tris]
    for tau in (0.0, 0.25, 1.0):
        assert np.allclose(evaluate_pressure(ops, p, tris, pts, tau), 1.0 + 2.0 * tau)


def test_slab_forcing_source_integral(periodic_ops):
    physics = PhysicsParams(nu=0.1, source=lambda x, y, t: np.stack(np.broadcast_arrays(1.0 + 0 * x, 0 * y),
                                                                       axis=-1))
    bdata = BoundaryData(periodic_ops, physics)
    forcing = slab_forcing(periodic_ops, physics, bdata, 0.0, 0.2)
    # ∫∫ 1 = 面积·Δt
    assert math.isclose(forcing.source[:, 0].sum(), (2 * math.pi) ** 2 * 0.2, rel_tol=1e-10)
    assert np.abs(forcing.source[:, 1]).max() == 0.0
    assert not forcing.continuity_bc.any()


def test_field_state_helpers(periodic_ops):
    state = _uniform_state(periodic_ops)
    state.p[:] = 2.0
    nxt = state.extended(0.1, keep_pressure=True)
    assert nxt.t == pytest.approx(state.t + state.dt)
    assert np.allclose(nxt.p, 2.0) and np.allclose(nxt.v[:, 0], 0.8)
    assert not state.extended(0.1).p.any()
    state.v[0, 0, 0, 0] = np.nan
    assert not state.is_finite()


def test_negative_viscosity_rejected():
    with pytest.raises(ConfigError):
        PhysicsParams(nu=-1.0)
