"""
非线性对流扩散算子与动量预测步

速度系数 v 的形状为 (N_j, 2, N_γ, N_ψ)，压力系数 p 的形状为 (N_i, N_γ, N_φ)。
对流项显式（取第 k 次 Picard 迭代的速度），粘性项隐式（每个速度分量一个
五点块系统，用 GMRES 求解）。
"""
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from stdg.core.assembly import ElementOperators, eval_phi, eval_psi
from stdg.core.basis import eval_time_basis, quadrature
from stdg.core.linsolve import KrylovConfig, gmres
from stdg.utils.errors import CaseError, ConfigError, MeshTopologyError
from stdg.utils.logging_utils import get_logger

logger = get_logger("stdg.operators")

PENALTY_FACTOR = 1.0 / np.sqrt(np.pi / 2.0)


# --------------------------------------------------------------------------
# 状态与物理参数
# --------------------------------------------------------------------------

@dataclass
class FieldState:
    """一个时间层 [t, t+dt] 上的全部自由度"""
    p: np.ndarray
    v: np.ndarray
    t: float = 0.0
    dt: float = 0.0

    @classmethod
    def zeros(cls, mesh, basis, t=0.0, dt=0.0):
        return cls(np.zeros((mesh.n_tri, basis.n_gamma, basis.n_phi)),
                   np.zeros((mesh.n_edges, 2, basis.n_gamma, basis.n_psi)), t, dt)

    def copy(self):
        return replace(self, p=self.p.copy(), v=self.v.copy())

    def velocity_at(self, tau):
        """时间层内 τ 处的空间系数 (N_j, 2, N_ψ)"""
        g = eval_time_basis(self.v.shape[2] - 1, np.asarray(tau, dtype=float))
        return np.einsum('b,jdbm->jdm', g, self.v)

    def pressure_at(self, tau):
        g = eval_time_basis(self.p.shape[1] - 1, np.asarray(tau, dtype=float))
        return np.einsum('b,ibm->im', g, self.p)

    def extended(self, dt, keep_pressure=False):
        """下一时间层的初值：速度取本层末端值的常数延拓"""
        n_gamma = self.v.shape[2]
        v_end = self.velocity_at(1.0)
        v = np.repeat(v_end[:, :, None, :], n_gamma, axis=2)
        if keep_pressure:
            p = np.repeat(self.pressure_at(1.0)[:, None, :], n_gamma, axis=1)
        else:
            p = np.zeros_like(self.p)
        return FieldState(p, v, self.t + self.dt, dt)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.p)))


@dataclass
class PhysicsParams:
    """运动粘度与算例提供的函数

    source(x, y, t)          动量源项，返回 (..., 2)
    exact_velocity(x, y, t)  精确速度，dirichlet / pressure 边界使用
    exact_pressure(x, y, t)  精确压力，pressure 边界使用
    """
    nu: float
    source: Optional[Callable] = None
    exact_velocity: Optional[Callable] = None
    exact_pressure: Optional[Callable] = None
    convection: bool = True

    def __post_init__(self):
        if self.nu < 0:
            raise ConfigError(f"运动粘度不能为负: {self.nu}")


# --------------------------------------------------------------------------
# 数值通量
# --------------------------------------------------------------------------

def rusanov_flux(v_minus, v_plus, grad_minus, grad_plus, n, nu=0.0, h_minus=1.0, h_plus=1.0, p=0):
    """Rusanov 对流扩散通量 G·n

    F(v, ∇v) = v⊗v − ν∇v，grad[..., d, e] = ∂v_d/∂x_e。全部参数可带前导维。
    s = 2·max(|v⁻·n|, |v⁺·n|) + (2ν/(h⁺+h⁻))·(2p+1)/√(π/2)
    """
    v_minus = np.asarray(v_minus, dtype=float)
    v_plus = np.asarray(v_plus, dtype=float)
    n = np.asarray(n, dtype=float)
    un_minus = np.sum(v_minus * n, axis=-1)
    un_plus = np.sum(v_plus * n, axis=-1)
    flux = 0.5 * (v_minus * un_minus[..., None] + v_plus * un_plus[..., None])
    s = 2.0 * np.maximum(np.abs(un_minus), np.abs(un_plus))
    if nu > 0:
        gm = np.asarray(grad_minus, dtype=float)
        gp = np.asarray(grad_plus, dtype=float)
        flux = flux - 0.5 * nu * np.einsum('...de,...e->...d', gm + gp, n)
        s = s + 2.0 * nu / (np.asarray(h_plus) + np.asarray(h_minus)) * (2 * p + 1) * PENALTY_FACTOR
    return flux - 0.5 * np.asarray(s)[..., None] * (v_plus - v_minus)


def _convective_flux(v_minus, v_plus, n):
    return rusanov_flux(v_minus, v_plus, None, None, n)


# --------------------------------------------------------------------------
# 边界数据
# --------------------------------------------------------------------------

class BoundaryData:
    """按边界条件类型给出边界积分点上的外侧速度与压力"""

    def __init__(self, ops: ElementOperators, physics: PhysicsParams):
        self.ops = ops
        self.physics = physics
        mesh = ops.mesh
        self.edges = np.flatnonzero(mesh.is_boundary)
        self.kind = {int(j): ops.bc_of_edge[int(j)] for j in self.edges}
        self.velocity_edges = self.edges[ops.edge_category[self.edges] == 1]
        self.pressure_edges = self.edges[ops.edge_category[self.edges] == 2]
        self.penalty_edges = self.edges[ops.boundary_penalty[self.edges] > 0]
        for bc in set(self.kind.values()):
            if bc.kind in ('dirichlet', 'pressure') and physics.exact_velocity is None:
                raise CaseError(f"边界条件 {bc.kind} 需要算例提供精确速度")
            if bc.kind == 'pressure' and physics.exact_pressure is None:
                raise CaseError("边界条件 pressure 需要算例提供精确压力")

    def _groups(self, edges):
        kinds = np.array([self.kind[int(j)].kind for j in edges])
        values = [self.kind[int(j)].value for j in edges]
        for kind in np.unique(kinds):
            mask = kinds == kind
            yield kind, mask, np.array([values[k] for k in np.flatnonzero(mask)], dtype=float)

    def velocity(self, edges, x, t, interior=None):
        """外侧速度，x 形状 (n, G, 2)，t 为标量；outflow 返回内侧迹"""
        out = np.zeros(x.shape)
        for kind, mask, values in self._groups(edges):
            if kind in ('lid', 'inflow'):
                out[mask, ..., 0] = values.reshape((-1,) + (1,) * (x.ndim - 2))
            elif kind in ('dirichlet', 'pressure'):
                xm = x[mask]
                out[mask] = self.physics.exact_velocity(xm[..., 0], xm[..., 1], t)
            elif kind == 'outflow':
                if interior is None:
                    raise CaseError("透射边界需要内侧速度")
                out[mask] = interior[mask]
        return out

    def max_speed(self, t):
        """非透射边界积分点上的最大外侧速度，用于静止初值时的步长"""
        keep = np.array([self.kind[int(j)].kind != 'outflow' for j in self.edges], dtype=bool)
        edges = self.edges[keep]
        if edges.size == 0:
            return 0.0
        v = self.velocity(edges, self.ops.tables.edge_x[edges], t)
        return float(np.sqrt((v ** 2).sum(axis=-1)).max(initial=0.0))

    def pressure(self, edges, x, t):
        out = np.zeros(x.shape[:-1])
        for kind, mask, values in self._groups(edges):
            if kind == 'pressure':
                xm = x[mask]
                out[mask] = self.physics.exact_pressure(xm[..., 0], xm[..., 1], t)
            elif kind == 'outflow':
                out[mask] = values.reshape((-1,) + (1,) * (x.ndim - 2))
        return out


def _time_rule(ops, dt):
    rule = quadrature('interval', ops.basis.nonlinear_time_order)
    g = eval_time_basis(ops.basis.p_gamma, rule.points)
    return rule.points, rule.weights * dt, g


# --------------------------------------------------------------------------
# 对流残差
# --------------------------------------------------------------------------

def convective_residual(state: FieldState, ops: ElementOperators, bdata: BoundaryData):
    """Υ_conv = ∮ ψ G_c·n − ∫ ∇ψ·F_c，返回 (N_j, 2, N_γ, N_ψ)"""
    mesh, tb = ops.mesh, ops.tables
    V = state.v
    if V.shape[0] != mesh.n_edges:
        raise MeshTopologyError(f"速度自由度数 {V.shape[0]} 与对偶单元数 {mesh.n_edges} 不一致")
    taus, wt, g = _time_rule(ops, state.dt)
    out = np.zeros_like(V)

    # 体积分
    vel = np.einsum('tb,ildbm,ilqm->iltqd', g, V[mesh.tri_edges], tb.sub_psi, optimize=True)
    vol = np.einsum('t,ta,ilq,ilqke,iltqe,iltqd->ildak', wt, g, tb.sub_w, tb.sub_dpsi, vel, vel,
                    optimize=True)
    np.add.at(out, mesh.tri_edges.ravel(), -vol.reshape((-1,) + V.shape[1:]))

    # 三角形内部的对偶面
    faces = tb.faces
    va = np.einsum('tb,fdbm,fgm->ftgd', g, V[faces['cell_a']], tb.face_psi_a, optimize=True)
    vb = np.einsum('tb,fdbm,fgm->ftgd', g, V[faces['cell_b']], tb.face_psi_b, optimize=True)
    flux = _convective_flux(va, vb, tb.face_n[:, None])
    fa = np.einsum('t,ta,fg,fgk,ftgd->fdak', wt, g, tb.face_w, tb.face_psi_a, flux, optimize=True)
    fb = np.einsum('t,ta,fg,fgk,ftgd->fdak', wt, g, tb.face_w, tb.face_psi_b, flux, optimize=True)
    np.add.at(out, faces['cell_a'], fa)
    np.add.at(out, faces['cell_b'], -fb)

    # 区域边界
    bnd = bdata.edges
    if len(bnd):
        psi = tb.edge_psi[bnd]
        vin = np.einsum('tb,jdbm,jgm->jtgd', g, V[bnd], psi, optimize=True)
        x = tb.edge_x[bnd]
        vout = np.stack([bdata.velocity(bnd, x, state.t + tau * state.dt, vin[:, q])
                         for q, tau in enumerate(taus)], axis=1)
        flux = _convective_flux(vin, vout, tb.edge_n[bnd][:, None])
        out[bnd] += np.einsum('t,ta,jg,jgk,jtgd->jdak', wt, g, tb.edge_w[bnd], psi, flux,
                              optimize=True)
    return out


# --------------------------------------------------------------------------
# 与迭代无关的时间层数据
# --------------------------------------------------------------------------

@dataclass
class SlabForcing:
    """一个时间层内的已知项

    source            ∫∫ γψ S                (N_j,2,N_γ,N_ψ)
    viscous_known     −∫∫ γψ s/2 v_bc        边界罚项中的已知部分
    pressure_bc       ∫∫ γψ p_bc n           压力型边界
    continuity_bc     ∫∫ γφ v_bc·n           速度型边界的连续性通量 (N_i,N_γ,N_φ)
    """
    source: np.ndarray
    viscous_known: np.ndarray
    pressure_bc: np.ndarray
    continuity_bc: np.ndarray


def slab_forcing(ops: ElementOperators, physics: PhysicsParams, bdata: BoundaryData,
                 t: float, dt: float) -> SlabForcing:
    mesh, tb, basis = ops.mesh, ops.tables, ops.basis
    taus, wt, g = _time_rule(ops, dt)
    shape_v = (mesh.n_edges, 2, basis.n_gamma, basis.n_psi)
    source = np.zeros(shape_v)
    known = np.zeros(shape_v)
    pbc = np.zeros(shape_v)
    cont = np.zeros((mesh.n_tri, basis.n_gamma, basis.n_phi))

    if physics.source is not None:
        x = tb.sub_x
        s = np.stack([physics.source(x[..., 0], x[..., 1], t + tau * dt) for tau in taus], axis=2)
        s = np.broadcast_to(s, x.shape[:2] + (len(taus),) + x.shape[2:])
        contrib = np.einsum('t,ta,ilq,ilqk,iltqd->ildak', wt, g, tb.sub_w, tb.sub_psi, s,
                            optimize=True)
        np.add.at(source, mesh.tri_edges.ravel(), contrib.reshape((-1,) + shape_v[1:]))

    def boundary_values(edges, func):
        x = tb.edge_x[edges]
        return np.stack([func(edges, x, t + tau * dt) for tau in taus], axis=1)

    edges = bdata.penalty_edges
    if len(edges):
        vbc = boundary_values(edges, bdata.velocity)
        half_s = 0.5 * ops.boundary_penalty[edges]
        known[edges] = -np.einsum('t,ta,j,jg,jgk,jtgd->jdak', wt, g, half_s, tb.edge_w[edges],
                                  tb.edge_psi[edges], vbc, optimize=True)
    edges = bdata.pressure_edges
    if len(edges):
        p = boundary_values(edges, bdata.pressure)
        pbc[edges] = np.einsum('t,ta,jg,jgk,jtg,jgd->jdak', wt, g, tb.edge_w[edges],
                               tb.edge_psi[edges], p, tb.edge_n[edges], optimize=True)
    edges = bdata.velocity_edges
    if len(edges):
        vbc = boundary_values(edges, bdata.velocity)
        flux = np.einsum('jtgd,jgd->jtg', vbc, tb.edge_n[edges])
        contrib = np.einsum('t,ta,jg,jgm,jtg->jam', wt, g, tb.edge_w[edges],
                            tb.edge_phi_left[edges], flux, optimize=True)
        np.add.at(cont, mesh.edge_left[edges], contrib)
    return SlabForcing(source, known, pbc, cont)


# --------------------------------------------------------------------------
# 动量预测步
# --------------------------------------------------------------------------

@dataclass
class PredictorStats:
    iterations: tuple
    residuals: tuple


def momentum_predictor(v_old: np.ndarray, iterate: FieldState, ops: ElementOperators,
                       physics: PhysicsParams, bdata: BoundaryData, forcing: SlabForcing,
                       krylov: KrylovConfig = None):
    """中间速度 Fv

    (M + Δt·Mt⊗A^s) Fv = M⁻vⁿ − Υ_conv(v^k) − Υ_known − Σ Q p^k − P_bc + S

    以 M⁻¹ 左预处理后逐分量用 GMRES 求解；ν = 0 时直接乘 M⁻¹。
    """
    krylov = krylov or KrylovConfig()
    rhs = ops.apply_mass_minus(v_old) - ops.apply_gradient(iterate.p) - forcing.pressure_bc \
        + forcing.source
    if physics.convection:
        rhs -= convective_residual(iterate, ops, bdata)
    if physics.nu > 0:
        rhs -= forcing.viscous_known
    rhs = ops.apply_mass_inverse(rhs)
    if physics.nu == 0:
        return rhs, PredictorStats((0, 0), (0.0, 0.0))

    def matvec(x):
        return x + ops.apply_mass_inverse(ops.apply_viscous(x))

    fv = np.empty_like(rhs)
    iters, res = [], []
    for d in range(2):
        result = gmres(matvec, rhs[:, d], x0=iterate.v[:, d], config=krylov, label=f"粘性系统[{d}]")
        fv[:, d] = result.solution
        iters.append(result.iterations)
        res.append(result.residual)
    return fv, PredictorStats(tuple(iters), tuple(res))


# --------------------------------------------------------------------------
# 投影与取值
# --------------------------------------------------------------------------

def pressure_mass(ops: ElementOperators):
    """三角形压力质量矩阵 (N_i, N_φ, N_φ)"""
    tb = ops.tables
    return np.einsum('ilq,ilqk,ilqm->ikm', tb.sub_w, tb.sub_phi, tb.sub_phi)


def _sample_fields(ops, fn, t, dt):
    """fn 在子三角形积分点上的取值；dt 为空时只取 t 时刻"""
    x = ops.tables.sub_x
    if not dt:
        return np.asarray(fn(x[..., 0], x[..., 1], t), dtype=float), None, None
    taus, wt, g = _time_rule(ops, 1.0)
    vals = np.stack([np.asarray(fn(x[..., 0], x[..., 1], t + tau * dt), dtype=float)
                     for tau in taus], axis=2)
    return vals, wt, g


def project_velocity(ops: ElementOperators, fn, t, dt=None):
    """速度场的 L2 投影；dt 为空时得到时间上常数的系数"""
    mesh, tb = ops.mesh, ops.tables
    vals, wt, g = _sample_fields(ops, fn, t, dt)
    n_gamma = ops.basis.n_gamma
    if wt is None:
        rhs = np.einsum('ilq,ilqk,ilqd->ildk', tb.sub_w, tb.sub_psi, vals)
        acc = np.zeros((mesh.n_edges, 2, ops.basis.n_psi))
        np.add.at(acc, mesh.tri_edges.ravel(), rhs.reshape(-1, 2, ops.basis.n_psi))
        coeff = np.einsum('jkm,jdm->jdk', ops.Ms_inv, acc)
        return np.repeat(coeff[:, :, None, :], n_gamma, axis=2)
    rhs = np.einsum('t,ta,ilq,ilqk,iltqd->ildak', wt, g, tb.sub_w, tb.sub_psi, vals, optimize=True)
    acc = np.zeros((mesh.n_edges, 2, n_gamma, ops.basis.n_psi))
    np.add.at(acc, mesh.tri_edges.ravel(), rhs.reshape((-1,) + acc.shape[1:]))
    mt_inv = np.linalg.inv(ops.temporal.Mt)
    return np.einsum('ab,jdbm,jkm->jdak', mt_inv, acc, ops.Ms_inv)


def project_pressure(ops: ElementOperators, fn, t, dt=None):
    mesh, tb = ops.mesh, ops.tables
    vals, wt, g = _sample_fields(ops, fn, t, dt)
    mp_inv = np.linalg.inv(pressure_mass(ops))
    n_gamma = ops.basis.n_gamma
    if wt is None:
        rhs = np.einsum('ilq,ilqk,ilq->ik', tb.sub_w, tb.sub_phi, vals)
        coeff = np.einsum('ikm,im->ik', mp_inv, rhs)
        return np.repeat(coeff[:, None, :], n_gamma, axis=1)
    rhs = np.einsum('t,ta,ilq,ilqk,iltq->iak', wt, g, tb.sub_w, tb.sub_phi, vals, optimize=True)
    mt_inv = np.linalg.inv(ops.temporal.Mt)
    return np.einsum('ab,ibm,ikm->iak', mt_inv, rhs, mp_inv)


def evaluate_velocity(ops: ElementOperators, v, cells, x, tau, with_gradients=False):
    """对偶单元 cells 中物理点 x（边坐标系）处的速度，v 为 (N_j,2,N_γ,N_ψ)"""
    cells = np.asarray(cells, dtype=np.int64)
    values, grads = eval_psi(ops.mesh, ops.basis, cells, np.asarray(x, dtype=float))
    g = eval_time_basis(ops.basis.p_gamma, np.asarray(tau, dtype=float))
    coeff = np.einsum('b,ndbm->ndm', g, v[cells])
    vel = np.einsum('ndm,nm->nd', coeff, values)
    if not with_gradients:
        return vel
    return vel, np.einsum('ndm,nme->nde', coeff, grads)


def evaluate_pressure(ops: ElementOperators, p, tris, x, tau):
    tris = np.asarray(tris, dtype=np.int64)
    values, _ = eval_phi(ops.mesh, ops.basis, tris, np.asarray(x, dtype=float))
    g = eval_time_basis(ops.basis.p_gamma, np.asarray(tau, dtype=float))
    return np.einsum('b,nbm,nm->n', g, p[tris], values)
