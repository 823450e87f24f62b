"""
单元矩阵组装

时空矩阵全部写成 时间因子 ⊗ 空间因子 的形式（层优先编号，数组形状为
(N_γ, N)），只保存空间因子与时间因子，Δt 在使用时乘入。kron(T, S) 作用于
系数矩阵 V 即 T @ V @ S.T。
"""
import io
import json
import os
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import scipy.linalg

from stdg.config.settings import SOLVER_SETTINGS
from stdg.core.basis import SpaceTimeBasis, eval_time_basis, quadrature
from stdg.core.mesh import StaggeredMesh, inv2
from stdg.utils.errors import AssemblyError, ConfigError, SingularMatrixError
from stdg.utils.file_utils import atomic_open
from stdg.utils.logging_utils import get_logger
from stdg.utils.parallel import map_chunks

logger = get_logger("stdg.assembly")

OPS_HEADER = b"STDG-OPS 1\n"
PENALTY_FACTOR = 1.0 / np.sqrt(np.pi / 2.0)


# --------------------------------------------------------------------------
# 边界条件
# --------------------------------------------------------------------------

VELOCITY_KINDS = ('wall', 'lid', 'inflow', 'dirichlet')
PRESSURE_KINDS = ('pressure', 'outflow')


@dataclass(frozen=True)
class BoundaryCondition:
    """边界条件：kind[:value]

    wall          无滑移
    lid / inflow  给定水平速度 (value, 0)
    dirichlet     算例精确速度
    pressure      算例精确压力，外侧速度取精确解
    outflow       给定压力 value（默认 0），速度透射
    periodic      与 partner 标签周期相连
    """
    kind: str
    value: Optional[float] = None
    partner: Optional[int] = None

    @property
    def category(self):
        if self.kind in VELOCITY_KINDS:
            return 'velocity'
        if self.kind in PRESSURE_KINDS:
            return 'pressure'
        return 'periodic'

    @property
    def transmissive(self):
        return self.kind == 'outflow'


def parse_boundary_condition(text: str) -> BoundaryCondition:
    """解析 'kind[:params]' 形式的边界条件"""
    kind, _, param = text.strip().partition(':')
    kind = kind.strip().lower()
    param = param.strip()
    if kind not in VELOCITY_KINDS + PRESSURE_KINDS + ('periodic',):
        raise ConfigError(f"未知边界条件类型: {kind}")
    try:
        if kind == 'periodic':
            if not param:
                raise ConfigError("periodic 边界需要指定配对标签")
            return BoundaryCondition(kind, partner=int(param))
        if kind in ('lid', 'inflow'):
            return BoundaryCondition(kind, float(param) if param else 1.0)
        if kind == 'outflow':
            return BoundaryCondition(kind, float(param) if param else 0.0)
    except ValueError:
        raise ConfigError(f"边界条件参数不是数值: {text}")
    if param:
        raise ConfigError(f"边界条件 {kind} 不接受参数")
    return BoundaryCondition(kind)


def periodic_pairs(bcs: Dict[int, BoundaryCondition]):
    """从边界条件表中取出周期标签对（去重）"""
    pairs = []
    for tag, bc in sorted(bcs.items()):
        if bc.kind != 'periodic':
            continue
        other = bcs.get(bc.partner)
        if other is None or other.kind != 'periodic' or other.partner != tag:
            raise ConfigError(f"周期边界 {tag}<->{bc.partner} 必须双向声明")
        if tag < bc.partner:
            pairs.append((tag, bc.partner))
    return pairs


# --------------------------------------------------------------------------
# 时间矩阵
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TemporalMatrices:
    Mt: np.ndarray
    Dt: np.ndarray
    gamma_at_0: np.ndarray
    gamma_at_1: np.ndarray

    @property
    def update(self):
        """M = M⁺ − M° 的时间因子 γ(1)γ(1)ᵀ − Dt"""
        return np.outer(self.gamma_at_1, self.gamma_at_1) - self.Dt

    @property
    def plus(self):
        return np.outer(self.gamma_at_1, self.gamma_at_1)

    @property
    def minus(self):
        """M⁻ 的时间因子：检验函数取新时间层起点，旧解取旧时间层终点"""
        return np.outer(self.gamma_at_0, self.gamma_at_1)


def build_temporal_matrices(p_gamma: int) -> TemporalMatrices:
    """时间质量矩阵 Mt 与刚度矩阵 Dt(k,l) = ∫ γ_k' γ_l"""
    rule = quadrature('interval', 2 * p_gamma + 2)
    g, dg = eval_time_basis(p_gamma, rule.points, True)
    Mt = np.einsum('q,qk,ql->kl', rule.weights, g, g)
    Dt = np.einsum('q,qk,ql->kl', rule.weights, dg, g)
    g0 = eval_time_basis(p_gamma, np.array(0.0))
    g1 = eval_time_basis(p_gamma, np.array(1.0))
    return TemporalMatrices(Mt, Dt, g0, g1)


def invert_update_matrix(M: np.ndarray) -> np.ndarray:
    """稠密求逆并检查残差 ‖M·Minv − I‖_∞；支持批量 (..., n, n)"""
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    try:
        if M.ndim == 2:
            Minv = scipy.linalg.inv(M)
        else:
            Minv = np.linalg.inv(M)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as e:
        raise SingularMatrixError(f"更新矩阵奇异: {e}")
    eye = np.eye(n)
    residual = np.abs(M @ Minv - eye).sum(axis=-1).max(initial=0.0)
    if not np.isfinite(residual):
        raise SingularMatrixError("更新矩阵求逆结果非有限")
    if residual > SOLVER_SETTINGS['INVERSE_RESIDUAL_TOL']:
        # 一步迭代修正
        Minv = Minv + Minv @ (eye - M @ Minv)
        residual = np.abs(M @ Minv - eye).sum(axis=-1).max(initial=0.0)
        if residual > SOLVER_SETTINGS['INVERSE_RESIDUAL_TOL']:
            raise SingularMatrixError(f"更新矩阵求逆残差过大: {residual:.3e}")
    return Minv


# --------------------------------------------------------------------------
# 物理点处的基函数
# --------------------------------------------------------------------------

def _physical_gradients(grads_ref, J):
    return np.einsum('nkb,nba->nka', grads_ref, inv2(J))


def eval_phi(mesh: StaggeredMesh, basis: SpaceTimeBasis, tris, x):
    """三角形 tris 的压力基函数在物理点 x（三角形坐标系）处的值与梯度"""
    ref = mesh.tri_inverse(tris, x)
    values, grads = basis.phi(ref, True)
    _, J = mesh.tri_map(tris, ref)
    return values, _physical_gradients(grads, J)


def eval_psi(mesh: StaggeredMesh, basis: SpaceTimeBasis, cells, x):
    """对偶单元 cells 的速度基函数在物理点 x（边坐标系）处的值与梯度"""
    ref = mesh.dual_inverse(cells, x)
    values, grads = basis.psi(ref, True)
    _, J = mesh.dual_map(cells, ref)
    return values, _physical_gradients(grads, J)


def _chunked_eval(func, mesh, basis, elems, x, threads=None):
    """并行分块求值，结果按原顺序拼接"""
    def work(a, b):
        return func(mesh, basis, elems[a:b], x[a:b])
    parts = map_chunks(work, len(elems), threads)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


class ElementTables:
    """积分点处的基函数值表

    sub_*   子三角形 T_{i,l}：(N_i,3,Q,...)
    edge_*  边 Γ_j：(N_j,G,...)
    face_*  三角形内部对偶面：(N_i*3,G,...)
    """

    def __init__(self, mesh: StaggeredMesh, basis: SpaceTimeBasis, threads: int = None):
        self.mesh = mesh
        self.basis = basis
        order = basis.space_order
        ni, nphi, npsi = mesh.n_tri, basis.n_phi, basis.n_psi

        sub = mesh.sub_tri_quadrature(order)
        q = sub.weights.shape[-1]
        self.sub_x = sub.points
        self.sub_w = sub.weights
        x = sub.points.reshape(-1, 2)
        tris = np.repeat(np.arange(ni), 3 * q)
        cells = np.repeat(mesh.tri_edges.ravel(), q)
        xe = x + np.repeat(mesh.tri_offsets.reshape(-1, 2), q, axis=0)
        phi, dphi = _chunked_eval(eval_phi, mesh, basis, tris, x, threads)
        psi, dpsi = _chunked_eval(eval_psi, mesh, basis, cells, xe, threads)
        self.sub_phi = phi.reshape(ni, 3, q, nphi)
        self.sub_dphi = dphi.reshape(ni, 3, q, nphi, 2)
        self.sub_psi = psi.reshape(ni, 3, q, npsi)
        self.sub_dpsi = dpsi.reshape(ni, 3, q, npsi, 2)

        eq = mesh.edge_quadrature(order)
        nj, g = eq.weights.shape
        self.edge_x = eq.points
        self.edge_w = eq.weights
        self.edge_n = eq.normals
        xe = eq.points.reshape(-1, 2)
        cells = np.repeat(np.arange(nj), g)
        psi, dpsi = _chunked_eval(eval_psi, mesh, basis, cells, xe, threads)
        self.edge_psi = psi.reshape(nj, g, npsi)
        self.edge_dpsi = dpsi.reshape(nj, g, npsi, 2)
        left = np.repeat(mesh.edge_left, g)
        phi_l, _ = _chunked_eval(eval_phi, mesh, basis, left, xe, threads)
        self.edge_phi_left = phi_l.reshape(nj, g, nphi)
        self.edge_phi_right = np.zeros((nj, g, nphi))
        inner = np.flatnonzero(~mesh.is_boundary)
        if len(inner):
            right = np.repeat(mesh.edge_right[inner], g)
            off = np.repeat(mesh.tri_offsets[mesh.edge_right[inner], mesh.edge_local[inner, 1]], g, axis=0)
            xr = eq.points[inner].reshape(-1, 2) - off
            phi_r, _ = _chunked_eval(eval_phi, mesh, basis, right, xr, threads)
            self.edge_phi_right[inner] = phi_r.reshape(len(inner), g, nphi)

        faces = mesh.dual_faces()
        fq = mesh.face_quadrature(order)
        nf = len(faces['tri'])
        self.faces = faces
        self.face_w = fq.weights
        self.face_n = fq.normals
        self.face_x = fq.points
        x = fq.points.reshape(-1, 2)
        tri_f = faces['tri']
        for side in ('a', 'b'):
            local = faces[f'local_{side}']
            cells = np.repeat(faces[f'cell_{side}'], g)
            off = np.repeat(mesh.tri_offsets[tri_f, local], g, axis=0)
            psi, dpsi = _chunked_eval(eval_psi, mesh, basis, cells, x + off, threads)
            setattr(self, f'face_psi_{side}', psi.reshape(nf, g, npsi))
            setattr(self, f'face_dpsi_{side}', dpsi.reshape(nf, g, npsi, 2))
        logger.info(f"积分表构造完成: 子三角形点数={q}, 边点数={g}")


# --------------------------------------------------------------------------
# 单元算子
# --------------------------------------------------------------------------

@dataclass
class EdgeOperators:
    """单条边 j 的稠密时空矩阵（用于检查与小规模直接组装）"""
    Mplus: np.ndarray
    Mminus: np.ndarray
    Mcirc: np.ndarray
    M: np.ndarray
    Minv: np.ndarray
    Q_left: np.ndarray            # (N_ψ_st, N_φ_st, 2)
    Q_right: Optional[np.ndarray]


class ElementOperators:
    """全部预计算的空间因子与时间因子

    Ms / Ms_inv     (N_j,N_ψ,N_ψ)
    Qs              (N_i,3,N_ψ,N_φ,2)   Q_{i,j} 的空间因子，D_{i,j} = -Q_{i,j}ᵀ
    B_diag / B_off  (N_i,N_φ,N_φ) / (N_i,3,N_φ,N_φ)  Σ Qᵀ Ms⁻¹ Q 的四点块
    visc_diag       (N_j,N_ψ,N_ψ)        粘性五点块对角
    visc_ab/visc_ba (N_f,N_ψ,N_ψ)        对偶面耦合块
    edge_category   0 内部，1 速度型边界，2 压力型边界
    """

    ARRAY_NAMES = ('Ms', 'Ms_inv', 'Qs', 'B_diag', 'B_off', 'visc_diag', 'visc_ab', 'visc_ba',
                   'boundary_penalty', 'edge_category', 'edge_transmissive')

    def __init__(self, mesh: StaggeredMesh, basis: SpaceTimeBasis, tables: ElementTables,
                 dt: float, bcs: Dict[int, BoundaryCondition], nu: float,
                 cache_path: str = None):
        if dt <= 0:
            raise AssemblyError(f"时间步长必须为正: {dt}")
        self.mesh = mesh
        self.basis = basis
        self.tables = tables
        self.dt = float(dt)
        self.nu = float(nu)
        self.bcs = dict(bcs)
        self.temporal = build_temporal_matrices(basis.p_gamma)
        self.T = self.temporal.update
        self.T_inv = invert_update_matrix(self.T)
        self.C = self.temporal.Mt @ self.T_inv @ self.temporal.Mt
        self.bc_of_edge = self._classify_edges()

        if cache_path and os.path.exists(cache_path) and self._restore(cache_path):
            logger.info(f"从缓存恢复单元算子: {cache_path}")
        else:
            self._assemble()
            if cache_path:
                self.dump(cache_path)

    # ---------------- 分类 ----------------

    def _classify_edges(self):
        mesh = self.mesh
        nj = mesh.n_edges
        self.edge_category = np.zeros(nj, dtype=np.int64)
        self.edge_transmissive = np.zeros(nj, dtype=bool)
        bc_of_edge = {}
        for j in np.flatnonzero(mesh.is_boundary):
            tag = int(mesh.edge_tag[j])
            bc = self.bcs.get(tag)
            if bc is None:
                raise ConfigError(f"边界标签 {tag} 未配置边界条件")
            if bc.category == 'periodic':
                raise ConfigError(f"边界标签 {tag} 声明为周期边界，但网格中未完成配对")
            self.edge_category[j] = 1 if bc.category == 'velocity' else 2
            self.edge_transmissive[j] = bc.transmissive
            bc_of_edge[int(j)] = bc
        return bc_of_edge

    @property
    def has_pressure_nullspace(self):
        """没有压力型边界时压力只确定到一个常数"""
        return not np.any(self.edge_category == 2)

    # ---------------- 组装 ----------------

    def _assemble(self):
        mesh, tb = self.mesh, self.tables
        nj, ni = mesh.n_edges, mesh.n_tri
        npsi, nphi = self.basis.n_psi, self.basis.n_phi
        w = tb.sub_w

        # 质量矩阵
        Ms_sub = np.einsum('ilq,ilqk,ilqm->ilkm', w, tb.sub_psi, tb.sub_psi)
        self.Ms = np.zeros((nj, npsi, npsi))
        np.add.at(self.Ms, mesh.tri_edges.ravel(), Ms_sub.reshape(-1, npsi, npsi))
        self.Ms_inv = invert_update_matrix(self.Ms)

        # Q 的体积分部分与 Γ_j 面积分部分
        self.Qs = np.einsum('ilq,ilqk,ilqmd->ilkmd', w, tb.sub_psi, tb.sub_dphi)
        surf_l = np.einsum('jg,jgk,jgm,jgd->jkmd', tb.edge_w, tb.edge_psi, tb.edge_phi_left, tb.edge_n)
        surf_r = np.einsum('jg,jgk,jgm,jgd->jkmd', tb.edge_w, tb.edge_psi, tb.edge_phi_right, tb.edge_n)
        with_surface = self.edge_category != 1
        jl = np.flatnonzero(with_surface)
        self.Qs[mesh.edge_left[jl], mesh.edge_local[jl, 0]] -= surf_l[jl]
        inner = np.flatnonzero(~mesh.is_boundary)
        self.Qs[mesh.edge_right[inner], mesh.edge_local[inner, 1]] += surf_r[inner]

        self._assemble_pressure_blocks()
        self._assemble_viscous_blocks()
        logger.info(f"单元算子组装完成: N_ψ={npsi}, N_φ={nphi}, N_γ={self.basis.n_gamma}")

    def _assemble_pressure_blocks(self):
        mesh = self.mesh
        ni, nphi = mesh.n_tri, self.basis.n_phi
        ql = self.Qs[mesh.edge_left, mesh.edge_local[:, 0]]
        minv_ql = np.einsum('jkm,jmnd->jknd', self.Ms_inv, ql)
        self.B_diag = np.zeros((ni, nphi, nphi))
        self.B_off = np.zeros((ni, 3, nphi, nphi))
        np.add.at(self.B_diag, mesh.edge_left, np.einsum('jknd,jkmd->jnm', ql, minv_ql))
        inner = np.flatnonzero(~mesh.is_boundary)
        if len(inner):
            l, r = mesh.edge_left[inner], mesh.edge_right[inner]
            ll, lr = mesh.edge_local[inner, 0], mesh.edge_local[inner, 1]
            qr = self.Qs[r, lr]
            minv_qr = np.einsum('jkm,jmnd->jknd', self.Ms_inv[inner], qr)
            np.add.at(self.B_diag, r, np.einsum('jknd,jkmd->jnm', qr, minv_qr))
            self.B_off[l, ll] = np.einsum('jknd,jkmd->jnm', ql[inner], minv_qr)
            self.B_off[r, lr] = np.einsum('jknd,jkmd->jnm', qr, minv_ql[inner])

    def _assemble_viscous_blocks(self):
        mesh, tb, nu = self.mesh, self.tables, self.nu
        nj, npsi = mesh.n_edges, self.basis.n_psi
        order_factor = (2 * self.basis.p + 1) * PENALTY_FACTOR

        vol = nu * np.einsum('ilq,ilqkd,ilqmd->ilkm', tb.sub_w, tb.sub_dpsi, tb.sub_dpsi)
        self.visc_diag = np.zeros((nj, npsi, npsi))
        np.add.at(self.visc_diag, mesh.tri_edges.ravel(), vol.reshape(-1, npsi, npsi))

        a, b = tb.faces['cell_a'], tb.faces['cell_b']
        s = 2.0 * nu / (mesh.dual_h[a] + mesh.dual_h[b]) * order_factor
        w, n = tb.face_w, tb.face_n
        pa, pb = tb.face_psi_a, tb.face_psi_b
        ga = np.einsum('fgkd,fgd->fgk', tb.face_dpsi_a, n)
        gb = np.einsum('fgkd,fgd->fgk', tb.face_dpsi_b, n)
        trial_a = -0.5 * nu * ga + 0.5 * s[:, None, None] * pa
        trial_b = -0.5 * nu * gb - 0.5 * s[:, None, None] * pb
        A_aa = np.einsum('fg,fgk,fgm->fkm', w, pa, trial_a)
        self.visc_ab = np.einsum('fg,fgk,fgm->fkm', w, pa, trial_b)
        self.visc_ba = -np.einsum('fg,fgk,fgm->fkm', w, pb, trial_a)
        A_bb = -np.einsum('fg,fgk,fgm->fkm', w, pb, trial_b)
        np.add.at(self.visc_diag, a, A_aa)
        np.add.at(self.visc_diag, b, A_bb)

        # 区域边界面
        self.boundary_penalty = np.zeros(nj)
        bnd = np.flatnonzero(mesh.is_boundary)
        if len(bnd):
            dirichlet = bnd[~self.edge_transmissive[bnd]]
            self.boundary_penalty[dirichlet] = nu / mesh.dual_h[dirichlet] * order_factor
            psi = tb.edge_psi[bnd]
            dn = np.einsum('jgkd,jgd->jgk', tb.edge_dpsi[bnd], tb.edge_n[bnd])
            trial = -nu * dn + 0.5 * self.boundary_penalty[bnd][:, None, None] * psi
            self.visc_diag[bnd] += np.einsum('jg,jgk,jgm->jkm', tb.edge_w[bnd], psi, trial)

    # ---------------- 作用于系数 ----------------

    def apply_mass(self, V):
        """M V，V 形状 (N_j, [2,] N_γ, N_ψ)"""
        return np.einsum('ab,j...bm,jkm->j...ak', self.T, V, self.Ms)

    def apply_mass_minus(self, V_old):
        return np.einsum('ab,j...bm,jkm->j...ak', self.temporal.minus, V_old, self.Ms)

    def apply_mass_inverse(self, R):
        return np.einsum('ab,j...bm,jkm->j...ak', self.T_inv, R, self.Ms_inv)

    def apply_viscous(self, V):
        """Δt·kron(Mt, A^s) V，逐速度分量作用"""
        faces = self.tables.faces
        Y = np.einsum('j...bm,jkm->j...bk', V, self.visc_diag)
        np.add.at(Y, faces['cell_a'], np.einsum('f...bm,fkm->f...bk', V[faces['cell_b']], self.visc_ab))
        np.add.at(Y, faces['cell_b'], np.einsum('f...bm,fkm->f...bk', V[faces['cell_a']], self.visc_ba))
        return self.dt * np.einsum('ab,j...bk->j...ak', self.temporal.Mt, Y)

    def apply_gradient(self, P):
        """Σ_i Q_{i,j} P_i：P 形状 (N_i, N_γ, N_φ)，返回 (N_j, 2, N_γ, N_ψ)"""
        mesh = self.mesh
        contrib = np.einsum('ibn,ilmnd->ildbm', P, self.Qs)
        out = np.zeros((mesh.n_edges, 2) + P.shape[1:2] + (self.basis.n_psi,))
        np.add.at(out, mesh.tri_edges.ravel(), contrib.reshape((-1,) + out.shape[1:]))
        return self.dt * np.einsum('ab,jdbm->jdam', self.temporal.Mt, out)

    def apply_divergence(self, V):
        """Σ_j D_{i,j} V_j：V 形状 (N_j, 2, N_γ, N_ψ)，返回 (N_i, N_γ, N_φ)"""
        Vt = V[self.mesh.tri_edges]                     # (N_i,3,2,N_γ,N_ψ)
        div = -np.einsum('ildbm,ilmnd->ibn', Vt, self.Qs)
        return self.dt * np.einsum('ab,ibn->ian', self.temporal.Mt, div)

    def apply_pressure_operator(self, X):
        """Δt²·kron(C, Σ Qᵀ Ms⁻¹ Q) X，X 形状 (N_i, N_γ, N_φ)"""
        nb = self.mesh.tri_neighbors
        Z = np.einsum('ibn,imn->ibm', X, self.B_diag)
        has = nb >= 0
        i_idx, l_idx = np.nonzero(has)
        if len(i_idx):
            off = np.einsum('fbn,fmn->fbm', X[nb[i_idx, l_idx]], self.B_off[i_idx, l_idx])
            np.add.at(Z, i_idx, off)
        return self.dt ** 2 * np.einsum('ab,ibm->iam', self.C, Z)

    def set_dt(self, dt):
        """更新时间步长；D、Q 随 Δt 线性变化，只保存空间因子因此无需重组"""
        if dt <= 0:
            raise AssemblyError(f"时间步长必须为正: {dt}")
        self.dt = float(dt)

    # ---------------- 稠密视图 ----------------

    def edge_operators(self, j: int) -> EdgeOperators:
        tm = self.temporal
        Ms = self.Ms[j]
        Mplus = np.kron(tm.plus, Ms)
        Mcirc = np.kron(tm.Dt, Ms)
        M = Mplus - Mcirc
        ll = self.mesh.edge_local[j, 0]
        q_left = self._space_time_q(self.Qs[self.mesh.edge_left[j], ll])
        q_right = None
        if not self.mesh.is_boundary[j]:
            q_right = self._space_time_q(self.Qs[self.mesh.edge_right[j], self.mesh.edge_local[j, 1]])
        return EdgeOperators(Mplus, np.kron(tm.minus, Ms), Mcirc, M,
                             np.kron(self.T_inv, self.Ms_inv[j]), q_left, q_right)

    def continuity_operators(self, i: int):
        """三角形 i 的 D_{i,j}（j∈S_i），每个形状 (N_φ_st, N_ψ_st, 2)"""
        return [-np.transpose(self._space_time_q(self.Qs[i, l]), (1, 0, 2)) for l in range(3)]

    def _space_time_q(self, qs):
        return np.stack([self.dt * np.kron(self.temporal.Mt, qs[..., d]) for d in range(2)], axis=-1)

    # ---------------- 缓存 ----------------

    def cache_key(self):
        bcs = {str(k): [v.kind, v.value, v.partner] for k, v in sorted(self.bcs.items())}
        return {'mesh': self.mesh.hash(), 'p': self.basis.p, 'p_gamma': self.basis.p_gamma,
                'nu': self.nu, 'bcs': bcs}

    def dump(self, path):
        """写出 STDG-OPS 1 格式：文件头 + JSON 键 + npz 数据"""
        key = dict(self.cache_key(), dt=self.dt)
        buf = io.BytesIO()
        np.savez(buf, **{name: getattr(self, name) for name in self.ARRAY_NAMES})
        with atomic_open(path, 'wb') as fh:
            fh.write(OPS_HEADER)
            fh.write(json.dumps(key).encode('utf-8') + b"\n")
            fh.write(buf.getvalue())
        logger.info(f"单元算子已写出: {path}")

    def _restore(self, path):
        with open(path, 'rb') as fh:
            if fh.readline() != OPS_HEADER:
                raise AssemblyError(f"算子缓存文件头错误: {path}")
            key = json.loads(fh.readline().decode('utf-8'))
            key.pop('dt', None)
            if key != json.loads(json.dumps(self.cache_key())):
                logger.warning("算子缓存与当前网格/参数不匹配，重新组装")
                return False
            data = np.load(io.BytesIO(fh.read()))
            for name in self.ARRAY_NAMES:
                setattr(self, name, data[name])
        return True


def assemble_operators(mesh, basis, dt, bcs, nu, threads=None, cache_path=None):
    """构造积分表与全部单元算子"""
    tables = ElementTables(mesh, basis, threads)
    return ElementOperators(mesh, basis, tables, dt, bcs, nu, cache_path)


def assemble_edge_operators(ops: ElementOperators, j: int) -> EdgeOperators:
    """边 j 的 M⁺、M⁻、M°、M、M⁻¹ 与 Q_{ℓ,j}、Q_{r,j}"""
    if not 0 <= j < ops.mesh.n_edges:
        raise AssemblyError(f"边编号越界: {j}")
    return ops.edge_operators(j)


def assemble_continuity_operators(ops: ElementOperators, i: int):
    """三角形 i 的 D_{i,j}，边界边给出 D∂"""
    if not 0 <= i < ops.mesh.n_tri:
        raise AssemblyError(f"三角形编号越界: {i}")
    return ops.continuity_operators(i)
