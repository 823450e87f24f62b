"""
基准算例

六个算例的精确解、初值、边界条件与源项，L2 误差与收敛性研究，
顶盖驱动方腔与 Ghia 数据的比较，圆柱绕流的 Strouhal 数提取。
"""
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from stdg.config.settings import CASE_DEFAULTS, OUTPUT_SETTINGS, PATH_SETTINGS
from stdg.core.assembly import BoundaryCondition, ElementOperators, periodic_pairs
from stdg.core.mesh import StaggeredMesh, load_mesh
from stdg.core.operators import FieldState, PhysicsParams, evaluate_velocity
from stdg.core.timeloop import RunConfig, Simulation
from stdg.utils.errors import CaseError, ConfigError
from stdg.utils.file_utils import read_table_csv, write_table_csv
from stdg.utils.logging_utils import get_logger

logger = get_logger("stdg.cases")

CASE_IDS = tuple(CASE_DEFAULTS)
EXACT_CASES = ('manufactured', 'womersley', 'taylor_green')


# --------------------------------------------------------------------------
# 解析解
# --------------------------------------------------------------------------

def _stack(u, v):
    u, v = np.broadcast_arrays(u, v)
    return np.stack([u, v], axis=-1)


def manufactured_eval(x, y, t, spec: "CaseSpec"):
    """v = v₀ sin θ，p = p₀ sin θ，θ = k(x−y) − ωt；S 为动量方程的解析残差

    Returns:
        (v (..., 2), p, S (..., 2))
    """
    prm = spec.params
    k, omega, p0 = prm['k'], prm['omega'], prm['p0']
    amp = np.array([prm['u0'], prm['v0']])
    kvec = np.array([k, -k])
    theta = k * (np.asarray(x) - np.asarray(y)) - omega * t
    s, c = np.sin(theta), np.cos(theta)
    v = s[..., None] * amp
    p = p0 * s
    # ∂v/∂t + ∇·(v⊗v) + ∇p − νΔv
    source = (-omega * c[..., None] * amp
              + (amp @ kvec) * (2.0 * s * c)[..., None] * amp
              + p0 * c[..., None] * kvec
              + spec.nu * (kvec @ kvec) * s[..., None] * amp)
    return v, p, source


def womersley_eval(x, y, t, spec: "CaseSpec"):
    """平面 Womersley 流的轴向速度与压力

    u = Re[i P/ω (1 − cos(λ(y_c−1))/cos λ) e^{iωt}]，λ = √(−iα²)，α = R√(ω/ν)，
    p = P x cos(ωt)。
    """
    prm = spec.params
    P, omega, R, y_b = prm['P'], prm['omega'], prm['R'], prm['y_b']
    if spec.nu <= 0:
        raise CaseError("Womersley 算例需要正的粘度")
    alpha = R * math.sqrt(omega / spec.nu)
    lam = np.sqrt(-1j * alpha ** 2)
    yc = (np.asarray(y, dtype=float) - y_b) / R
    profile = 1j * P / omega * (1.0 - np.cos(lam * (yc - 1.0)) / np.cos(lam))
    u = np.real(profile * np.exp(1j * omega * t))
    u = np.broadcast_to(u, np.broadcast(np.asarray(x), yc).shape)
    p = P * np.asarray(x, dtype=float) * math.cos(omega * t)
    return u, np.broadcast_to(p, u.shape)


def taylor_green_eval(x, y, t, nu):
    """Taylor-Green 涡，周期区域 [0, 2π]²"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    decay = math.exp(-2.0 * nu * t)
    v = _stack(np.sin(x) * np.cos(y) * decay, -np.cos(x) * np.sin(y) * decay)
    p = 0.25 * (np.cos(2 * x) + np.cos(2 * y)) * decay ** 2
    return v, p


def shear_layer_init(x, y, spec: "CaseSpec"):
    """双剪切层初值，区域 [−1, 1]²"""
    delta, rho = spec.params['delta'], spec.params['rho']
    xn = (np.asarray(x, dtype=float) + 1.0) / 2.0
    yn = (np.asarray(y, dtype=float) + 1.0) / 2.0
    u = np.where(yn <= 0.5, np.tanh(rho * (yn - 0.25)), np.tanh(rho * (0.75 - yn)))
    v = delta * np.sin(2.0 * np.pi * xn)
    return _stack(u, v), np.ones(np.broadcast(xn, yn).shape)


# --------------------------------------------------------------------------
# 算例描述
# --------------------------------------------------------------------------

def default_boundary_conditions(case_id: str, params: Dict[str, float] = None):
    """结构化网格生成器的标签约定：1 下、2 右、3 上、4 左；圆柱网格 1 壁面、2 入口、3 出口"""
    params = params or CASE_DEFAULTS.get(case_id, {})
    if case_id in ('taylor_green', 'shear_layer'):
        return {1: BoundaryCondition('periodic', partner=3), 3: BoundaryCondition('periodic', partner=1),
                2: BoundaryCondition('periodic', partner=4), 4: BoundaryCondition('periodic', partner=2)}
    if case_id == 'manufactured':
        return {tag: BoundaryCondition('pressure') for tag in (1, 2, 3, 4)}
    if case_id == 'womersley':
        return {1: BoundaryCondition('wall'), 2: BoundaryCondition('pressure'),
                3: BoundaryCondition('wall'), 4: BoundaryCondition('pressure')}
    if case_id == 'cavity':
        return {1: BoundaryCondition('wall'), 2: BoundaryCondition('wall'),
                3: BoundaryCondition('lid', params.get('lid', 1.0)), 4: BoundaryCondition('wall')}
    if case_id == 'cylinder':
        return {1: BoundaryCondition('wall'), 2: BoundaryCondition('inflow', params.get('u_bar', 0.5)),
                3: BoundaryCondition('outflow', 0.0)}
    raise CaseError(f"未知算例: {case_id}")


@dataclass
class CaseSpec:
    """算例编号、物理参数与边界条件"""
    case_id: str
    nu: float
    params: Dict[str, float] = field(default_factory=dict)
    bcs: Dict[int, BoundaryCondition] = field(default_factory=dict)
    t_end: float = 0.0

    def __post_init__(self):
        if self.case_id not in CASE_IDS:
            raise CaseError(f"未知算例: {self.case_id}（可选 {', '.join(CASE_IDS)}）")
        unknown = set(self.params) - set(CASE_DEFAULTS[self.case_id])
        if unknown:
            raise ConfigError(f"算例 {self.case_id} 不认识参数: {', '.join(sorted(unknown))}")
        self.params = {**CASE_DEFAULTS[self.case_id], **self.params}
        if not self.bcs:
            self.bcs = default_boundary_conditions(self.case_id, self.params)
        if self.case_id == 'manufactured' and not math.isclose(self.params['u0'], self.params['v0']):
            raise CaseError("人造解要求 u0 = v0（速度场无散）")
        if self.case_id == 'shear_layer' and self.params['rho'] <= 0:
            raise CaseError("剪切层参数 rho 必须为正")

    @property
    def has_exact(self):
        return self.case_id in EXACT_CASES

    @property
    def convection(self):
        return self.case_id != 'womersley'

    # 精确解（x, y 任意形状，速度返回 (..., 2)）

    def exact_velocity(self, x, y, t):
        if self.case_id == 'manufactured':
            return manufactured_eval(x, y, t, self)[0]
        if self.case_id == 'womersley':
            u, _ = womersley_eval(x, y, t, self)
            return _stack(u, np.zeros_like(u))
        if self.case_id == 'taylor_green':
            return taylor_green_eval(x, y, t, self.nu)[0]
        raise CaseError(f"算例 {self.case_id} 没有解析解")

    def exact_pressure(self, x, y, t):
        if self.case_id == 'manufactured':
            return manufactured_eval(x, y, t, self)[1]
        if self.case_id == 'womersley':
            return womersley_eval(x, y, t, self)[1]
        if self.case_id == 'taylor_green':
            return taylor_green_eval(x, y, t, self.nu)[1]
        raise CaseError(f"算例 {self.case_id} 没有解析解")

    def source(self, x, y, t):
        return manufactured_eval(x, y, t, self)[2]

    def initial_velocity(self, x, y, t):
        if self.has_exact:
            return self.exact_velocity(x, y, t)
        if self.case_id == 'shear_layer':
            return shear_layer_init(x, y, self)[0]
        x = np.asarray(x, dtype=float)
        u = self.params['u_bar'] if self.case_id == 'cylinder' else 0.0
        return _stack(np.full(x.shape, u), np.zeros(x.shape))

    def initial_pressure(self, x, y, t):
        if self.has_exact:
            return self.exact_pressure(x, y, t)
        if self.case_id == 'shear_layer':
            return shear_layer_init(x, y, self)[1]
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def physics(self, convection: Optional[bool] = None) -> PhysicsParams:
        return PhysicsParams(
            nu=self.nu,
            source=self.source if self.case_id == 'manufactured' else None,
            exact_velocity=self.exact_velocity if self.has_exact else None,
            exact_pressure=self.exact_pressure if self.has_exact else None,
            convection=self.convection if convection is None else convection,
        )


def case_from_config(cfg: RunConfig) -> CaseSpec:
    return CaseSpec(cfg.case, cfg.nu, dict(cfg.params), dict(cfg.bcs), cfg.t_end)


def build_case_simulation(cfg: RunConfig, spec: CaseSpec = None, mesh: StaggeredMesh = None,
                          threads=None) -> Simulation:
    """按算例构造 Simulation（组装算子，尚未推进）"""
    spec = spec or case_from_config(cfg)
    if mesh is None:
        mesh = load_mesh(cfg.mesh, periodic_pairs(spec.bcs))
    if cfg.bcs != spec.bcs:
        cfg.bcs = dict(spec.bcs)
    return Simulation(mesh, cfg, spec.physics(cfg.convection), spec.initial_velocity,
                      spec.initial_pressure, threads)


def run_case(cfg: RunConfig, spec: CaseSpec = None, mesh: StaggeredMesh = None, on_step=None,
             threads=None):
    """按配置构造并运行一个算例

    Returns:
        (Simulation, 最终 FieldState)
    """
    sim = build_case_simulation(cfg, spec, mesh, threads)
    state = sim.run(on_step=on_step)
    return sim, state


# --------------------------------------------------------------------------
# 误差
# --------------------------------------------------------------------------

def l2_error(state: FieldState, ops: ElementOperators, spec: CaseSpec, t: float = None):
    """时刻 t（默认为时间层末端）的 L2 误差 (ε(p), ε(v))

    数值解在局部时间 τ=(t−t_n)/Δt 处取值，t 须落在当前时间层内。
    压力只确定到常数时（无压力型边界），先去掉差值的平均。
    """
    if not spec.has_exact:
        raise CaseError(f"算例 {spec.case_id} 没有解析解，无法计算误差")
    t = state.t + state.dt if t is None else t
    tau = 1.0
    if state.dt > 0:
        tau = (t - state.t) / state.dt
        if not -1e-12 <= tau <= 1 + 1e-12:
            raise CaseError(f"t={t:.6e} 不在当前时间层 [{state.t:.6e}, {state.t + state.dt:.6e}] 内")
        tau = min(max(tau, 0.0), 1.0)
    tb, mesh = ops.tables, ops.mesh
    x = tb.sub_x
    p_end = state.pressure_at(tau)
    v_end = state.velocity_at(tau)[mesh.tri_edges]               # (N_i,3,2,N_ψ)
    p_h = np.einsum('ilqk,ik->ilq', tb.sub_phi, p_end)
    v_h = np.einsum('ilqm,ildm->ilqd', tb.sub_psi, v_end)
    dp = p_h - spec.exact_pressure(x[..., 0], x[..., 1], t)
    dv = v_h - spec.exact_velocity(x[..., 0], x[..., 1], t)
    if ops.has_pressure_nullspace:
        dp = dp - (tb.sub_w * dp).sum() / tb.sub_w.sum()
    eps_p = math.sqrt(float((tb.sub_w * dp ** 2).sum()))
    eps_v = math.sqrt(float((tb.sub_w[..., None] * dv ** 2).sum()))
    return eps_p, eps_v


def convergence_rates(errors: Sequence[float], sizes: Sequence[float]):
    """σ = log(ε_粗/ε_细)/log(h_粗/h_细)，第一层为 NaN"""
    rates = [float('nan')]
    for k in range(1, len(errors)):
        if errors[k] == errors[k - 1]:
            rates.append(0.0)
        else:
            rates.append(math.log(errors[k - 1] / errors[k]) / math.log(sizes[k - 1] / sizes[k]))
    return rates


def convergence_study(cfg: RunConfig, mesh_paths: Sequence[str], spec: CaseSpec = None,
                      dt_levels: Sequence[float] = None, csv_path: str = None, threads=None):
    """在一组加密网格上运行同一算例，返回 N_i, eps_p, eps_v, sigma_p, sigma_v 表

    配置了 dt_fixed 而未给出 dt_levels 时，步长随网格尺寸等比缩小。
    """
    if len(mesh_paths) < 2:
        raise ConfigError("收敛性研究至少需要 2 层网格")
    spec = spec or case_from_config(cfg)
    if not spec.has_exact:
        raise CaseError(f"算例 {spec.case_id} 没有解析解，无法做收敛性研究")
    if dt_levels is not None and len(dt_levels) != len(mesh_paths):
        raise ConfigError("dt_levels 的长度必须与网格层数一致")

    rows, sizes = [], []
    h0 = None
    for level, path in enumerate(mesh_paths):
        mesh = load_mesh(path, periodic_pairs(spec.bcs))
        h = math.sqrt(mesh.tri_area.sum() / mesh.n_tri)
        h0 = h0 or h
        dt_fixed = cfg.dt_fixed
        if dt_levels is not None:
            dt_fixed = dt_levels[level]
        elif dt_fixed is not None:
            dt_fixed = cfg.dt_fixed * h / h0
        level_cfg = RunConfig(**{**cfg.__dict__, 'dt_fixed': dt_fixed, 'mesh': path,
                                 'bcs': dict(spec.bcs), 'step_log': '', 'output_prefix': ''})
        logger.info(f"收敛性研究第 {level + 1}/{len(mesh_paths)} 层: {path}, N_i={mesh.n_tri}")
        sim, state = run_case(level_cfg, spec, mesh, threads=threads)
        eps_p, eps_v = l2_error(state, sim.ops, spec)
        rows.append({'N_i': mesh.n_tri, 'eps_p': eps_p, 'eps_v': eps_v})
        sizes.append(h)

    df = pd.DataFrame(rows)
    df['sigma_p'] = convergence_rates(df['eps_p'].tolist(), sizes)
    df['sigma_v'] = convergence_rates(df['eps_v'].tolist(), sizes)
    df = df[OUTPUT_SETTINGS['CONVERGENCE_HEADER']]
    if csv_path:
        write_table_csv(csv_path, df, OUTPUT_SETTINGS['CSV_FORMAT'])
    return df


# --------------------------------------------------------------------------
# 采样、Ghia 比较与 Strouhal 数
# --------------------------------------------------------------------------

def sample_velocity(ops: ElementOperators, state: FieldState, points, tau=1.0):
    """任意物理点处的速度 (n, 2)"""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tris, locs = ops.mesh.locate(pts)
    if np.any(tris < 0):
        bad = pts[np.flatnonzero(tris < 0)[0]]
        raise CaseError(f"采样点 ({bad[0]:.4g}, {bad[1]:.4g}) 不在计算区域内")
    cells = ops.mesh.tri_edges[tris, locs]
    x = pts + ops.mesh.tri_offsets[tris, locs]
    return evaluate_velocity(ops, state.v, cells, x, tau)


def load_ghia_reference(reference_dir: str = None):
    """Ghia 等人 Re=100 方腔中线数据，坐标为 [0, 1]"""
    reference_dir = reference_dir or PATH_SETTINGS['REFERENCE_FOLDER']
    u_ref = read_table_csv(os.path.join(reference_dir, "ghia_re100_u.csv"))
    v_ref = read_table_csv(os.path.join(reference_dir, "ghia_re100_v.csv"))
    return u_ref, v_ref


def compare_ghia(ops: ElementOperators, state: FieldState, lid: float = 1.0, reference_dir: str = None):
    """方腔 [−0.5, 0.5]² 中线速度与 Ghia 数据的最大偏差

    Returns:
        dict: max_u, max_v 以及逐点比较表 u_table, v_table
    """
    u_ref, v_ref = load_ghia_reference(reference_dir)
    eps = 1e-9
    y = np.clip(u_ref['y'].to_numpy() - 0.5, -0.5 + eps, 0.5 - eps)
    x = np.clip(v_ref['x'].to_numpy() - 0.5, -0.5 + eps, 0.5 - eps)
    u_num = sample_velocity(ops, state, np.stack([np.zeros_like(y), y], axis=1))[:, 0] / lid
    v_num = sample_velocity(ops, state, np.stack([x, np.zeros_like(x)], axis=1))[:, 1] / lid
    u_table = u_ref.assign(u_num=u_num, diff=np.abs(u_num - u_ref['u'].to_numpy()))
    v_table = v_ref.assign(v_num=v_num, diff=np.abs(v_num - v_ref['v'].to_numpy()))
    return {'max_u': float(u_table['diff'].max()), 'max_v': float(v_table['diff'].max()),
            'u_table': u_table, 'v_table': v_table}


def strouhal_number(times, signal, diameter: float, u_bar: float, discard: float = 0.0):
    """用 FFT 取信号主频 f，St = f·d/ū

    Args:
        times, signal: 探针时间序列（步长可以不等）
        discard: 丢弃前面这一比例的暂态
    Returns:
        (St, f)
    """
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)
    start = int(len(times) * discard)
    times, signal = times[start:], signal[start:]
    if len(times) < 8:
        raise CaseError("探针样本太少，无法提取频率")
    n = len(times)
    uniform = np.linspace(times[0], times[-1], n)
    values = np.interp(uniform, times, signal)
    values = (values - values.mean()) * np.hanning(n)
    spectrum = np.abs(np.fft.rfft(values))
    freqs = np.fft.rfftfreq(n, uniform[1] - uniform[0])
    peak = 1 + int(np.argmax(spectrum[1:]))
    f = float(freqs[peak])
    return f * diameter / u_bar, f
