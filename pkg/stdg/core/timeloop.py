"""
时间推进

每个时间步：CFL 选步长 → Picard 迭代（预测步、压力修正、速度更新）→ 提升为新状态。
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from stdg.config.settings import SOLVER_SETTINGS
from stdg.core.assembly import BoundaryCondition, ElementOperators, assemble_operators, periodic_pairs
from stdg.core.basis import SpaceTimeBasis
from stdg.core.linsolve import KrylovConfig, gmres
from stdg.core.mesh import StaggeredMesh, load_mesh
from stdg.core.operators import (
    BoundaryData, FieldState, PhysicsParams, SlabForcing, momentum_predictor, project_pressure,
    project_velocity, slab_forcing,
)
from stdg.utils.errors import ConfigError, SolverError
from stdg.utils.file_utils import StepLogWriter
from stdg.utils.logging_utils import get_logger

logger = get_logger("stdg.timeloop")

INIT_POLICIES = ('zero', 'extrapolate')


@dataclass
class RunConfig:
    """一次计算的离散、求解与输出参数"""
    p: int
    p_gamma: int
    t_end: float
    cfl: float = 0.4
    n_picard: Optional[int] = None
    dt_fixed: Optional[float] = None
    krylov: KrylovConfig = field(default_factory=KrylovConfig)
    init_guess: str = 'zero'
    case: str = 'taylor_green'
    mesh: str = ''
    bcs: Dict[int, BoundaryCondition] = field(default_factory=dict)
    params: Dict[str, float] = field(default_factory=dict)
    nu: float = 0.0
    convection: Optional[bool] = None
    output_prefix: str = ''
    output_every: int = 0
    step_log: str = ''
    max_steps: int = 0
    dump_operators: str = ''
    t_start: float = 0.0

    def __post_init__(self):
        for name in ('p', 'p_gamma'):
            degree = getattr(self, name)
            if not 0 <= degree <= SOLVER_SETTINGS['MAX_DEGREE']:
                raise ConfigError(f"{name} 必须满足 0 ≤ {name} ≤ {SOLVER_SETTINGS['MAX_DEGREE']}: {degree}")
        if self.n_picard is None:
            self.n_picard = self.p + 1
        if not 0 < self.cfl < SOLVER_SETTINGS['CFL_MAX']:
            raise ConfigError(f"cfl 必须满足 0 < cfl < {SOLVER_SETTINGS['CFL_MAX']}: {self.cfl}")
        if self.n_picard < 1:
            raise ConfigError(f"Picard 迭代次数必须 ≥ 1: {self.n_picard}")
        if self.t_end < self.t_start:
            raise ConfigError(f"t_end 不能小于起始时间: {self.t_end}")
        if self.dt_fixed is not None and self.dt_fixed <= 0:
            raise ConfigError(f"dt_fixed 必须为正: {self.dt_fixed}")
        if self.init_guess not in INIT_POLICIES:
            raise ConfigError(f"init_guess 必须是 {INIT_POLICIES} 之一: {self.init_guess}")
        if self.nu < 0:
            raise ConfigError(f"nu 不能为负: {self.nu}")


@dataclass
class StepReport:
    """单个时间步的诊断信息"""
    step: int
    t: float
    dt: float
    picard_corrections: List[float]
    pressure_iterations: List[int]
    viscous_iterations: List[int]
    continuity_residual: float
    kinetic_energy: float
    max_vorticity: float
    picard_residuals: List[float] = field(default_factory=list)

    def as_row(self):
        return {
            'step': self.step, 't': self.t, 'dt': self.dt,
            'dp_first': self.picard_corrections[0] if self.picard_corrections else 0.0,
            'dp_last': self.picard_corrections[-1] if self.picard_corrections else 0.0,
            'gmres_p': int(sum(self.pressure_iterations)),
            'gmres_v': int(sum(self.viscous_iterations)),
            'continuity': self.continuity_residual,
            'continuity_first': self.picard_residuals[0] if self.picard_residuals else self.continuity_residual,
            'energy': self.kinetic_energy,
            'max_vorticity': self.max_vorticity,
        }


# --------------------------------------------------------------------------
# 步长
# --------------------------------------------------------------------------

def compute_dt(state: FieldState, mesh: StaggeredMesh, cfl: float, p: int,
               dt_fixed: float = None, convection: bool = True, v_boundary: float = 0.0) -> float:
    """Δt = cfl/(2p+1) · h_min/(2|v_max|)

    场内速度为零或不计对流时退回 dt_fixed；未配置 dt_fixed 时，
    用边界速度 v_boundary（顶盖、入流）代替 |v_max|。
    """
    v_max = float(np.sqrt((state.v ** 2).sum(axis=1)).max(initial=0.0)) if convection else 0.0
    if not np.isfinite(v_max):
        raise SolverError(f"速度出现非有限值 (t={state.t + state.dt:.6e})")
    if v_max > 0:
        return cfl / (2 * p + 1) * mesh.h_min / (2.0 * v_max)
    if dt_fixed is not None:
        return float(dt_fixed)
    if convection and v_boundary > 0:
        return cfl / (2 * p + 1) * mesh.h_min / (2.0 * float(v_boundary))
    raise ConfigError("速度为零（含边界速度）或不计对流时必须配置 dt_fixed")


# --------------------------------------------------------------------------
# 压力修正与速度更新
# --------------------------------------------------------------------------

def _constant_weights(ops: ElementOperators):
    """∫ φ_k，用于压力的面积加权平均"""
    tb = ops.tables
    return np.einsum('ilq,ilqk->ik', tb.sub_w, tb.sub_phi)


def remove_pressure_mean(ops: ElementOperators, p: np.ndarray) -> np.ndarray:
    """逐时间层减去压力的面积加权平均"""
    w = _constant_weights(ops)
    mean = np.einsum('ik,iak->a', w, p) / w.sum()
    return p - mean[None, :, None]


def continuity_residual(ops: ElementOperators, v, forcing: SlabForcing = None):
    """Σ_j D_{i,j} v_j + b_i，形状 (N_i, N_γ, N_φ)"""
    div = ops.apply_divergence(v)
    if forcing is not None:
        div = div + forcing.continuity_bc
    return div


def pressure_correction_solve(fv, p_k, ops: ElementOperators, forcing: SlabForcing = None,
                              krylov: KrylovConfig = None):
    """求解四点块压力修正系统

    Δt²·(C ⊗ Σ Qᵀ Ms⁻¹ Q) Δp = −(Σ D Fv + b)，p^{k+1} = p^k + Δp
    Returns:
        (p^{k+1}, Δp, KrylovResult)
    """
    krylov = krylov or KrylovConfig()
    rhs = -continuity_residual(ops, fv, forcing)
    nullspace = ops.has_pressure_nullspace
    if nullspace:
        rhs = rhs - rhs.mean(axis=(0, 2), keepdims=True)

        def matvec(x):
            return ops.apply_pressure_operator(remove_pressure_mean(ops, x))
    else:
        matvec = ops.apply_pressure_operator

    result = gmres(matvec, rhs, config=krylov, label="压力修正")
    dp = result.solution
    if nullspace:
        dp = remove_pressure_mean(ops, dp)
    return p_k + dp, dp, result


def velocity_update(fv, dp, ops: ElementOperators):
    """v^{k+1} = Fv − M⁻¹ Σ Q Δp"""
    return fv - ops.apply_mass_inverse(ops.apply_gradient(dp))


# --------------------------------------------------------------------------
# 诊断量
# --------------------------------------------------------------------------

def kinetic_energy(state: FieldState, ops: ElementOperators) -> float:
    """时间层末端的动能 ½∫|v|²"""
    v = state.velocity_at(1.0)
    return 0.5 * float(np.einsum('jdk,jkm,jdm->', v, ops.Ms, v))


def max_vorticity(state: FieldState, ops: ElementOperators) -> float:
    """子三角形积分点上涡量绝对值的最大值"""
    v = state.velocity_at(1.0)[ops.mesh.tri_edges]          # (N_i,3,2,N_ψ)
    grad = np.einsum('ildm,ilqme->ilqde', v, ops.tables.sub_dpsi)
    vort = grad[..., 1, 0] - grad[..., 0, 1]
    return float(np.abs(vort).max(initial=0.0))


# --------------------------------------------------------------------------
# 时间步
# --------------------------------------------------------------------------

def advance_timestep(state: FieldState, dt: float, ops: ElementOperators, physics: PhysicsParams,
                     bdata: BoundaryData, cfg: RunConfig, step: int = 0):
    """推进一个时间层

    Returns:
        (新状态, StepReport)
    Raises:
        SolverError: 出现非有限自由度
    """
    ops.set_dt(dt)
    t_new = state.t + state.dt
    forcing = slab_forcing(ops, physics, bdata, t_new, dt)
    iterate = state.extended(dt, keep_pressure=cfg.init_guess == 'extrapolate')
    predictor_krylov = KrylovConfig(cfg.krylov.tol, cfg.krylov.restart, cfg.krylov.max_iter,
                                    cfg.krylov.reorth_threshold, zero_guess=False,
                                    raise_on_failure=cfg.krylov.raise_on_failure)
    corrections, residuals, p_iters, v_iters = [], [], [], []
    for k in range(cfg.n_picard):
        fv, pstats = momentum_predictor(state.v, iterate, ops, physics, bdata, forcing, predictor_krylov)
        p_new, dp, result = pressure_correction_solve(fv, iterate.p, ops, forcing, cfg.krylov)
        v_new = velocity_update(fv, dp, ops)
        iterate = FieldState(p_new, v_new, t_new, dt)
        corrections.append(float(np.abs(dp).max(initial=0.0)))
        p_iters.append(result.iterations)
        v_iters.append(sum(pstats.iterations))
        residuals.append(float(np.abs(continuity_residual(ops, v_new, forcing)).max(initial=0.0)))
        if not iterate.is_finite():
            raise SolverError(f"第 {step} 步第 {k + 1} 次 Picard 迭代出现非有限自由度 (t={t_new:.6e})")

    report = StepReport(step, t_new + dt, dt, corrections, p_iters, v_iters, residuals[-1],
                        kinetic_energy(iterate, ops), max_vorticity(iterate, ops), residuals)
    return iterate, report


class Simulation:
    """网格、算子与初值的组合，负责时间推进

    Args:
        mesh: 交错网格
        cfg: 运行参数
        physics: 粘度、源项与精确解
        initial_velocity(x, y, t): 初始速度，返回 (..., 2)
        initial_pressure(x, y, t): 初始压力，可为空
    """

    def __init__(self, mesh: StaggeredMesh, cfg: RunConfig, physics: PhysicsParams,
                 initial_velocity: Callable = None, initial_pressure: Callable = None, threads=None):
        self.mesh = mesh
        self.cfg = cfg
        self.physics = physics
        self.basis = SpaceTimeBasis(cfg.p, cfg.p_gamma)
        dt0 = cfg.dt_fixed or 1.0
        self.ops = assemble_operators(mesh, self.basis, dt0, cfg.bcs, physics.nu, threads,
                                      cfg.dump_operators or None)
        self.bdata = BoundaryData(self.ops, physics)
        self.initial_velocity = initial_velocity
        self.initial_pressure = initial_pressure
        self.reports: List[StepReport] = []

    def initial_state(self) -> FieldState:
        state = FieldState.zeros(self.mesh, self.basis, t=self.cfg.t_start)
        if self.initial_velocity is not None:
            state.v = project_velocity(self.ops, self.initial_velocity, self.cfg.t_start)
        if self.initial_pressure is not None:
            state.p = project_pressure(self.ops, self.initial_pressure, self.cfg.t_start)
        return state

    def run(self, state: FieldState = None, on_step: Callable = None) -> FieldState:
        """推进到 t_end

        最后一步截断使其恰好落在 t_end；on_step(state, report) 在每步后调用。
        """
        cfg = self.cfg
        state = state or self.initial_state()
        writer = StepLogWriter(cfg.step_log) if cfg.step_log else None
        convection = self.physics.convection
        step = 0
        eps = 1e-12 * max(1.0, abs(cfg.t_end))
        while state.t + state.dt < cfg.t_end - eps:
            if cfg.max_steps and step >= cfg.max_steps:
                logger.warning(f"达到最大步数 {cfg.max_steps}，停止于 t={state.t + state.dt:.6e}")
                break
            dt = compute_dt(state, self.mesh, cfg.cfl, cfg.p, cfg.dt_fixed, convection,
                            self.bdata.max_speed(state.t + state.dt))
            dt = min(dt, cfg.t_end - (state.t + state.dt))
            step += 1
            state, report = advance_timestep(state, dt, self.ops, self.physics, self.bdata, cfg, step)
            self.reports.append(report)
            logger.info(f"步 {step}: t={report.t:.6e}, dt={dt:.4e}, "
                        f"Δp={', '.join(f'{c:.2e}' for c in report.picard_corrections)}, "
                        f"残差={', '.join(f'{r:.2e}' for r in report.picard_residuals)}, "
                        f"GMRES(p/v)={sum(report.pressure_iterations)}/{sum(report.viscous_iterations)}, "
                        f"连续性残差={report.continuity_residual:.2e}")
            if writer:
                writer.append(report.as_row())
                writer.flush()
            if on_step:
                on_step(state, report)
        return state


def build_simulation(mesh_path, cfg: RunConfig, physics: PhysicsParams, initial_velocity=None,
                     initial_pressure=None, threads=None):
    """读取网格（含周期配对）并构造 Simulation"""
    mesh = load_mesh(mesh_path, periodic_pairs(cfg.bcs))
    return Simulation(mesh, cfg, physics, initial_velocity, initial_pressure, threads)
