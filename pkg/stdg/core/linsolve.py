"""
无矩阵 GMRES 求解器

只需要算子作用 matvec(x)；x 与右端项可以是任意形状的数组，内部展平为向量。
Arnoldi 过程采用修正 Gram-Schmidt，必要时做一次重正交化；
最小二乘子问题用 Givens 旋转逐步更新。
"""
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from stdg.config.settings import GMRES_SETTINGS
from stdg.utils.errors import ConvergenceError, SolverError
from stdg.utils.logging_utils import get_logger

logger = get_logger("stdg.linsolve")


@dataclass
class KrylovConfig:
    """GMRES 参数：相对残差容差、重启长度与最大迭代次数"""
    tol: float = GMRES_SETTINGS['TOL']
    restart: int = GMRES_SETTINGS['RESTART']
    max_iter: int = GMRES_SETTINGS['MAX_ITER']
    reorth_threshold: float = GMRES_SETTINGS['REORTH_THRESHOLD']
    zero_guess: bool = True
    raise_on_failure: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise SolverError(f"GMRES 容差必须为正: {self.tol}")
        if self.restart < 1 or self.max_iter < 1:
            raise SolverError("GMRES 重启长度与最大迭代次数必须为正整数")


class KrylovResult(NamedTuple):
    solution: np.ndarray
    iterations: int
    residual: float
    converged: bool


def _givens(a, b):
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def gmres(matvec: Callable[[np.ndarray], np.ndarray], rhs, x0=None,
          config: KrylovConfig = None, label: str = "GMRES") -> KrylovResult:
    """求解 A x = rhs

    Args:
        matvec: 线性算子作用，输入输出形状与 rhs 相同
        rhs: 右端项
        x0: 初值，默认全零
        config: 求解参数
        label: 日志与异常中使用的名称
    Returns:
        KrylovResult(solution, iterations, residual, converged)，residual 为相对残差
    Raises:
        ConvergenceError: 未在 max_iter 内收敛且 raise_on_failure 为真
    """
    config = config or KrylovConfig()
    rhs = np.asarray(rhs, dtype=float)
    shape = rhs.shape
    b = rhs.ravel()
    n = b.size

    def op(v):
        return np.asarray(matvec(v.reshape(shape)), dtype=float).ravel()

    if config.zero_guess or x0 is None:
        x0 = None
        x = np.zeros(n)
    else:
        x = np.array(x0, dtype=float).ravel()
        if x.size != n:
            raise SolverError(f"{label}: 初值维数 {x.size} 与右端项维数 {n} 不一致")
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return KrylovResult(np.zeros(shape), 0, 0.0, True)
    if not np.all(np.isfinite(b)):
        raise SolverError(f"{label}: 右端项包含非有限值")

    r = b - op(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    rel = beta / b_norm
    total = 0
    m = min(config.restart, n)

    while rel > config.tol and total < config.max_iter:
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_done = 0
        for k in range(m):
            w = op(V[k])
            if w.size != n:
                raise SolverError(f"{label}: 算子输出维数 {w.size} 与右端项维数 {n} 不一致")
            w_norm = np.linalg.norm(w)
            for i in range(k + 1):
                H[i, k] = V[i] @ w
                w -= H[i, k] * V[i]
            # 正交性损失超过阈值时再做一遍
            w_len = np.linalg.norm(w)
            if w_len > 0 and np.abs(V[:k + 1] @ w).max() > config.reorth_threshold * w_len:
                for i in range(k + 1):
                    c = V[i] @ w
                    H[i, k] += c
                    w -= c * V[i]
            H[k + 1, k] = np.linalg.norm(w)
            breakdown = H[k + 1, k] <= 1e-14 * max(w_norm, 1e-300)
            if not breakdown:
                V[k + 1] = w / H[k + 1, k]
            for i in range(k):
                h0, h1 = H[i, k], H[i + 1, k]
                H[i, k] = cs[i] * h0 + sn[i] * h1
                H[i + 1, k] = -sn[i] * h0 + cs[i] * h1
            cs[k], sn[k] = _givens(H[k, k], H[k + 1, k])
            H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k_done = k + 1
            total += 1
            rel = abs(g[k + 1]) / b_norm
            if rel <= config.tol or breakdown or total >= config.max_iter:
                break
        y = scipy.linalg.solve_triangular(H[:k_done, :k_done], g[:k_done])
        x += V[:k_done].T @ y
        r = b - op(x)
        beta = np.linalg.norm(r)
        rel = beta / b_norm
        if not np.isfinite(rel):
            raise SolverError(f"{label}: 迭代产生非有限值")
        if breakdown and rel > config.tol:
            raise SolverError(f"{label}: Arnoldi 过程中断，残差 {rel:.3e} 仍未达到容差")

    converged = rel <= config.tol
    if not converged:
        message = f"{label}: {total} 次迭代后未收敛，相对残差 {rel:.3e}"
        if config.raise_on_failure:
            raise ConvergenceError(message)
        logger.warning(message)
    logger.debug(f"{label}: 迭代 {total} 次，相对残差 {rel:.3e}")
    return KrylovResult(x.reshape(shape), total, rel, converged)
