"""
空间-时间节点基函数与积分规则

参考三角形 T_std = {(ξ,η): ξ,η ≥ 0, ξ+η ≤ 1}，参考正方形 R_std = [0,1]²，
参考时间区间 [0,1]。所有求值函数都对点数组做向量化处理，
点数组的最后一维为坐标维。
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import roots_jacobi

from stdg.config.settings import SOLVER_SETTINGS
from stdg.utils.errors import BasisError

MAX_DEGREE = SOLVER_SETTINGS['MAX_DEGREE']
MAX_QUAD_ORDER = SOLVER_SETTINGS['MAX_QUAD_ORDER']


def _check_degree(p, name="p"):
    if not isinstance(p, (int, np.integer)) or p < 0 or p > MAX_DEGREE:
        raise BasisError(f"不支持的多项式阶数 {name}={p}（允许 0..{MAX_DEGREE}）")


# --------------------------------------------------------------------------
# 一维 Lagrange 插值
# --------------------------------------------------------------------------

def lagrange_1d(nodes, x, with_derivative=False):
    """一维 Lagrange 基函数在任意点处的值（可选导数）

    Args:
        nodes: 插值节点 (n,)
        x: 求值点，任意形状
    Returns:
        values (..., n)，以及 derivative (..., n)
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    values = np.ones(x.shape + (n,))
    derivative = np.zeros(x.shape + (n,)) if with_derivative else None
    for i in range(n):
        for m in range(n):
            if m == i:
                continue
            values[..., i] *= (x - nodes[m]) / (nodes[i] - nodes[m])
        if with_derivative:
            for m in range(n):
                if m == i:
                    continue
                term = np.full(x.shape, 1.0 / (nodes[i] - nodes[m]))
                for q in range(n):
                    if q == i or q == m:
                        continue
                    term = term * (x - nodes[q]) / (nodes[i] - nodes[q])
                derivative[..., i] += term
    if with_derivative:
        return values, derivative
    return values


# --------------------------------------------------------------------------
# 节点
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def tri_nodes(p: int) -> np.ndarray:
    """参考三角形上的等距插值节点，η 方向为外层循环"""
    _check_degree(p)
    if p == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    pts = [(i / p, j / p) for j in range(p + 1) for i in range(p + 1 - j)]
    return np.array(pts)


@lru_cache(maxsize=None)
def line_nodes(p: int) -> np.ndarray:
    """[0,1] 上的等距节点，p=0 时取中点"""
    _check_degree(p)
    if p == 0:
        return np.array([0.5])
    return np.linspace(0.0, 1.0, p + 1)


@lru_cache(maxsize=None)
def quad_nodes(p: int) -> np.ndarray:
    """参考正方形上的张量节点，编号 j*(p+1)+i 对应 (x_i, x_j)"""
    x = line_nodes(p)
    return np.array([(x[i], x[j]) for j in range(p + 1) for i in range(p + 1)])


@lru_cache(maxsize=None)
def time_nodes(p_gamma: int) -> np.ndarray:
    """[0,1] 上的 Gauss-Legendre 点"""
    _check_degree(p_gamma, "p_gamma")
    t, _ = np.polynomial.legendre.leggauss(p_gamma + 1)
    return 0.5 * (t + 1.0)


# --------------------------------------------------------------------------
# 三角形基函数：单项式 Vandermonde 求逆
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _tri_exponents(p: int):
    return tuple((a, b) for b in range(p + 1) for a in range(p + 1 - b))


def _tri_monomials(p, pts, with_gradients):
    exps = _tri_exponents(p)
    xi = pts[..., 0]
    eta = pts[..., 1]
    mono = np.stack([xi ** a * eta ** b for a, b in exps], axis=-1)
    if not with_gradients:
        return mono, None
    dxi = np.stack([a * xi ** max(a - 1, 0) * eta ** b for a, b in exps], axis=-1)
    deta = np.stack([b * xi ** a * eta ** max(b - 1, 0) for a, b in exps], axis=-1)
    return mono, np.stack([dxi, deta], axis=-1)


@lru_cache(maxsize=None)
def _tri_coefficients(p: int) -> np.ndarray:
    vander, _ = _tri_monomials(p, tri_nodes(p), False)
    return np.linalg.inv(vander)


def eval_tri_basis(p: int, point, with_gradients: bool = False):
    """三角形节点基函数 φ_k 的值（及参考坐标梯度）

    Args:
        p: 空间阶数
        point: (..., 2) 参考坐标
        with_gradients: 是否返回梯度
    Returns:
        values (..., N_phi)；with_gradients 时另返回 gradients (..., N_phi, 2)
    """
    _check_degree(p)
    pts = np.asarray(point, dtype=float)
    coeffs = _tri_coefficients(p)
    mono, dmono = _tri_monomials(p, pts, with_gradients)
    values = mono @ coeffs
    if not with_gradients:
        return values
    grads = np.einsum('...md,mk->...kd', dmono, coeffs)
    return values, grads


def eval_quad_basis(p: int, point, with_gradients: bool = False):
    """正方形张量 Lagrange 基函数 ψ_k 的值（及参考坐标梯度）"""
    _check_degree(p)
    pts = np.asarray(point, dtype=float)
    nodes = line_nodes(p)
    n = p + 1
    lx, dlx = lagrange_1d(nodes, pts[..., 0], True)
    ly, dly = lagrange_1d(nodes, pts[..., 1], True)
    shape = pts.shape[:-1] + (n * n,)
    values = np.einsum('...i,...j->...ji', lx, ly).reshape(shape)
    if not with_gradients:
        return values
    gx = np.einsum('...i,...j->...ji', dlx, ly).reshape(shape)
    gy = np.einsum('...i,...j->...ji', lx, dly).reshape(shape)
    return values, np.stack([gx, gy], axis=-1)


def eval_time_basis(p_gamma: int, tau, with_derivative: bool = False):
    """过 Gauss-Legendre 点的时间 Lagrange 基函数 γ_k(τ)"""
    _check_degree(p_gamma, "p_gamma")
    return lagrange_1d(time_nodes(p_gamma), tau, with_derivative)


# --------------------------------------------------------------------------
# 排序函数
# --------------------------------------------------------------------------

def sort_indices(k: int, n: int, n_gamma: int = None) -> Tuple[int, int]:
    """时空编号 k（从 1 开始）分解为空间编号 ℓ1 与时间层 ℓ2"""
    if n < 1:
        raise BasisError(f"空间基函数个数必须为正: {n}")
    if k < 1 or (n_gamma is not None and k > n * n_gamma):
        raise BasisError(f"时空编号越界: k={k}")
    l2 = (k - 1) // n + 1
    l1 = k - (l2 - 1) * n
    return l1, l2


def merge_indices(l1: int, l2: int, n: int) -> int:
    """sort_indices 的逆映射"""
    return (l2 - 1) * n + l1


# --------------------------------------------------------------------------
# 积分规则
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadRule:
    """积分点与权重"""
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return len(self.weights)


def _points_for_order(order):
    return order // 2 + 1


@lru_cache(maxsize=None)
def _interval_rule(order):
    t, w = np.polynomial.legendre.leggauss(_points_for_order(order))
    return QuadRule(0.5 * (t + 1.0), 0.5 * w)


@lru_cache(maxsize=None)
def _square_rule(order):
    line = _interval_rule(order)
    xi, eta = np.meshgrid(line.points, line.points, indexing='xy')
    w = np.outer(line.weights, line.weights)
    return QuadRule(np.stack([xi.ravel(), eta.ravel()], axis=-1), w.ravel())


@lru_cache(maxsize=None)
def _triangle_rule(order):
    # 坍缩正方形（Duffy）：u 方向用 Gauss-Jacobi(1,0) 吸收 (1-u) 因子
    n = _points_for_order(order)
    xu, wu = roots_jacobi(n, 1.0, 0.0)
    xv, wv = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    uu, vv = np.meshgrid(u, v, indexing='ij')
    r = uu
    s = vv * (1.0 - uu)
    w = np.outer(wu, wv) / 8.0
    return QuadRule(np.stack([r.ravel(), s.ravel()], axis=-1), w.ravel())


def quadrature(domain: str, order: int) -> QuadRule:
    """参考域上精确到 order 次多项式的积分规则

    Args:
        domain: 'triangle' | 'square' | 'interval'
        order: 精度
    """
    if order < 0 or order > MAX_QUAD_ORDER:
        raise BasisError(f"不支持的积分精度: {order}")
    if domain == 'interval':
        return _interval_rule(int(order))
    if domain == 'square':
        return _square_rule(int(order))
    if domain == 'triangle':
        return _triangle_rule(int(order))
    raise BasisError(f"未知积分区域: {domain}")


# --------------------------------------------------------------------------
# 时空基函数集合
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceTimeBasis:
    """一组 (p, p_γ) 对应的全部基函数信息"""
    p: int
    p_gamma: int
    n_phi: int = field(init=False)
    n_psi: int = field(init=False)
    n_gamma: int = field(init=False)

    def __post_init__(self):
        _check_degree(self.p)
        _check_degree(self.p_gamma, "p_gamma")
        object.__setattr__(self, 'n_phi', (self.p + 1) * (self.p + 2) // 2)
        object.__setattr__(self, 'n_psi', (self.p + 1) ** 2)
        object.__setattr__(self, 'n_gamma', self.p_gamma + 1)

    @property
    def n_phi_st(self):
        return self.n_phi * self.n_gamma

    @property
    def n_psi_st(self):
        return self.n_psi * self.n_gamma

    @property
    def tri_nodes(self):
        return tri_nodes(self.p)

    @property
    def quad_nodes(self):
        return quad_nodes(self.p)

    @property
    def time_nodes(self):
        return time_nodes(self.p_gamma)

    @property
    def space_order(self):
        """空间积分精度：覆盖质量矩阵 2p+2 与对流项 3p+2"""
        return 3 * self.p + 2

    @property
    def time_order(self):
        """时间矩阵积分精度 2p_γ+2"""
        return 2 * self.p_gamma + 2

    @property
    def nonlinear_time_order(self):
        return 3 * self.p_gamma + 2

    def phi(self, pts, with_gradients=False):
        return eval_tri_basis(self.p, pts, with_gradients)

    def psi(self, pts, with_gradients=False):
        return eval_quad_basis(self.p, pts, with_gradients)

    def gamma(self, tau, with_derivative=False):
        return eval_time_basis(self.p_gamma, tau, with_derivative)

    def rule(self, domain, order=None):
        if order is None:
            order = self.time_order if domain == 'interval' else self.space_order
        return quadrature(domain, order)
