"""
结构化测试网格生成

矩形网格的边界标签：1 下、2 右、3 上、4 左；每个矩形单元沿同一方向的对角线切成两个三角形，
内部对偶单元因此都是平行四边形。
圆环网格（圆柱绕流）：1 圆柱壁面、2 外边界入口半圆 (x<0)、3 外边界出口半圆。
"""
import argparse
import math
import os

import numpy as np

from stdg.config.settings import PATH_SETTINGS
from stdg.core.mesh import save_mesh
from stdg.utils.logging_utils import get_logger

logger = get_logger("stdg.make_meshes")

# 各算例的标准网格：(名称前缀, 区域, [(nx, ny), ...])
FIXTURE_FAMILIES = {
    'square': ((-0.5, 0.5, -0.5, 0.5), [(5, 4), (10, 8), (20, 16)]),
    'tg': ((0.0, 2 * math.pi, 0.0, 2 * math.pi), [(5, 4), (10, 8), (20, 16)]),
    'shear': ((-1.0, 1.0, -1.0, 1.0), [(20, 16)]),
    'channel': ((-0.5, 0.5, -0.2, 0.2), [(6, 4), (12, 8), (24, 16)]),
    'cavity': ((-0.5, 0.5, -0.5, 0.5), [(8, 8)]),
}


def rectangle_mesh(nx: int, ny: int, bounds=(0.0, 1.0, 0.0, 1.0)):
    """矩形区域的结构化三角形网格

    Returns:
        (nodes (n,2), triangles (2·nx·ny,3), boundary_edges [(a, b, tag)])，编号从 0 开始
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"nx, ny 必须 ≥ 1: {nx}, {ny}")
    x0, x1, y0, y1 = bounds
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing='ij')
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            tris += [(a, b, c), (a, c, d)]

    bedges = []
    bedges += [(nid(i, 0), nid(i + 1, 0), 1) for i in range(nx)]
    bedges += [(nid(nx, j), nid(nx, j + 1), 2) for j in range(ny)]
    bedges += [(nid(i + 1, ny), nid(i, ny), 3) for i in range(nx)]
    bedges += [(nid(0, j + 1), nid(0, j), 4) for j in range(ny)]
    return nodes, np.array(tris, dtype=np.int64), bedges


def two_triangles_mesh():
    """单位正方形切成两个三角形（N_i=2, N_j=5）"""
    return rectangle_mesh(1, 1)


def annulus_mesh(n_theta: int, n_r: int, r_in: float = 1.0, r_out: float = 20.0, growth: float = 1.15):
    """圆柱外的 O 型网格，径向按几何级数加密，内外圆边界为二次弯曲边

    Returns:
        (nodes, triangles, boundary_edges, curved)，curved 以边界边序号为键
    """
    if n_theta < 8 or n_r < 1:
        raise ValueError("n_theta 至少为 8，n_r 至少为 1")
    steps = growth ** np.arange(n_r)
    radii = r_in + (r_out - r_in) * np.concatenate([[0.0], np.cumsum(steps)]) / steps.sum()
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    nodes = np.array([(r * math.cos(t), r * math.sin(t)) for r in radii for t in theta])

    def nid(k, m):
        return k * n_theta + (m % n_theta)

    tris = []
    for k in range(n_r):
        for m in range(n_theta):
            a, b, c, d = nid(k, m), nid(k, m + 1), nid(k + 1, m + 1), nid(k + 1, m)
            if (k + m) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]

    bedges, curved = [], {}
    half = math.pi / n_theta
    for m in range(n_theta):
        mid = theta[m] + half
        curved[len(bedges)] = (r_in * math.cos(mid), r_in * math.sin(mid))
        bedges.append((nid(0, m + 1), nid(0, m), 1))
    for m in range(n_theta):
        mid = theta[m] + half
        tag = 2 if math.cos(mid) < 0 else 3
        curved[len(bedges)] = (r_out * math.cos(mid), r_out * math.sin(mid))
        bedges.append((nid(n_r, m), nid(n_r, m + 1), tag))
    return nodes, np.array(tris, dtype=np.int64), bedges, curved


def write_rectangle(path, nx, ny, bounds):
    nodes, tris, bedges = rectangle_mesh(nx, ny, bounds)
    save_mesh(path, nodes, tris, bedges)
    return path


def write_annulus(path, n_theta=64, n_r=24, r_in=1.0, r_out=20.0, growth=1.15):
    nodes, tris, bedges, curved = annulus_mesh(n_theta, n_r, r_in, r_out, growth)
    save_mesh(path, nodes, tris, bedges, curved)
    return path


def make_fixtures(directory=None, families=None, with_cylinder=False):
    """生成标准网格族，文件名为 <前缀>_<三角形数>.mesh

    Returns:
        list: 写出的文件路径
    """
    directory = directory or PATH_SETTINGS['MESH_FOLDER']
    written = [os.path.join(directory, "two_triangles.mesh")]
    save_mesh(written[0], *two_triangles_mesh())
    for name in families or FIXTURE_FAMILIES:
        bounds, levels = FIXTURE_FAMILIES[name]
        for nx, ny in levels:
            path = os.path.join(directory, f"{name}_{2 * nx * ny}.mesh")
            written.append(write_rectangle(path, nx, ny, bounds))
    if with_cylinder:
        written.append(write_annulus(os.path.join(directory, "cylinder.mesh")))
    for path in written:
        logger.info(f"网格已写入: {path}")
    return written


def main():
    parser = argparse.ArgumentParser(description="生成结构化测试网格")
    parser.add_argument("--out", default=PATH_SETTINGS['MESH_FOLDER'], help="输出目录")
    parser.add_argument("--cylinder", action="store_true", help="同时生成圆柱绕流 O 型网格")
    args = parser.parse_args()
    make_fixtures(args.out, with_cylinder=args.cylinder)


if __name__ == "__main__":
    main()
