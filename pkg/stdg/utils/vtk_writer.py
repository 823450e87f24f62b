"""
legacy ASCII VTK 输出

每个主三角形在参考坐标中细分为 p² 个子三角形；格点在相邻单元间共享，
共享点上的间断场取各单元值的平均。
"""
import numpy as np

from stdg.config.settings import OUTPUT_SETTINGS
from stdg.core.assembly import ElementOperators
from stdg.core.operators import FieldState, evaluate_pressure, evaluate_velocity
from stdg.utils.file_utils import atomic_open

VTK_HEADER = "# vtk DataFile Version 3.0"
VTK_TRIANGLE = 5


def _lattice(n):
    return np.array([(a, b) for a in range(n + 1) for b in range(n + 1 - a)], dtype=np.int64)


def _sub_triangles(n):
    """格点编号构成的 n² 个逆时针子三角形"""
    index = {tuple(ab): k for k, ab in enumerate(_lattice(n))}
    cells = []
    for a in range(n):
        for b in range(n - a):
            cells.append((index[(a, b)], index[(a + 1, b)], index[(a, b + 1)]))
            if a + b <= n - 2:
                cells.append((index[(a + 1, b)], index[(a + 1, b + 1)], index[(a, b + 1)]))
    return np.array(cells, dtype=np.int64)


def _point_keys(mesh, lattice, n):
    """格点的全局身份：顶点按节点号，边上点按边端点与位置，内部点按单元"""
    ni, nk = mesh.n_tri, len(lattice)
    lam = np.stack([n - lattice.sum(axis=1), lattice[:, 0], lattice[:, 1]], axis=1)   # (K,3)
    tri_nodes = mesh.triangles
    keys = np.zeros((ni, nk, 4), dtype=np.int64)
    tri_ids = np.arange(ni)
    for k in range(nk):
        nz = np.flatnonzero(lam[k])
        if len(nz) == 1:
            keys[:, k] = np.stack([np.zeros(ni, np.int64), tri_nodes[:, nz[0]],
                                   np.zeros(ni, np.int64), np.zeros(ni, np.int64)], axis=1)
        elif len(nz) == 2:
            na, nb = tri_nodes[:, nz[0]], tri_nodes[:, nz[1]]
            pos = np.where(na < nb, lam[k, nz[0]], lam[k, nz[1]])
            keys[:, k] = np.stack([np.ones(ni, np.int64), np.minimum(na, nb), np.maximum(na, nb), pos],
                                  axis=1)
        else:
            keys[:, k] = np.stack([np.full(ni, 2), tri_ids, np.full(ni, lattice[k, 0]),
                                   np.full(ni, lattice[k, 1])], axis=1)
    return keys.reshape(-1, 4)


def _containing_cell(mesh, tris, ref):
    """参考坐标所在子三角形 (b, v_l, v_{l+1}) 对应的对偶单元与边坐标系平移"""
    lam = np.stack([1.0 - ref.sum(axis=1), ref[:, 0], ref[:, 1]], axis=1)
    local = (lam.argmin(axis=1) + 1) % 3
    return mesh.tri_edges[tris, local], mesh.tri_offsets[tris, local]


def _sample_velocity(ops, v, tris, ref, tau, with_gradients=False):
    mesh = ops.mesh
    x, _ = mesh.tri_map(tris, ref)
    cells, offsets = _containing_cell(mesh, tris, ref)
    return x, evaluate_velocity(ops, v, cells, x + offsets, tau, with_gradients)


def sample_fields(state: FieldState, ops: ElementOperators, tau: float, n_sub: int = None):
    """绘图采样：共享格点坐标、点上的压力与速度、子三角形连通关系与涡量"""
    mesh = ops.mesh
    n = max(1, n_sub or ops.basis.p)
    lattice = _lattice(n)
    sub = _sub_triangles(n)
    ni, nk = mesh.n_tri, len(lattice)

    tris = np.repeat(np.arange(ni), nk)
    ref = np.tile(lattice / n, (ni, 1)).astype(float)
    x, vel = _sample_velocity(ops, state.v, tris, ref, tau)
    pres = evaluate_pressure(ops, state.p, tris, x, tau)

    keys = _point_keys(mesh, lattice, n)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    count = np.bincount(inverse, minlength=len(uniq)).astype(float)

    def average(values):
        return np.bincount(inverse, weights=values, minlength=len(uniq)) / count

    points = np.stack([average(x[:, 0]), average(x[:, 1])], axis=1)
    pressure = average(pres)
    velocity = np.stack([average(vel[:, 0]), average(vel[:, 1])], axis=1)

    local = (np.arange(ni)[:, None, None] * nk + sub[None]).reshape(-1, 3)
    cells = inverse[local]

    # 涡量取子三角形重心处的值
    centroid = (lattice[sub].sum(axis=1) / (3.0 * n))
    ctris = np.repeat(np.arange(ni), len(sub))
    _, (_, grad) = _sample_velocity(ops, state.v, ctris, np.tile(centroid, (ni, 1)), tau, True)
    vorticity = grad[:, 1, 0] - grad[:, 0, 1]
    return points, cells, pressure, velocity, vorticity


def write_vtk(state: FieldState, ops: ElementOperators, path, t: float = None, n_sub: int = None):
    """把时间层内物理时刻 t 的场写成 legacy VTK 非结构网格

    Args:
        t: 物理时刻，默认为时间层末端
        n_sub: 每条边的细分数，默认为空间阶数 p
    """
    t = state.t + state.dt if t is None else t
    tau = 1.0 if state.dt <= 0 else float(np.clip((t - state.t) / state.dt, 0.0, 1.0))
    points, cells, pressure, velocity, vorticity = sample_fields(state, ops, tau, n_sub)
    fmt = OUTPUT_SETTINGS['VTK_FORMAT']
    zero = fmt.format(0.0)

    with atomic_open(path, 'w') as fh:
        fh.write(f"{VTK_HEADER}\n")
        fh.write(f"stdg t={fmt.format(t)}\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(points)} double\n")
        for px, py in points:
            fh.write(f"{fmt.format(px)} {fmt.format(py)} {zero}\n")
        fh.write(f"CELLS {len(cells)} {4 * len(cells)}\n")
        for a, b, c in cells:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        fh.write(f"{VTK_TRIANGLE}\n" * len(cells))
        fh.write(f"POINT_DATA {len(points)}\n")
        fh.write("SCALARS pressure double 1\nLOOKUP_TABLE default\n")
        for value in pressure:
            fh.write(f"{fmt.format(value)}\n")
        fh.write("VECTORS velocity double\n")
        for u, v in velocity:
            fh.write(f"{fmt.format(u)} {fmt.format(v)} {zero}\n")
        fh.write(f"CELL_DATA {len(cells)}\n")
        fh.write("SCALARS vorticity double 1\nLOOKUP_TABLE default\n")
        for value in vorticity:
            fh.write(f"{fmt.format(value)}\n")
    return path


def read_vtk(path):
    """读回 write_vtk 的输出

    Returns:
        dict: points (n,3), cells (m,3), pressure, velocity (n,3), vorticity
    """
    with open(path, 'r', encoding='utf-8') as fh:
        lines = [line.strip() for line in fh]
    out = {'header': lines[0]}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        head = parts[0]
        if head == 'POINTS':
            n = int(parts[1])
            out['points'] = np.loadtxt(lines[i + 1:i + 1 + n], ndmin=2)
            i += 1 + n
        elif head == 'CELLS':
            m = int(parts[1])
            out['cells'] = np.loadtxt(lines[i + 1:i + 1 + m], dtype=np.int64, ndmin=2)[:, 1:]
            i += 1 + m
        elif head == 'SCALARS':
            name = parts[1]
            count = len(out['points']) if 'vorticity' != name else len(out['cells'])
            out[name] = np.loadtxt(lines[i + 2:i + 2 + count], ndmin=1)
            i += 2 + count
        elif head == 'VECTORS':
            n = len(out['points'])
            out[parts[1]] = np.loadtxt(lines[i + 1:i + 1 + n], ndmin=2)
            i += 1 + n
        else:
            i += 1
    return out
