"""
三角形网格读取与基于边的交错对偶网格构造

主网格三角形 T_i 承载压力，对偶网格单元 R_j（每条边一个）承载速度。
内部边的对偶单元是四边形 (b_ℓ, n1, b_r, n2)，边界边的对偶单元是子三角形
(b, n1, n2)。文件中的编号从 1 开始，内部统一从 0 开始。
"""
import hashlib
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import meshio
import numpy as np
from scipy.spatial import cKDTree

from stdg.config.settings import SOLVER_SETTINGS
from stdg.core.basis import quadrature
from stdg.utils.errors import MeshGeometryError, MeshParseError, MeshTopologyError
from stdg.utils.file_utils import atomic_open
from stdg.utils.logging_utils import get_logger

logger = get_logger("stdg.mesh")

MESH_HEADER = "STDG-MESH 1"


# --------------------------------------------------------------------------
# 小工具：2×2 矩阵与二次形函数
# --------------------------------------------------------------------------

def det2(J):
    return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]


def inv2(J):
    det = det2(J)
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1] / det
    inv[..., 0, 1] = -J[..., 0, 1] / det
    inv[..., 1, 0] = -J[..., 1, 0] / det
    inv[..., 1, 1] = J[..., 0, 0] / det
    return inv


def solve2(J, b):
    return np.einsum('...ij,...j->...i', inv2(J), b)


def p2_shape(ref):
    """参考三角形上的二次形函数，顺序为 3 个顶点 + 边 01、12、20 的中点"""
    r = ref[..., 0]
    s = ref[..., 1]
    l0 = 1.0 - r - s
    N = np.stack([
        l0 * (2 * l0 - 1), r * (2 * r - 1), s * (2 * s - 1),
        4 * l0 * r, 4 * r * s, 4 * s * l0,
    ], axis=-1)
    dr = np.stack([
        -(4 * l0 - 1), 4 * r - 1, np.zeros_like(r),
        4 * (l0 - r), 4 * s, -4 * s,
    ], axis=-1)
    ds = np.stack([
        -(4 * l0 - 1), np.zeros_like(r), 4 * s - 1,
        -4 * r, 4 * r, 4 * (l0 - s),
    ], axis=-1)
    return N, np.stack([dr, ds], axis=-1)


def p2_map(ctrl, ref):
    """二次映射 x(ref) 与雅可比 J[d,b] = ∂x_d/∂ref_b；ctrl (n,6,2)，ref (n,2)"""
    N, dN = p2_shape(ref)
    x = np.einsum('nk,nkd->nd', N, ctrl)
    J = np.einsum('nkb,nkd->ndb', dN, ctrl)
    return x, J


def bilinear_map(corners, ref):
    """双线性映射，角点顺序 (0,0),(1,0),(1,1),(0,1)；corners (n,4,2)，ref (n,2)"""
    xi = ref[:, 0:1]
    eta = ref[:, 1:2]
    c0, c1, c2, c3 = corners[:, 0], corners[:, 1], corners[:, 2], corners[:, 3]
    x = (1 - xi) * (1 - eta) * c0 + xi * (1 - eta) * c1 + xi * eta * c2 + (1 - xi) * eta * c3
    dxi = (1 - eta) * (c1 - c0) + eta * (c2 - c3)
    deta = (1 - xi) * (c3 - c0) + xi * (c2 - c1)
    return x, np.stack([dxi, deta], axis=-1)


def newton_inverse(map_fn, target, ref0, scale=1.0):
    """向量化牛顿法求映射的逆"""
    ref = ref0.copy()
    tol = SOLVER_SETTINGS['NEWTON_TOL'] * max(scale, 1e-300)
    for _ in range(SOLVER_SETTINGS['NEWTON_MAX_ITER']):
        x, J = map_fn(ref)
        dx = target - x
        if np.max(np.abs(dx), initial=0.0) <= tol:
            return ref
        ref = ref + solve2(J, dx)
    x, _ = map_fn(ref)
    if np.max(np.abs(target - x), initial=0.0) > 1e3 * tol:
        raise MeshGeometryError("逆映射牛顿迭代不收敛（单元可能退化）")
    return ref


# --------------------------------------------------------------------------
# 原始网格数据与文件读写
# --------------------------------------------------------------------------

@dataclass
class RawMesh:
    """从文件读出、尚未建立连接关系的网格"""
    nodes: np.ndarray                      # (N_nodes, 2)
    triangles: np.ndarray                  # (N_i, 3)，从 0 开始
    boundary_edges: np.ndarray             # (N_b, 3)：n1, n2, tag
    curved: Dict[int, Tuple[float, float]] = field(default_factory=dict)  # 边界边序号 -> 中点


def _tokens(path):
    if not os.path.exists(path):
        raise MeshParseError(f"网格文件不存在: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            text = line.split('#', 1)[0].strip()
            if text:
                yield lineno, text.split()


def _read_count(it, what):
    try:
        lineno, parts = next(it)
    except StopIteration:
        raise MeshParseError(f"文件提前结束：缺少{what}数量")
    if len(parts) != 1:
        raise MeshParseError(f"第 {lineno} 行：应为{what}数量")
    try:
        n = int(parts[0])
    except ValueError:
        raise MeshParseError(f"第 {lineno} 行：{what}数量不是整数: {parts[0]}")
    if n < 0:
        raise MeshParseError(f"第 {lineno} 行：{what}数量为负")
    return n


def _read_rows(it, count, ncols, what, kinds):
    rows = {}
    for _ in range(count):
        try:
            lineno, parts = next(it)
        except StopIteration:
            raise MeshParseError(f"文件提前结束：{what}行数不足")
        if len(parts) != ncols:
            raise MeshParseError(f"第 {lineno} 行：{what}记录应有 {ncols} 列")
        try:
            ident = int(parts[0])
            values = [kind(v) for kind, v in zip(kinds, parts[1:])]
        except ValueError:
            raise MeshParseError(f"第 {lineno} 行：{what}记录包含非法数值")
        if ident in rows:
            raise MeshParseError(f"第 {lineno} 行：重复的{what}编号 {ident}")
        rows[ident] = (lineno, values)
    if sorted(rows) != list(range(1, count + 1)):
        raise MeshParseError(f"{what}编号必须为 1..{count}")
    return [rows[k][1] for k in range(1, count + 1)]


def read_native_mesh(path) -> RawMesh:
    """读取 STDG-MESH 1 格式网格文件"""
    it = _tokens(path)
    try:
        lineno, parts = next(it)
    except StopIteration:
        raise MeshParseError(f"空网格文件: {path}")
    if " ".join(parts) != MESH_HEADER:
        raise MeshParseError(f"第 {lineno} 行：文件头应为 '{MESH_HEADER}'")

    n_nodes = _read_count(it, "节点")
    nodes = _read_rows(it, n_nodes, 3, "节点", (float, float))
    n_tri = _read_count(it, "三角形")
    tris = _read_rows(it, n_tri, 4, "三角形", (int, int, int))
    n_bed = _read_count(it, "边界边")
    bedges = _read_rows(it, n_bed, 4, "边界边", (int, int, int))

    curved = {}
    section = next(it, None)
    if section is not None and section[1] != ["CURVED"]:
        raise MeshParseError(f"第 {section[0]} 行：多余内容，期望 CURVED 段")
    for lineno, parts in it:
        if len(parts) != 3:
            raise MeshParseError(f"第 {lineno} 行：CURVED 记录应为 'edge_id xm ym'")
        try:
            eid = int(parts[0])
            curved[eid - 1] = (float(parts[1]), float(parts[2]))
        except ValueError:
            raise MeshParseError(f"第 {lineno} 行：CURVED 记录包含非法数值")
        if not 1 <= eid <= n_bed:
            raise MeshParseError(f"第 {lineno} 行：弯曲边编号越界 {eid}")

    triangles = np.array(tris, dtype=np.int64).reshape(-1, 3) - 1
    bed = np.array(bedges, dtype=np.int64).reshape(-1, 3)
    bed[:, :2] -= 1
    for arr, what in ((triangles, "三角形"), (bed[:, :2], "边界边")):
        if arr.size and (arr.min() < 0 or arr.max() >= n_nodes):
            raise MeshParseError(f"{what}引用了不存在的节点")
    if bed.size and bed[:, 2].min() < 1:
        raise MeshParseError("边界标签必须为正整数")
    return RawMesh(np.array(nodes, dtype=float).reshape(-1, 2), triangles, bed, curved)


def read_gmsh_mesh(path) -> RawMesh:
    """用 meshio 读取 Gmsh 网格

    triangle 单元为主网格，line/line3 单元为边界边（line3 的中间节点作为曲边中点），
    边界标签取 gmsh:physical（缺省为 1）；未被三角形引用的节点会被剔除。
    """
    if not os.path.exists(path):
        raise MeshParseError(f"网格文件不存在: {path}")
    try:
        msh = meshio.gmsh.read(path)
    except (meshio.ReadError, ValueError, KeyError, IndexError) as e:
        raise MeshParseError(f"无法解析 Gmsh 文件 {path}: {e}") from e

    coords = np.asarray(msh.points, dtype=float)[:, :2]
    physical = msh.cell_data.get("gmsh:physical")
    if physical is not None and len(physical) != len(msh.cells):
        physical = None

    tris, bedges, curved_mid = [], [], {}
    for ib, block in enumerate(msh.cells):
        conn = np.asarray(block.data, dtype=np.int64)
        if block.type == "triangle":
            tris.append(conn)
        elif block.type in ("line", "line3"):
            tags = np.ones(len(conn), dtype=np.int64)
            if physical is not None and physical[ib] is not None:
                tags = np.asarray(physical[ib], dtype=np.int64)
            for row, tag in zip(conn, tags):
                if block.type == "line3":
                    curved_mid[len(bedges)] = tuple(coords[row[2]])
                bedges.append((row[0], row[1], tag))
        elif block.type == "vertex":
            continue
        else:
            raise MeshParseError(f"不支持的 Gmsh 单元类型: {block.type}")

    tris = np.concatenate(tris).reshape(-1, 3) if tris else np.zeros((0, 3), dtype=np.int64)
    if not len(tris):
        raise MeshParseError(f"Gmsh 文件中没有三角形单元: {path}")
    bed = np.array(bedges, dtype=np.int64).reshape(-1, 3)
    used = np.unique(tris)
    remap = -np.ones(len(coords), dtype=np.int64)
    remap[used] = np.arange(len(used))
    if bed.size and np.any(remap[bed[:, :2]] < 0):
        raise MeshTopologyError("边界线引用了不属于任何三角形的节点")
    bed[:, :2] = remap[bed[:, :2]]
    return RawMesh(coords[used], remap[tris], bed, curved_mid)


def save_mesh(path, nodes, triangles, boundary_edges, curved=None):
    """按 STDG-MESH 1 格式原子写出网格（输入编号从 0 开始）"""
    with atomic_open(path, 'w') as f:
        f.write(f"{MESH_HEADER}\n{len(nodes)}\n")
        for k, (x, y) in enumerate(nodes, start=1):
            f.write(f"{k} {x:.17g} {y:.17g}\n")
        f.write(f"{len(triangles)}\n")
        for k, (a, b, c) in enumerate(triangles, start=1):
            f.write(f"{k} {a + 1} {b + 1} {c + 1}\n")
        f.write(f"{len(boundary_edges)}\n")
        for k, (a, b, tag) in enumerate(boundary_edges, start=1):
            f.write(f"{k} {a + 1} {b + 1} {tag}\n")
        if curved:
            f.write("CURVED\n")
            for eid in sorted(curved):
                xm, ym = curved[eid]
                f.write(f"{eid + 1} {xm:.17g} {ym:.17g}\n")


# --------------------------------------------------------------------------
# 交错网格
# --------------------------------------------------------------------------

@dataclass
class QuadratureTable:
    """物理空间积分点；points 位于所属单元坐标系中"""
    points: np.ndarray
    weights: np.ndarray
    normals: Optional[np.ndarray] = None


class StaggeredMesh:
    """主三角形网格 + 基于边的对偶网格

    主要数组（从 0 开始编号）：
        nodes (N_nodes,2)、triangles (N_i,3) 逆时针
        edge_nodes (N_j,2)：在 ℓ(j) 中逆时针走向 n1→n2
        edge_left / edge_right (N_j,)：边界边 right = -1
        edge_tag (N_j,)：0 为内部边（含周期边）
        tri_edges / tri_neighbors / tri_offsets：三角形第 l 条局部边 (v_l→v_{l+1})
        的全局边号、邻居与坐标平移（三角形坐标系 → 边坐标系）
    边坐标系即 ℓ(j) 的坐标系，只有周期边的 r 侧需要平移。
    """

    def __init__(self, raw: RawMesh, periodic: Sequence[Tuple[int, int]] = ()):
        self.nodes = np.asarray(raw.nodes, dtype=float)
        self.triangles = np.asarray(raw.triangles, dtype=np.int64).copy()
        self.scale = float(np.ptp(self.nodes, axis=0).max()) if len(self.nodes) else 1.0
        self.periodic_pairs = [tuple(p) for p in periodic]
        self._check_nodes()
        self._orient()
        self._build_edges(raw, self.periodic_pairs)
        self._build_geometry()
        logger.info(f"网格构造完成: N_i={self.n_tri}, N_j={self.n_edges}, "
                    f"内部边={int(np.sum(self.edge_right >= 0))}")

    # ---------------- 构造 ----------------

    @property
    def n_tri(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edge_nodes)

    def _check_nodes(self):
        if self.n_tri == 0:
            raise MeshTopologyError("网格中没有三角形")
        used = np.zeros(len(self.nodes), dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            isolated = int(np.flatnonzero(~used)[0]) + 1
            raise MeshTopologyError(f"存在孤立节点: {isolated}")
        tol = SOLVER_SETTINGS['DUPLICATE_NODE_TOL']
        pairs = cKDTree(self.nodes).query_pairs(tol)
        if pairs:
            a, b = sorted(next(iter(pairs)))
            raise MeshGeometryError(f"重复节点: {a + 1} 与 {b + 1}")

    def _orient(self):
        p = self.nodes[self.triangles]
        area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        degenerate = np.abs(area) <= 1e-14 * self.scale ** 2
        if degenerate.any():
            raise MeshGeometryError(f"零面积三角形: {int(np.flatnonzero(degenerate)[0]) + 1}")
        flip = area < 0
        if flip.any():
            logger.info(f"重新定向 {int(flip.sum())} 个顺时针三角形")
            self.triangles[flip] = self.triangles[flip][:, [0, 2, 1]]

    def _build_edges(self, raw: RawMesh, periodic):
        tri = self.triangles
        owners: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
        for i in range(self.n_tri):
            for l in range(3):
                a, b = int(tri[i, l]), int(tri[i, (l + 1) % 3])
                owners.setdefault((min(a, b), max(a, b)), []).append((i, l))
        for key, own in owners.items():
            if len(own) > 2:
                raise MeshTopologyError(f"非流形边 ({key[0] + 1},{key[1] + 1}) 被 {len(own)} 个三角形共享")

        # 边界标签与弯曲中点
        tag_of, mid_of = {}, {}
        for k, (a, b, tag) in enumerate(raw.boundary_edges):
            key = (min(a, b), max(a, b))
            if key not in owners or len(owners[key]) != 1:
                raise MeshTopologyError(f"边界边 {k + 1} 不在区域边界上")
            tag_of[key] = int(tag)
            if k in raw.curved:
                mid_of[key] = np.array(raw.curved[k], dtype=float)
        for key, own in owners.items():
            if len(own) == 1 and key not in tag_of:
                raise MeshTopologyError(f"边界边 ({key[0] + 1},{key[1] + 1}) 缺少标签")

        partner = self._match_periodic(owners, tag_of, mid_of, periodic)

        # 按首次出现顺序编号
        edge_index: Dict[Tuple[int, int], int] = {}
        records = []
        for i in range(self.n_tri):
            for l in range(3):
                a, b = int(tri[i, l]), int(tri[i, (l + 1) % 3])
                key = (min(a, b), max(a, b))
                if key in edge_index:
                    continue
                sides = list(owners[key])
                tag = tag_of.get(key, 0)
                if key in partner:
                    other = partner[key]
                    sides = sides + owners[other]
                    tag = 0
                    edge_index[other] = len(records)
                edge_index[key] = len(records)
                records.append((sorted(sides), tag, key))

        nj = len(records)
        self.edge_nodes = np.zeros((nj, 2), dtype=np.int64)
        self.edge_left = np.zeros(nj, dtype=np.int64)
        self.edge_right = -np.ones(nj, dtype=np.int64)
        self.edge_tag = np.zeros(nj, dtype=np.int64)
        self.edge_local = -np.ones((nj, 2), dtype=np.int64)
        self.edge_curved = np.zeros(nj, dtype=bool)
        self.edge_mid = np.zeros((nj, 2))
        self.tri_edges = np.zeros((self.n_tri, 3), dtype=np.int64)
        self.tri_neighbors = -np.ones((self.n_tri, 3), dtype=np.int64)
        self.tri_side = np.zeros((self.n_tri, 3), dtype=np.int64)
        self.tri_offsets = np.zeros((self.n_tri, 3, 2))

        for j, (sides, tag, key) in enumerate(records):
            (il, ll) = sides[0]
            a, b = int(tri[il, ll]), int(tri[il, (ll + 1) % 3])
            self.edge_nodes[j] = (a, b)
            self.edge_left[j] = il
            self.edge_local[j, 0] = ll
            self.edge_tag[j] = tag
            self.tri_edges[il, ll] = j
            self.tri_side[il, ll] = 0
            if key in mid_of:
                self.edge_curved[j] = True
                self.edge_mid[j] = mid_of[key]
            else:
                self.edge_mid[j] = 0.5 * (self.nodes[a] + self.nodes[b])
            if len(sides) == 2:
                (ir, lr) = sides[1]
                if ir == il:
                    raise MeshTopologyError(f"三角形 {il + 1} 与自身周期相连")
                self.edge_right[j] = ir
                self.edge_local[j, 1] = lr
                self.tri_edges[ir, lr] = j
                self.tri_side[ir, lr] = 1
                self.tri_neighbors[il, ll] = ir
                self.tri_neighbors[ir, lr] = il
                ra, rb = int(tri[ir, lr]), int(tri[ir, (lr + 1) % 3])
                mid_r = 0.5 * (self.nodes[ra] + self.nodes[rb])
                self.tri_offsets[ir, lr] = self.edge_mid[j] - mid_r

    def _match_periodic(self, owners, tag_of, mid_of, periodic):
        partner = {}
        tol = SOLVER_SETTINGS['PERIODIC_MATCH_TOL'] * self.scale
        for tag_a, tag_b in periodic:
            group_a = [k for k, t in tag_of.items() if t == tag_a]
            group_b = [k for k, t in tag_of.items() if t == tag_b]
            if not group_a or len(group_a) != len(group_b):
                raise MeshTopologyError(f"周期边界 {tag_a}<->{tag_b} 的边数不匹配")
            if any(k in mid_of for k in group_a + group_b):
                raise MeshTopologyError("弯曲边不能作为周期边界")
            mid_a = np.array([0.5 * (self.nodes[a] + self.nodes[b]) for a, b in group_a])
            mid_b = np.array([0.5 * (self.nodes[a] + self.nodes[b]) for a, b in group_b])
            shift = mid_b.mean(axis=0) - mid_a.mean(axis=0)
            dist, idx = cKDTree(mid_b).query(mid_a + shift)
            if np.any(dist > tol) or len(set(idx.tolist())) != len(group_a):
                raise MeshTopologyError(f"周期边界 {tag_a}<->{tag_b} 的边无法一一对应")
            for ka, kb in zip(group_a, idx):
                partner[ka] = group_b[kb]
                partner[group_b[kb]] = ka
        return partner

    def _build_geometry(self):
        nodes = self.nodes
        tri = self.triangles
        verts = nodes[tri]                                  # (N_i,3,2)
        self.barycenters = verts.mean(axis=1)
        self.tri_curved = self.edge_curved[self.tri_edges].any(axis=1)

        # 三角形二次控制点（三角形坐标系）
        mids = 0.5 * (verts + np.roll(verts, -1, axis=1))
        own = self.tri_side == 0
        curved_local = self.edge_curved[self.tri_edges] & own
        mids[curved_local] = self.edge_mid[self.tri_edges][curved_local]
        self.tri_ctrl = np.concatenate([verts, mids], axis=1)   # (N_i,6,2)

        # 子三角形 T_{i,j} = (b_i, v_l, v_{l+1})，控制点 (N_i,3,6,2)
        b = np.repeat(self.barycenters[:, None, :], 3, axis=1)
        va = verts
        vc = np.roll(verts, -1, axis=1)
        self.sub_ctrl = np.stack([b, va, vc, 0.5 * (b + va), mids, 0.5 * (vc + b)], axis=2)

        rule = quadrature('triangle', 4)
        self.tri_area = self._area_of(self.tri_ctrl, rule)
        self.sub_area = self._area_of(self.sub_ctrl.reshape(-1, 6, 2), rule).reshape(-1, 3)
        if np.any(self.sub_area <= 0):
            raise MeshGeometryError("存在非正面积的子三角形（弯曲边过度弯曲）")

        # 对偶单元
        nj = self.n_edges
        self.dual_area = np.zeros(nj)
        np.add.at(self.dual_area, self.tri_edges.ravel(), self.sub_area.ravel())
        self.is_boundary = self.edge_right < 0
        n1 = nodes[self.edge_nodes[:, 0]]
        n2 = nodes[self.edge_nodes[:, 1]]
        bl = self.barycenters[self.edge_left]
        br = bl.copy()
        inner = ~self.is_boundary
        r = self.edge_right[inner]
        lr = self.edge_local[inner, 1]
        br[inner] = self.barycenters[r] + self.tri_offsets[r, lr]
        br[self.is_boundary] = self.edge_mid[self.is_boundary]
        self.dual_corners = np.stack([bl, n1, br, n2], axis=1)   # (N_j,4,2)

        d = n2 - n1
        self.edge_length = np.linalg.norm(d, axis=1)
        self.edge_normal = np.stack([d[:, 1], -d[:, 0]], axis=1) / self.edge_length[:, None]
        if np.any(np.einsum('jd,jd->j', self.edge_normal[inner], (br - bl)[inner]) <= 0):
            raise MeshGeometryError("内部边法向未指向右侧三角形")
        self._check_convex()

        perim = np.linalg.norm(np.roll(self.dual_corners, -1, axis=1) - self.dual_corners,
                               axis=2).sum(axis=1)
        perim[self.is_boundary] = (np.linalg.norm(n1 - bl, axis=1) + np.linalg.norm(n2 - bl, axis=1)
                                   + self.edge_length)[self.is_boundary]
        self.dual_h = 2.0 * self.dual_area / perim

        sides = np.linalg.norm(np.roll(verts, -1, axis=1) - verts, axis=2)
        self.tri_perimeter = sides.sum(axis=1)
        self.tri_incircle = 4.0 * self.tri_area / self.tri_perimeter
        circum = sides.prod(axis=1) / (4.0 * self.tri_area)
        self.tri_quality = (self.tri_incircle / circum)

    def _area_of(self, ctrl, rule):
        n = len(ctrl)
        ref = np.broadcast_to(rule.points, (n,) + rule.points.shape).reshape(-1, 2)
        c = np.repeat(ctrl, rule.size, axis=0)
        _, J = p2_map(c, ref)
        return (det2(J).reshape(n, rule.size) * rule.weights).sum(axis=1)

    def _check_convex(self):
        inner = np.flatnonzero(~self.is_boundary)
        c = self.dual_corners[inner]
        e = np.roll(c, -1, axis=1) - c
        en = np.roll(e, -1, axis=1)
        cross = e[..., 0] * en[..., 1] - e[..., 1] * en[..., 0]
        bad = np.any(cross <= 1e-14 * self.scale ** 2, axis=1)
        if bad.any():
            raise MeshGeometryError(f"边 {int(inner[np.flatnonzero(bad)[0]]) + 1} 的对偶四边形非凸")

    # ---------------- 拓扑查询 ----------------

    def sigma(self, i: int, j: int) -> int:
        """符号函数 σ(i,j) = (r − 2i + ℓ)/(r − ℓ)"""
        l, r = int(self.edge_left[j]), int(self.edge_right[j])
        if r < 0:
            raise MeshTopologyError(f"边 {j} 为边界边，σ 无定义")
        if i not in (l, r):
            raise MeshTopologyError(f"三角形 {i} 与边 {j} 不相邻")
        return (r - 2 * i + l) // (r - l)

    def edge_offset(self, j: int, side: int) -> np.ndarray:
        """边 j 第 side 侧（0=ℓ，1=r）三角形坐标到边坐标系的平移"""
        i = self.edge_left[j] if side == 0 else self.edge_right[j]
        return self.tri_offsets[i, self.edge_local[j, side]]

    def dual_faces(self):
        """三角形内部的对偶面：每个三角形每个顶点一条，连接重心与顶点

        Returns:
            dict: tri, cell_a, cell_b, local_a, local_b (N_i*3,)
        """
        n = self.n_tri
        tri = np.repeat(np.arange(n), 3)
        v = np.tile(np.arange(3), n)
        la = (v - 1) % 3
        lb = v
        return {
            'tri': tri, 'vertex': v, 'local_a': la, 'local_b': lb,
            'cell_a': self.tri_edges[tri, la], 'cell_b': self.tri_edges[tri, lb],
        }

    # ---------------- 几何映射 ----------------

    def tri_map(self, tris, ref):
        tris = np.asarray(tris, dtype=np.int64)
        return p2_map(self.tri_ctrl[tris], np.asarray(ref, dtype=float))

    def tri_inverse(self, tris, x):
        """三角形坐标系中的物理点 → 参考三角形坐标"""
        tris = np.asarray(tris, dtype=np.int64)
        x = np.asarray(x, dtype=float)
        v = self.tri_ctrl[tris, :3]
        A = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
        ref = solve2(A, x - v[:, 0])
        curved = self.tri_curved[tris]
        if curved.any():
            ctrl = self.tri_ctrl[tris[curved]]
            ref[curved] = newton_inverse(lambda q: p2_map(ctrl, q), x[curved], ref[curved], self.scale)
        return ref

    def _boundary_ctrl(self, cells):
        l = self.edge_left[cells]
        return self.sub_ctrl[l, self.edge_local[cells, 0]]

    def dual_map(self, cells, ref):
        """对偶单元映射（边坐标系）；边界单元为子三角形映射，参考点取自 R_std ⊃ T_std"""
        cells = np.asarray(cells, dtype=np.int64)
        ref = np.asarray(ref, dtype=float)
        x = np.empty(ref.shape)
        J = np.empty(ref.shape + (2,))
        bnd = self.is_boundary[cells]
        if (~bnd).any():
            x[~bnd], J[~bnd] = bilinear_map(self.dual_corners[cells[~bnd]], ref[~bnd])
        if bnd.any():
            x[bnd], J[bnd] = p2_map(self._boundary_ctrl(cells[bnd]), ref[bnd])
        return x, J

    def dual_inverse(self, cells, x):
        cells = np.asarray(cells, dtype=np.int64)
        x = np.asarray(x, dtype=float)
        ref = np.empty(x.shape)
        bnd = self.is_boundary[cells]
        for mask in (~bnd, bnd):
            if not mask.any():
                continue
            c = cells[mask]
            corners = self.dual_corners[c]
            A = np.stack([corners[:, 1] - corners[:, 0], corners[:, 3] - corners[:, 0]], axis=-1)
            guess = solve2(A, x[mask] - corners[:, 0])
            if mask is bnd:
                straight = ~self.edge_curved[c]
                ref_b = guess
                if (~straight).any():
                    ctrl = self._boundary_ctrl(c[~straight])
                    ref_b[~straight] = newton_inverse(lambda q: p2_map(ctrl, q), x[mask][~straight],
                                                      guess[~straight], self.scale)
                ref[mask] = ref_b
            else:
                ref[mask] = newton_inverse(lambda q: bilinear_map(corners, q), x[mask], guess, self.scale)
        return ref

    def map_to_physical(self, kind: str, index: int, ref_point):
        """单个单元的参考点 → 物理坐标与雅可比

        Args:
            kind: 'tri'（主单元）或 'dual'（对偶单元）
        """
        ref = np.atleast_2d(np.asarray(ref_point, dtype=float))
        idx = np.full(len(ref), int(index))
        if kind == 'tri':
            x, J = self.tri_map(idx, ref)
        elif kind == 'dual':
            x, J = self.dual_map(idx, ref)
        else:
            raise ValueError(f"未知单元类型: {kind}")
        if np.any(np.abs(det2(J)) <= 1e-14 * self.scale ** 2):
            raise MeshGeometryError(f"{kind} 单元 {index} 的雅可比奇异")
        if np.ndim(ref_point) == 1:
            return x[0], J[0]
        return x, J

    def locate(self, points, tol=1e-9):
        """物理点所在的三角形及子三角形编号（即对偶单元 tri_edges[i, l]）

        Returns:
            (tris, locals)，找不到的点为 -1
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(pts)
        k = min(self.n_tri, 16)
        _, cand = cKDTree(self.barycenters).query(pts, k=k)
        cand = np.asarray(cand).reshape(n, -1)
        tris = -np.ones(n, dtype=np.int64)
        for c in range(cand.shape[1]):
            todo = np.flatnonzero(tris < 0)
            if not len(todo):
                break
            idx = cand[todo, c]
            ref = self.tri_inverse(idx, pts[todo])
            lam = np.stack([1.0 - ref.sum(axis=1), ref[:, 0], ref[:, 1]], axis=1)
            inside = lam.min(axis=1) >= -tol
            tris[todo[inside]] = idx[inside]
        locals_ = -np.ones(n, dtype=np.int64)
        found = np.flatnonzero(tris >= 0)
        if len(found):
            b = self.barycenters[tris[found]]
            verts = self.nodes[self.triangles[tris[found]]]
            score = np.empty((len(found), 3))
            for l in range(3):
                va, vc = verts[:, l], verts[:, (l + 1) % 3]
                A = np.stack([va - b, vc - b], axis=-1)
                s = solve2(A, pts[found] - b)
                score[:, l] = np.minimum(np.minimum(s[:, 0], s[:, 1]), 1.0 - s.sum(axis=1))
            locals_[found] = score.argmax(axis=1)
        return tris, locals_

    # ---------------- 积分点 ----------------

    def sub_tri_quadrature(self, order: int) -> QuadratureTable:
        """子三角形 T_{i,j} 上的积分点（三角形坐标系），形状 (N_i,3,Q,2)"""
        rule = quadrature('triangle', order)
        ctrl = self.sub_ctrl.reshape(-1, 6, 2)
        n = len(ctrl)
        ref = np.broadcast_to(rule.points, (n,) + rule.points.shape).reshape(-1, 2)
        x, J = p2_map(np.repeat(ctrl, rule.size, axis=0), ref)
        w = det2(J).reshape(n, rule.size) * rule.weights
        return QuadratureTable(x.reshape(self.n_tri, 3, rule.size, 2), w.reshape(self.n_tri, 3, rule.size))

    def edge_quadrature(self, order: int) -> QuadratureTable:
        """边 Γ_j 上的积分点（边坐标系），法向由 ℓ 指向 r（边界边指向外侧）"""
        rule = quadrature('interval', order)
        t = rule.points[None, :, None]
        n1 = self.nodes[self.edge_nodes[:, 0]][:, None, :]
        n2 = self.nodes[self.edge_nodes[:, 1]][:, None, :]
        m = self.edge_mid[:, None, :]
        x = (1 - t) * (1 - 2 * t) * n1 + 4 * t * (1 - t) * m + t * (2 * t - 1) * n2
        dx = (4 * t - 3) * n1 + (4 - 8 * t) * m + (4 * t - 1) * n2
        ds = np.linalg.norm(dx, axis=2)
        normals = np.stack([dx[..., 1], -dx[..., 0]], axis=-1) / ds[..., None]
        return QuadratureTable(x, ds * rule.weights, normals)

    def face_quadrature(self, order: int) -> QuadratureTable:
        """三角形内部对偶面（重心→顶点）上的积分点，法向由 cell_a 指向 cell_b"""
        rule = quadrature('interval', order)
        faces = self.dual_faces()
        b = self.barycenters[faces['tri']]
        v = self.nodes[self.triangles[faces['tri'], faces['vertex']]]
        d = b - v
        length = np.linalg.norm(d, axis=1)
        t = rule.points[None, :, None]
        x = v[:, None, :] + t * d[:, None, :]
        normal = np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None]
        normals = np.repeat(normal[:, None, :], rule.size, axis=1)
        return QuadratureTable(x, length[:, None] * rule.weights[None, :], normals)

    # ---------------- 统计 ----------------

    @property
    def h_min(self):
        """最小内切圆直径"""
        return float(self.tri_incircle.min())

    def hash(self) -> str:
        h = hashlib.sha1()
        for arr in (self.nodes, self.triangles, self.edge_tag, self.edge_mid):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr(self.periodic_pairs).encode())
        return h.hexdigest()

    def summary(self) -> dict:
        return {
            'N_nodes': len(self.nodes),
            'N_i': self.n_tri,
            'N_j': self.n_edges,
            'interior_edges': int(np.sum(~self.is_boundary)),
            'boundary_edges': int(np.sum(self.is_boundary)),
            'curved_edges': int(self.edge_curved.sum()),
            'boundary_tags': sorted(set(self.edge_tag[self.is_boundary].tolist())),
            'area': float(self.tri_area.sum()),
            'h_min': self.h_min,
            'h_max': float(self.tri_incircle.max()),
            'quality_min': float(self.tri_quality.min()),
            'quality_mean': float(self.tri_quality.mean()),
        }


def load_mesh(path, periodic: Sequence[Tuple[int, int]] = ()) -> StaggeredMesh:
    """读取网格文件并构造交错网格

    扩展名为 .msh 时按 Gmsh 2.2 读取，否则按 STDG-MESH 1 读取。
    Args:
        path: 网格文件路径
        periodic: 周期边界标签对 [(tag_a, tag_b), ...]
    """
    if str(path).lower().endswith(".msh"):
        raw = read_gmsh_mesh(path)
    else:
        raw = read_native_mesh(path)
    logger.info(f"读取网格: {path}")
    return StaggeredMesh(raw, periodic)
