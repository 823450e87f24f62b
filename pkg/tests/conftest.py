"""
测试公共夹具：在 tmp_path 中生成结构化网格
"""
import math
import os

import pytest

from stdg.config.settings import LOG_SETTINGS

# 测试中不写日志文件
LOG_SETTINGS['TO_FILE'] = False

from stdg.core.assembly import BoundaryCondition, assemble_operators, periodic_pairs  # noqa: E402
from stdg.core.basis import SpaceTimeBasis  # noqa: E402
from stdg.core.mesh import load_mesh, save_mesh  # noqa: E402
from stdg.examples.make_meshes import rectangle_mesh, two_triangles_mesh  # noqa: E402

PERIODIC_BCS = {1: BoundaryCondition('periodic', partner=3), 3: BoundaryCondition('periodic', partner=1),
                2: BoundaryCondition('periodic', partner=4), 4: BoundaryCondition('periodic', partner=2)}
WALL_BCS = {tag: BoundaryCondition('wall') for tag in (1, 2, 3, 4)}


def write_rectangle(directory, name, nx, ny, bounds=(0.0, 1.0, 0.0, 1.0)):
    path = os.path.join(str(directory), name)
    save_mesh(path, *rectangle_mesh(nx, ny, bounds))
    return path


def build_ops(mesh_path, p=1, p_gamma=1, bcs=None, nu=0.0, dt=0.1):
    bcs = WALL_BCS if bcs is None else bcs
    mesh = load_mesh(mesh_path, periodic_pairs(bcs))
    return assemble_operators(mesh, SpaceTimeBasis(p, p_gamma), dt, bcs, nu, threads=1)


@pytest.fixture
def two_triangles_path(tmp_path):
    path = os.path.join(str(tmp_path), "two_triangles.mesh")
    save_mesh(path, *two_triangles_mesh())
    return path


@pytest.fixture
def square_path(tmp_path):
    """[-0.5, 0.5]² 上 40 个三角形"""
    return write_rectangle(tmp_path, "square_40.mesh", 5, 4, (-0.5, 0.5, -0.5, 0.5))


@pytest.fixture
def periodic_square_path(tmp_path):
    """[0, 2π]² 上 32 个三角形，用于周期边界"""
    return write_rectangle(tmp_path, "periodic_32.mesh", 4, 4, (0.0, 2 * math.pi, 0.0, 2 * math.pi))


@pytest.fixture
def periodic_ops(periodic_square_path):
    return build_ops(periodic_square_path, 1, 1, PERIODIC_BCS, nu=0.1, dt=0.05)
