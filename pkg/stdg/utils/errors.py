"""
异常类型定义模块
"""


class StdgError(Exception):
    """求解器所有异常的基类"""


class MeshParseError(StdgError):
    """网格文件格式错误"""


class MeshTopologyError(StdgError):
    """网格拓扑错误（非流形边、孤立节点等）"""


class MeshGeometryError(StdgError):
    """网格几何错误（零面积三角形、重复节点、非凸对偶单元等）"""


class BasisError(StdgError):
    """基函数或积分规则参数不受支持"""


class AssemblyError(StdgError):
    """单元矩阵组装失败"""


class SingularMatrixError(AssemblyError):
    """矩阵奇异或求逆残差过大"""


class SolverError(StdgError):
    """线性求解或时间推进失败"""


class ConvergenceError(SolverError):
    """GMRES 未在最大迭代次数内收敛"""


class ConfigError(StdgError):
    """配置文件错误"""


class CaseError(StdgError):
    """算例不支持所请求的操作"""
