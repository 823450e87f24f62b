"""
全局配置文件
"""

# 离散与求解相关配置
SOLVER_SETTINGS = {
    'MAX_DEGREE': 4,             # 空间/时间多项式最高阶数
    'MAX_QUAD_ORDER': 40,        # 积分规则支持的最高精度
    'INVERSE_RESIDUAL_TOL': 1e-10,  # 更新矩阵求逆残差上限
    'NEWTON_TOL': 1e-13,         # 逆映射牛顿迭代容差
    'NEWTON_MAX_ITER': 30,       # 逆映射牛顿迭代最大次数
    'DUPLICATE_NODE_TOL': 1e-12, # 重复节点判定距离
    'PERIODIC_MATCH_TOL': 1e-8,  # 周期边匹配相对容差
    'CFL_MAX': 0.5,              # CFL 数上限（不含）
    'DIVERGENCE_FACTOR': 10.0,   # 连续性残差检查系数
}

# GMRES 默认参数
GMRES_SETTINGS = {
    'TOL': 1e-10,                # 相对残差目标
    'RESTART': 40,               # 重启长度
    'MAX_ITER': 2000,            # 最大迭代次数
    'REORTH_THRESHOLD': 1e-8,    # 正交性损失超过该值时重新正交化
}

# 路径配置
PATH_SETTINGS = {
    'LOG_DIR': "logs",                       # 日志目录
    'OUTPUTS_FOLDER': "outputs",             # 输出目录
    'MESH_FOLDER': "assets/meshes",          # 网格目录
    'REFERENCE_FOLDER': "assets/reference",  # 参考数据目录
}

# 日志配置
LOG_SETTINGS = {
    'LEVEL': "INFO",
    'FORMAT': '%(asctime)s - %(levelname)s - %(message)s',
    'TO_FILE': True,             # 是否同时写入日志文件
}

# 输出相关配置
OUTPUT_SETTINGS = {
    'VTK_FORMAT': '{:.8e}',      # 9 位有效数字
    'CSV_FORMAT': '%.5e',        # 6 位有效数字
    'CONVERGENCE_HEADER': ["N_i", "eps_p", "eps_v", "sigma_p", "sigma_v"],
}

# 各算例的默认物理参数
CASE_DEFAULTS = {
    'manufactured': {
        'u0': 1.0, 'v0': 1.0, 'p0': 1.0,
        'omega': 6.283185307179586,        # 2π
        'k': 1.5915494309189535,           # 10/(2π)
    },
    'womersley': {
        'P': 1.0,                # P̃/ρ
        'omega': 6.283185307179586,
        'R': 0.2,                # 半高
        'L': 1.0,                # 管长
        'y_b': -0.2,             # 底面 y 坐标
    },
    'taylor_green': {},
    'shear_layer': {
        'delta': 0.05,
        'rho': 30.0,
    },
    'cavity': {
        'lid': 1.0,
        're': 100.0,
    },
    'cylinder': {
        'u_bar': 0.5,
        'diameter': 2.0,
        'probe_x': 4.0,
        'probe_y': 0.0,
    },
}
