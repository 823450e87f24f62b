"""
运行配置文件解析

扁平的 key=value 文本，'#' 开始注释。未知键直接报错，避免拼写错误被静默忽略。
"""
import os
from typing import Tuple

from stdg.config.settings import CASE_DEFAULTS, GMRES_SETTINGS
from stdg.core.assembly import parse_boundary_condition
from stdg.core.cases import CaseSpec, default_boundary_conditions
from stdg.core.linsolve import KrylovConfig
from stdg.core.timeloop import RunConfig
from stdg.utils.errors import ConfigError

REQUIRED_KEYS = ('case', 'mesh', 'p', 'p_gamma', 't_end')

INT_KEYS = ('p', 'p_gamma', 'n_picard', 'gmres_restart', 'output_every', 'max_steps')
FLOAT_KEYS = ('nu', 'cfl', 'dt_fixed', 't_end', 'gmres_tol')
STR_KEYS = ('case', 'mesh', 'init_guess', 'output_prefix', 'step_log', 'dump_operators', 'convection')


def _read_pairs(path):
    if not os.path.exists(path):
        raise ConfigError(f"找不到配置文件: {path}")
    pairs = {}
    with open(path, 'r', encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition('=')
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise ConfigError(f"{path}:{lineno}: 需要 key=value 形式: {line}")
            if key in pairs:
                raise ConfigError(f"{path}:{lineno}: 重复的键 {key}")
            pairs[key] = (value, lineno)
    return pairs


def _convert(key, value, lineno, kind):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"第 {lineno} 行: 键 {key} 的值不是{'整数' if kind is int else '数值'}: {value}")


def _parse_switch(value, lineno):
    low = value.lower()
    if low in ('on', 'true', 'yes', '1'):
        return True
    if low in ('off', 'false', 'no', '0'):
        return False
    raise ConfigError(f"第 {lineno} 行: convection 只能是 on/off: {value}")


def parse_config(path) -> Tuple[RunConfig, CaseSpec]:
    """读取并校验运行配置

    Returns:
        (RunConfig, CaseSpec)
    """
    pairs = _read_pairs(path)
    scalars, bcs, params = {}, {}, {}
    for key, (value, lineno) in pairs.items():
        if key.startswith('bc.'):
            tag = key[3:]
            if not tag.isdigit():
                raise ConfigError(f"第 {lineno} 行: 边界标签必须是正整数: {key}")
            bcs[int(tag)] = parse_boundary_condition(value)
        elif key.startswith('param.'):
            params[key[6:]] = _convert(key, value, lineno, float)
        elif key in INT_KEYS:
            scalars[key] = _convert(key, value, lineno, int)
        elif key in FLOAT_KEYS:
            scalars[key] = _convert(key, value, lineno, float)
        elif key == 'convection':
            scalars[key] = _parse_switch(value, lineno)
        elif key in STR_KEYS:
            scalars[key] = value
        else:
            raise ConfigError(f"第 {lineno} 行: 未知的配置键 {key}")

    missing = [k for k in REQUIRED_KEYS if k not in scalars]
    if missing:
        raise ConfigError(f"配置缺少必需的键: {', '.join(missing)}")

    case = scalars['case']
    if case not in CASE_DEFAULTS:
        raise ConfigError(f"未知算例: {case}（可选 {', '.join(CASE_DEFAULTS)}）")
    if 'nu' not in scalars:
        if case == 'cavity':
            re_number = params.get('re', CASE_DEFAULTS['cavity']['re'])
            scalars['nu'] = 1.0 / re_number
        else:
            raise ConfigError("配置缺少必需的键: nu")

    mesh = scalars['mesh']
    if '{n}' not in mesh and not os.path.isabs(mesh):
        base = os.path.dirname(os.path.abspath(path))
        if not os.path.exists(mesh) and os.path.exists(os.path.join(base, mesh)):
            mesh = os.path.join(base, mesh)

    if not bcs:
        bcs = default_boundary_conditions(case, {**CASE_DEFAULTS[case], **params})

    tol = scalars.get('gmres_tol', GMRES_SETTINGS['TOL'])
    restart = scalars.get('gmres_restart', GMRES_SETTINGS['RESTART'])
    if tol <= 0 or restart < 1:
        raise ConfigError("gmres_tol 必须为正，gmres_restart 必须 ≥ 1")
    krylov = KrylovConfig(tol=tol, restart=restart)

    cfg = RunConfig(
        p=scalars['p'], p_gamma=scalars['p_gamma'], t_end=scalars['t_end'],
        cfl=scalars.get('cfl', 0.4), n_picard=scalars.get('n_picard'),
        dt_fixed=scalars.get('dt_fixed'), krylov=krylov,
        init_guess=scalars.get('init_guess', 'zero'), case=case, mesh=mesh, bcs=bcs,
        params=params, nu=scalars['nu'], convection=scalars.get('convection'),
        output_prefix=scalars.get('output_prefix', ''), output_every=scalars.get('output_every', 0),
        step_log=scalars.get('step_log', ''), max_steps=scalars.get('max_steps', 0),
        dump_operators=scalars.get('dump_operators', ''),
    )
    spec = CaseSpec(case, cfg.nu, dict(params), dict(bcs), cfg.t_end)
    return cfg, spec
