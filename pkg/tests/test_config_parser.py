"""
配置文件解析
"""
import os

import pytest

from stdg.utils.config_parser import parse_config
from stdg.utils.errors import ConfigError

MINIMAL = """# Taylor-Green
case = taylor_green
mesh = tg_{n}.mesh
p = 2
p_gamma = 1
nu = 0.1
t_end = 0.5
"""


def _write(tmp_path, text, name="run.cfg"):
    path = os.path.join(str(tmp_path), name)
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write(text)
    return path


def test_minimal_config(tmp_path):
    cfg, spec = parse_config(_write(tmp_path, MINIMAL))
    assert cfg.p == 2 and cfg.p_gamma == 1
    assert cfg.n_picard == 3
    assert cfg.cfl == pytest.approx(0.4)
    assert cfg.init_guess == 'zero'
    assert cfg.mesh == 'tg_{n}.mesh'
    assert cfg.bcs[1].kind == 'periodic' and cfg.bcs[1].partner == 3
    assert spec.case_id == 'taylor_green' and spec.nu == pytest.approx(0.1)


def test_full_config(tmp_path):
    mesh = _write(tmp_path, "", "square.mesh")
    text = ("case = manufactured\nmesh = square.mesh\np = 1\np_gamma = 1\nnu = 0.01\nt_end = 0.1\n"
            "cfl = 0.3  # 注释\nn_picard = 4\ngmres_tol = 1e-12\ngmres_restart = 20\n"
            "init_guess = extrapolate\ndt_fixed = 0.001\nbc.1 = pressure\nbc.2 = outflow:0.5\n"
            "bc.3 = inflow:2\nbc.4 = wall\nparam.omega = 3.0\noutput_every = 5\nconvection = off\n")
    cfg, spec = parse_config(_write(tmp_path, text))
    assert cfg.mesh == mesh
    assert cfg.n_picard == 4 and cfg.cfl == pytest.approx(0.3)
    assert cfg.krylov.tol == pytest.approx(1e-12) and cfg.krylov.restart == 20
    assert cfg.bcs[2].value == pytest.approx(0.5)
    assert cfg.bcs[3].kind == 'inflow' and cfg.bcs[3].value == pytest.approx(2.0)
    assert spec.params['omega'] == pytest.approx(3.0)
    assert spec.params['k'] == pytest.approx(10 / (2 * 3.141592653589793))
    assert cfg.convection is False
    assert spec.physics(cfg.convection).convection is False


def test_cavity_viscosity_from_reynolds(tmp_path):
    text = "case = cavity\nmesh = cavity.mesh\np = 1\np_gamma = 1\nt_end = 1\nparam.re = 400\n"
    cfg, spec = parse_config(_write(tmp_path, text))
    assert cfg.nu == pytest.approx(1 / 400)
    assert spec.bcs[3].kind == 'lid'


@pytest.mark.parametrize("extra, message", [
    ("cfl = 0.6\n", "cfl"),
    ("nuu = 0.1\n", "nuu"),
    ("param.alpha = 1\n", "alpha"),
    ("p = 3\n", "重复"),
    ("bc.x = wall\n", "bc.x"),
    ("bc.1 = slip\n", "slip"),
    ("gmres_tol = -1\n", "gmres_tol"),
    ("init_guess = random\n", "init_guess"),
    ("convection = maybe\n", "convection"),
    ("max_steps = many\n", "max_steps"),
    ("this line has no equals sign\n", "key=value"),
])
def test_invalid_config(tmp_path, extra, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(_write(tmp_path, MINIMAL + extra))


def test_missing_keys(tmp_path):
    with pytest.raises(ConfigError, match="t_end"):
        parse_config(_write(tmp_path, MINIMAL.replace("t_end = 0.5\n", "")))
    with pytest.raises(ConfigError, match="nu"):
        parse_config(_write(tmp_path, MINIMAL.replace("nu = 0.1\n", "")))
    with pytest.raises(ConfigError):
        parse_config(os.path.join(str(tmp_path), "missing.cfg"))


def test_unknown_case(tmp_path):
    with pytest.raises(ConfigError, match="未知算例"):
        parse_config(_write(tmp_path, MINIMAL.replace("taylor_green", "backward_step")))


def test_lowest_degrees_accepted(tmp_path):
    text = MINIMAL.replace("p = 2\n", "p = 0\n").replace("p_gamma = 1\n", "p_gamma = 0\n")
    cfg, _ = parse_config(_write(tmp_path, text))
    assert cfg.p == 0 and cfg.p_gamma == 0
    assert cfg.n_picard == 1
    with pytest.raises(ConfigError, match="p_gamma"):
        parse_config(_write(tmp_path, MINIMAL.replace("p_gamma = 1\n", "p_gamma = 5\n")))
