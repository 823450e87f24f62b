"""
stdg 命令行入口

    solve <config>                         运行一个算例，按 output_every 写 VTK 快照
    convergence <config> --levels 40,160   收敛性研究，写 CSV 表
    mesh-info <mesh>                       网格统计
"""
import argparse
import os
import sys
import time
from datetime import datetime

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from stdg.config.settings import PATH_SETTINGS
from stdg.core.assembly import parse_boundary_condition, periodic_pairs
from stdg.core.cases import build_case_simulation, convergence_study, l2_error
from stdg.core.mesh import load_mesh
from stdg.core.timeloop import kinetic_energy, max_vorticity
from stdg.utils.config_parser import parse_config
from stdg.utils.errors import ConfigError, StdgError
from stdg.utils.logging_utils import get_logger, set_level
from stdg.utils.parallel import worker_count
from stdg.utils.vtk_writer import write_vtk

# 创建rich控制台对象
console = Console()
logger = get_logger("stdg.main")


class UsageError(Exception):
    """命令行用法错误，退出码 2"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="stdg", description="交错半隐式时空 DG 不可压 Navier-Stokes 求解器")
    parser.add_argument("--log-level", default=None, help="日志级别 DEBUG/INFO/WARNING")
    parser.add_argument("--threads", type=int, default=None, help="工作线程数（默认读取 STDG_THREADS）")
    sub = parser.add_subparsers(dest="command")

    solve = sub.add_parser("solve", help="运行一个算例")
    solve.add_argument("config", help="key=value 配置文件")

    conv = sub.add_parser("convergence", help="收敛性研究")
    conv.add_argument("config", help="key=value 配置文件，mesh 中的 {n} 替换为三角形数")
    conv.add_argument("--levels", required=True, help="逗号分隔的三角形数，如 40,160,640")
    conv.add_argument("--dt-levels", default=None, help="逗号分隔的每层固定步长（不计对流或速度为零时生效）")
    conv.add_argument("--csv", default=None, help="输出 CSV 路径")

    info = sub.add_parser("mesh-info", help="网格统计")
    info.add_argument("mesh", help="网格文件")
    info.add_argument("--periodic", default="", help="周期标签对，如 1:3,2:4")
    return parser


def _parse_list(text, kind, name):
    try:
        values = [kind(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise UsageError(f"{name} 必须是逗号分隔的数值列表: {text}")
    return values


def _snapshot_path(prefix, step):
    return f"{prefix}_{step:05d}.vtk"


def print_run_summary(sim, state, spec, steps, elapsed, snapshots):
    """打印运行总结表"""
    table = Table(title="运行统计", show_header=True, header_style="bold magenta")
    table.add_column("项目", style="cyan")
    table.add_column("数值", style="green")
    table.add_row("算例", spec.case_id)
    table.add_row("N_i / N_j", f"{sim.mesh.n_tri} / {sim.mesh.n_edges}")
    table.add_row("p / p_γ", f"{sim.cfg.p} / {sim.cfg.p_gamma}")
    table.add_row("时间步数", str(steps))
    table.add_row("终止时刻", f"{state.t + state.dt:.6e}")
    table.add_row("动能", f"{kinetic_energy(state, sim.ops):.6e}")
    table.add_row("最大涡量", f"{max_vorticity(state, sim.ops):.6e}")
    if spec.has_exact:
        eps_p, eps_v = l2_error(state, sim.ops, spec)
        table.add_row("ε(p) / ε(v)", f"{eps_p:.5e} / {eps_v:.5e}")
    table.add_row("VTK 快照", str(snapshots))
    table.add_row("计算用时", f"{elapsed:.2f} 秒")
    table.add_row("完成时间", datetime.now().strftime("%Y-%m-%d %H:%M:%S"))
    console.print(Panel(table, title="计算完成", border_style="green"))


def cmd_solve(args):
    cfg, spec = parse_config(args.config)
    if '{n}' in cfg.mesh:
        raise ConfigError("solve 需要具体的网格路径（mesh 中不能含 {n}）")
    start = time.time()
    sim = build_case_simulation(cfg, spec, threads=args.threads)
    state = sim.initial_state()
    written = []

    if cfg.output_prefix:
        written.append(write_vtk(state, sim.ops, _snapshot_path(cfg.output_prefix, 0)))

    def on_step(current, report):
        if cfg.output_prefix and cfg.output_every and report.step % cfg.output_every == 0:
            written.append(write_vtk(current, sim.ops, _snapshot_path(cfg.output_prefix, report.step)))

    state = sim.run(state, on_step=on_step)
    steps = len(sim.reports)
    if cfg.output_prefix and steps and not (cfg.output_every and steps % cfg.output_every == 0):
        written.append(write_vtk(state, sim.ops, _snapshot_path(cfg.output_prefix, steps)))
    print_run_summary(sim, state, spec, steps, time.time() - start, len(written))
    return 0


def cmd_convergence(args):
    levels = _parse_list(args.levels, int, "--levels")
    if len(levels) < 2:
        raise UsageError("收敛性研究至少需要 2 层网格（--levels）")
    dt_levels = _parse_list(args.dt_levels, float, "--dt-levels") if args.dt_levels else None
    cfg, spec = parse_config(args.config)
    if '{n}' not in cfg.mesh:
        raise ConfigError("收敛性研究的 mesh 路径必须包含 {n} 占位符")
    paths = [cfg.mesh.replace('{n}', str(n)) for n in levels]
    csv_path = args.csv or os.path.join(PATH_SETTINGS['OUTPUTS_FOLDER'],
                                        f"convergence_{spec.case_id}_p{cfg.p}.csv")
    df = convergence_study(cfg, paths, spec, dt_levels, csv_path, threads=args.threads)

    table = Table(title=f"{spec.case_id} 收敛性 (p={cfg.p}, p_γ={cfg.p_gamma})",
                  show_header=True, header_style="bold magenta")
    for col in df.columns:
        table.add_column(col, style="cyan" if col == "N_i" else "green")
    for row in df.itertuples(index=False):
        table.add_row(str(row.N_i), *(f"{value:.4e}" if name.startswith('eps') else f"{value:.2f}"
                                     for name, value in zip(df.columns[1:], row[1:])))
    console.print(Panel(table, title="收敛性研究完成", border_style="green"))
    console.print(f"[green]CSV 已写入: {os.path.abspath(csv_path)}")
    return 0


def cmd_mesh_info(args):
    bcs = {}
    for item in filter(None, args.periodic.split(',')):
        a, sep, b = item.partition(':')
        if not sep or not a.strip().isdigit() or not b.strip().isdigit():
            raise UsageError(f"--periodic 需要 a:b 形式的标签对: {item}")
        bcs[int(a)] = parse_boundary_condition(f"periodic:{int(b)}")
        bcs[int(b)] = parse_boundary_condition(f"periodic:{int(a)}")
    mesh = load_mesh(args.mesh, periodic_pairs(bcs))
    summary = mesh.summary()
    table = Table(title=os.path.basename(args.mesh), show_header=True, header_style="bold magenta")
    table.add_column("项目", style="cyan")
    table.add_column("数值", style="green")
    for key, value in summary.items():
        table.add_row(key, f"{value:.6e}" if isinstance(value, float) else str(value))
    console.print(Panel(table, title="网格信息", border_style="blue"))
    return 0


COMMANDS = {
    'solve': cmd_solve,
    'convergence': cmd_convergence,
    'mesh-info': cmd_mesh_info,
}


def run_cli(argv=None) -> int:
    """命令行入口，返回退出码：0 成功，1 运行错误，2 用法错误"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("需要子命令: solve / convergence / mesh-info")
        if args.log_level:
            set_level(args.log_level)
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads 必须 ≥ 1")
        args.threads = args.threads or worker_count()
        return COMMANDS[args.command](args)
    except UsageError as e:
        console.print(f"[yellow]用法错误: {e}")
        console.print(parser.format_usage().strip())
        return 2
    except (StdgError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        console.print(f"[red]错误: {e}")
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
