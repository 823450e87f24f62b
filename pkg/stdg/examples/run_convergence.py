"""
收敛性研究示例

在标准网格族上依次运行人造解、Womersley 与 Taylor-Green 三个算例，
打印每一层的 L2 误差与收敛阶并写出 CSV。
"""
import argparse
import os

from rich.console import Console
from rich.table import Table

from stdg.config.settings import PATH_SETTINGS
from stdg.core.cases import CaseSpec, convergence_study
from stdg.core.timeloop import RunConfig
from stdg.examples.make_meshes import make_fixtures
from stdg.utils.logging_utils import get_logger

console = Console()
logger = get_logger("stdg.run_convergence")

# 算例: (网格前缀, 三角形数, 粘度, t_end, 额外参数)
STUDIES = {
    'manufactured': ('square', (40, 160, 640), 0.01, 0.5, {}),
    'womersley': ('channel', (48, 192, 768), 0.05, 1.5, {'convection': False}),
    'taylor_green': ('tg', (40, 160, 640), 0.1, 0.1, {}),
}


def run_study(case_id, p, mesh_dir, out_dir):
    prefix, levels, nu, t_end, extra = STUDIES[case_id]
    paths = [os.path.join(mesh_dir, f"{prefix}_{n}.mesh") for n in levels]
    dt_levels = [t_end / m for m in (6, 12, 24)] if case_id == 'womersley' else None
    spec = CaseSpec(case_id, nu, t_end=t_end)
    cfg = RunConfig(p=p, p_gamma=p, t_end=t_end, case=case_id, nu=nu, bcs=dict(spec.bcs), **extra)
    csv_path = os.path.join(out_dir, f"convergence_{case_id}_p{p}.csv")
    df = convergence_study(cfg, paths, spec, dt_levels, csv_path)

    table = Table(title=f"{case_id} p=p_γ={p}", header_style="bold magenta")
    for col in df.columns:
        table.add_column(col)
    for row in df.itertuples(index=False):
        table.add_row(str(row.N_i), f"{row.eps_p:.4e}", f"{row.eps_v:.4e}",
                      f"{row.sigma_p:.2f}", f"{row.sigma_v:.2f}")
    console.print(table)
    return df


def main():
    parser = argparse.ArgumentParser(description="收敛性研究")
    parser.add_argument("--cases", default=",".join(STUDIES), help="逗号分隔的算例")
    parser.add_argument("--degrees", default="1,2", help="逗号分隔的多项式阶数")
    parser.add_argument("--mesh-dir", default=PATH_SETTINGS['MESH_FOLDER'])
    parser.add_argument("--out", default=PATH_SETTINGS['OUTPUTS_FOLDER'])
    args = parser.parse_args()

    make_fixtures(args.mesh_dir, families=['square', 'channel', 'tg'])
    for case_id in args.cases.split(','):
        for p in (int(d) for d in args.degrees.split(',')):
            logger.info(f"开始收敛性研究: {case_id}, p={p}")
            run_study(case_id, p, args.mesh_dir, args.out)


if __name__ == "__main__":
    main()
