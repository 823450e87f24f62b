"""
圆柱绕流 Re=100 的 Strouhal 数

长时间计算（t_end=300），探针记录尾迹中的横向速度，FFT 取主频。
"""
import argparse
import os

import pandas as pd
from rich.console import Console

from stdg.config.settings import PATH_SETTINGS
from stdg.core.cases import CaseSpec, build_case_simulation, sample_velocity, strouhal_number
from stdg.core.timeloop import RunConfig
from stdg.examples.make_meshes import write_annulus
from stdg.utils.file_utils import write_table_csv
from stdg.utils.logging_utils import get_logger

console = Console()
logger = get_logger("stdg.cylinder")


def run_cylinder(mesh_path, p=2, t_end=300.0, discard=0.5, out_dir=None):
    spec = CaseSpec('cylinder', 0.01, t_end=t_end)
    prm = spec.params
    cfg = RunConfig(p=p, p_gamma=p, t_end=t_end, case='cylinder', nu=spec.nu, bcs=dict(spec.bcs),
                    init_guess='extrapolate')
    sim = build_case_simulation(cfg, spec)
    probe = [(prm['probe_x'], prm['probe_y'])]
    times, values = [], []

    def on_step(state, report):
        times.append(report.t)
        values.append(float(sample_velocity(sim.ops, state, probe)[0, 1]))

    sim.run(on_step=on_step)
    if out_dir:
        write_table_csv(os.path.join(out_dir, "cylinder_probe.csv"), pd.DataFrame({'t': times, 'v': values}))
    return strouhal_number(times, values, prm['diameter'], prm['u_bar'], discard)


def main():
    parser = argparse.ArgumentParser(description="圆柱绕流 Strouhal 数")
    parser.add_argument("--p", type=int, default=2)
    parser.add_argument("--t-end", type=float, default=300.0)
    parser.add_argument("--out", default=PATH_SETTINGS['OUTPUTS_FOLDER'])
    args = parser.parse_args()

    mesh_path = write_annulus(os.path.join(PATH_SETTINGS['MESH_FOLDER'], "cylinder.mesh"))
    st, f = run_cylinder(mesh_path, args.p, args.t_end, out_dir=args.out)
    style = "green" if 0.155 <= st <= 0.175 else "red"
    console.print(f"[{style}]Strouhal 数 St = {st:.4f}（主频 f = {f:.5f}）")


if __name__ == "__main__":
    main()
