"""Run the biased diode once per wall model and compare the end states.

Diffusive walls thermalize grazing particles, so the channel piles up
density near the walls and the mean energy drops relative to mirror
walls.  Prints a small table, one row per wall model.
"""
import argparse

import numpy as np

from bpdg.device_config_io import build_simulation, parse_config
from bpdg.observables import moment_fields

BASE = """
[bc]
ymin = {wall}
ymax = {wall}
x = neutral
[time]
t_end_ps = {t_end}
[collisions]
mode = full
"""


def one_run(wall, t_end):
    built = build_simulation(parse_config(BASE.format(wall=wall,
                                                      t_end=t_end)))
    sim = built.sim
    res = sim.run(t_end)
    mf = moment_fields(res.state, sim.tables, sim.consts)
    wall_rows = 0.5 * (np.mean(mf.rho[:, 0]) + np.mean(mf.rho[:, -1]))
    mid = np.mean(mf.rho[:, mf.rho.shape[1] // 2])
    return {
        "wall_rho": wall_rows,
        "mid_rho": mid,
        "energy": float(np.mean(mf.energy)),
        "vx": float(np.mean(mf.Vx)),
        "residual": res.wall_residual_max,
        "steps": res.n_steps,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-end", type=float, default=1.0)
    ap.add_argument("--walls", default="specular,diffusive,mixed:0.5")
    args = ap.parse_args()

    print(f"{'wall':>12}  {'rho(wall)':>11}  {'rho(mid)':>11}  "
          f"{'<w> [kT]':>9}  {'<Vx>':>10}  {'flux resid':>10}")
    for wall in args.walls.split(","):
        r = one_run(wall.strip(), args.t_end)
        print(f"{wall:>12}  {r['wall_rho']:11.5e}  {r['mid_rho']:11.5e}  "
              f"{r['energy']:9.4f}  {r['vx']:10.3e}  {r['residual']:10.2e}")


if __name__ == "__main__":
    main()
