import json
import math

import numpy as np
import pytest

from bpdg.device_config_io import (CSV_COLUMNS, ConfigError, build_simulation,
                                   config_echo, load_config, main,
                                   parse_config, read_moments_csv,
                                   run_from_config, write_moments_csv,
                                   _project_doping)
from bpdg.material_band import MaterialParams, nondimensionalize
from bpdg.observables import MomentFields
from bpdg.phase_grid import GridConfig, build_grid
from bpdg.poisson_ldg import FieldState

TINY = """
[grid]
nx = 6
ny = 4
nw = 8
nmu = 4
nphi = 4
[time]
t_end_ps = 0.003
[output]
snapshots = 0.0,0.003
"""


def test_defaults():
    cfg = parse_config("")
    assert cfg.kind == "bulk_diode"
    assert (cfg.Lx_um, cfg.Ly_um) == (0.15, 0.012)
    assert (cfg.Nx, cfg.Ny, cfg.Nw, cfg.Nmu, cfg.Nphi) == (24, 12, 20, 8, 8)
    assert cfg.w_max is None                      # auto
    assert cfg.bc_ymin == ("specular", None)
    assert cfg.bc_ymax == ("specular", None)
    assert cfg.bc_x == "neutral"
    assert (cfg.source_V, cfg.drain_V, cfg.gate_V) == (0.5235, 1.5235, 1.06)
    assert cfg.doping_background_m3 == 1.0e24
    assert cfg.doping_regions == ()
    assert (cfg.t_end_ps, cfg.cfl, cfg.dt_ps) == (1.0, 0.2, None)
    assert cfg.collision_mode == "full"
    assert cfg.snapshot_times is None
    assert cfg.vtk is False


def test_unknown_section_and_key():
    with pytest.raises(ConfigError, match=r"\[widgets\]"):
        parse_config("[widgets]\nn = 3\n")
    with pytest.raises(ConfigError, match="grid.npoints"):
        parse_config("[grid]\nnpoints = 3\n")
    with pytest.raises(ConfigError, match="grid.nx"):
        parse_config("[grid]\nnx = many\n")


@pytest.mark.parametrize("raw,expect", [
    ("specular", ("specular", None)),
    ("diffusive", ("diffusive", None)),
    ("mixed:0.25", ("mixed", 0.25)),
    ("mixed:0", ("mixed", 0.0)),
    ("mixed:1.0", ("specular", None)),   # no diffusive channel left
    ("soffer:0.5", ("soffer", 0.5)),
])
def test_bc_string_forms(raw, expect):
    cfg = parse_config(f"[bc]\nymax = {raw}\n")
    assert cfg.bc_ymax == expect


@pytest.mark.parametrize("raw", [
    "bounce", "mixed:", "mixed:nan", "mixed:1.5", "mixed:-0.1",
    "soffer:0", "soffer:-2", "soffer:x",
])
def test_bad_bc_strings(raw):
    with pytest.raises(ConfigError, match="bc.ymax"):
        parse_config(f"[bc]\nymax = {raw}\n")


def test_grid_validation():
    with pytest.raises(ConfigError, match="nphi must be even"):
        parse_config("[grid]\nnphi = 5\n")
    with pytest.raises(ConfigError, match="nmu must be even"):
        parse_config("[grid]\nnmu = 5\n")
    with pytest.raises(ConfigError, match="at least 2"):
        parse_config("[grid]\nnx = 1\n")
    with pytest.raises(ConfigError, match="w_max"):
        parse_config("[grid]\nw_max = tall\n")
    assert parse_config("[grid]\nw_max = 12.5\n").w_max == 12.5


def test_region_parsing():
    cfg = parse_config("[doping]\nregions = 0,0.05,0,0.012,5e25 ; "
                       "0.1,0.15,0,0.012,5e25\n")
    assert len(cfg.doping_regions) == 2
    assert cfg.doping_regions[0] == (0.0, 0.05, 0.0, 0.012, 5e25)
    for bad in ("0,0.05,0,0.012", "0,0.05,0,0.012,abc",
                "0.05,0.05,0,0.012,1e25", "0,0.05,0,0.012,-1e25",
                "0.2,0.3,0,0.012,1e25"):
        with pytest.raises(ConfigError, match="doping.regions"):
            parse_config(f"[doping]\nregions = {bad}\n")


def test_snapshot_parsing():
    assert parse_config("[output]\nsnapshots = end\n").snapshot_times is None
    cfg = parse_config("[output]\nsnapshots = 0.6,0.2\n")
    assert cfg.snapshot_times == (0.2, 0.6)
    for bad in ("0.2,0.2", "-0.1", "2.5", "0.1,oops"):
        with pytest.raises(ConfigError, match="output.snapshots"):
            parse_config(f"[output]\nsnapshots = {bad}\n")


def test_time_validation():
    with pytest.raises(ConfigError, match="t_end_ps"):
        parse_config("[time]\nt_end_ps = 0\n")
    with pytest.raises(ConfigError, match="cfl"):
        parse_config("[time]\ncfl = 0.5\n")
    with pytest.raises(ConfigError, match="dt_ps"):
        parse_config("[time]\ndt_ps = -1\n")
    assert parse_config("[time]\ndt_ps = 1e-4\n").dt_ps == 1e-4


def test_dgmosfet_requirements():
    base = "[device]\nkind = dgmosfet\n"
    with pytest.raises(ConfigError, match="gate_x0_um"):
        parse_config(base)
    full = (base + "gate_x0_um = 0.05\ngate_x1_um = 0.10\n"
            "[doping]\nregions = 0,0.04,0,0.012,5e25\n")
    cfg = parse_config(full)
    assert cfg.gate_x_um == (0.05, 0.10)
    with pytest.raises(ConfigError, match="gate_x"):
        parse_config(base + "gate_x0_um = 0.10\ngate_x1_um = 0.05\n"
                     "[doping]\nregions = 0,0.04,0,0.012,5e25\n")
    with pytest.raises(ConfigError, match="symmetry plane"):
        parse_config(full + "[bc]\nymin = diffusive\n")
    with pytest.raises(ConfigError, match="source/drain"):
        parse_config(base + "gate_x0_um = 0.05\ngate_x1_um = 0.10\n")


def test_config_echo_round_trip():
    text = """
[device]
kind = bulk_diode
lx_um = 0.2
[grid]
nw = 12
w_max = 29.24338566630621
[bc]
ymin = mixed:0.3
ymax = mixed:0.3
x = periodic
[doping]
regions = 0,0.05,0,0.012,5e25 ; 0.15,0.2,0,0.012,5e25
[time]
dt_ps = 0.0002
[output]
snapshots = 0.25,0.75
vtk = true
"""
    cfg = parse_config(text)
    assert parse_config(config_echo(cfg)) == cfg
    # and the echo of a pure-defaults config round-trips too
    cfg0 = parse_config("")
    assert parse_config(config_echo(cfg0)) == cfg0


def test_load_config_missing(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.ini")


def test_build_defaults():
    built = build_simulation(parse_config(TINY))
    sim = built.sim
    g = sim.grid
    assert (g.Nx, g.Ny, g.Nw) == (6, 4, 8)
    assert np.isclose(g.w_max, 8 * built.consts.gamma, rtol=1e-14)
    assert sim.bc_ymin == "specular" and sim.bc_x == "neutral"
    assert sim.collision is not None and sim.collision.active
    assert sim.poisson is not None
    # background doping in scaled units
    assert np.allclose(sim.doping[0], 0.009883669666496541, rtol=1e-12)


def test_build_soffer_maps_to_blended_wall():
    built = build_simulation(parse_config(
        TINY + "[bc]\nymin = soffer:0.5\nymax = soffer:0.5\n"))
    assert built.sim.bc_ymin == "mixed"
    assert built.sim.bc_ymax == "mixed"
    assert built.sim.tables.p_bar is not None


def test_build_mixed_p0_matches_diffusive_kind():
    built = build_simulation(parse_config(
        TINY + "[bc]\nymin = mixed:0.4\nymax = mixed:0.4\n"))
    assert built.sim.bc_ymin == "mixed"
    assert built.sim.tables.p_bar is not None
    assert np.allclose(built.sim.tables.p_bar, 0.4)


def test_build_rejects_conflicting_wall_models():
    with pytest.raises(ConfigError, match="one specularity model"):
        build_simulation(parse_config(
            TINY + "[bc]\nymin = mixed:0.3\nymax = soffer:0.5\n"))
    with pytest.raises(ConfigError, match="one specularity model"):
        build_simulation(parse_config(
            TINY + "[bc]\nymin = mixed:0.3\nymax = mixed:0.4\n"))


def test_build_rejects_misaligned_wmax_for_active_collisions():
    # the mesh alignment failure surfaces as a config error, and only
    # collision-free runs may use an unaligned energy cut-off
    grid = "[grid]\nnx = 6\nny = 4\nnw = 8\nnmu = 4\nnphi = 4\nw_max = 7.0\n"
    for mode in ("full", "elastic"):
        with pytest.raises(ConfigError, match="gamma"):
            build_simulation(parse_config(
                grid + f"[collisions]\nmode = {mode}\n"))
    ok = build_simulation(parse_config(grid + "[collisions]\nmode = off\n"))
    assert ok.sim.collision is None


def test_project_doping_exact_overlap():
    g = build_grid(GridConfig(Nx=4, Ny=2, Nw=2, Nmu=2, Nphi=2,
                              Lx=1.0, Ly=1.0, w_max=2.0, gamma=None,
                              require_gamma_alignment=False))
    # region = right half of cell 1, all of y
    T, X, Y = _project_doping(g, 1.0, (((0.375, 0.5, 0.0, 1.0, 3.0),)))
    assert np.allclose(T[0], 1.0) and np.allclose(T[2:], 1.0)
    assert np.allclose(T[1], 1.0 + 2.0 * 0.5)      # half the cell
    assert np.allclose(X[1], 2.0 * 0.75)           # slope of a half step
    assert np.allclose(Y, 0.0)
    # full-cell region reproduces the plateau exactly
    T2, X2, Y2 = _project_doping(g, 1.0, (((0.25, 0.75, 0.0, 1.0, 3.0),)))
    assert np.allclose(T2[1:3], 3.0) and np.allclose(X2[1:3], 0.0)


def test_moments_csv_round_trip(tmp_path):
    g = build_grid(GridConfig(Nx=2, Ny=2, Nw=2, Nmu=2, Nphi=2,
                              Lx=1.0, Ly=0.5, w_max=2.0, gamma=None,
                              require_gamma_alignment=False))
    consts = nondimensionalize(MaterialParams())
    rng = np.random.default_rng(3)
    arrs = [rng.uniform(0.1, 1.0, (2, 2)) for _ in range(6)]
    mf = MomentFields(rho=arrs[0], Ux=arrs[1], Uy=arrs[2],
                      energy=arrs[3], Vx=arrs[4], Vy=arrs[5])
    fld = FieldState.zeros(2, 2)
    fld.ExT[:] = 1.5
    fld.PsiT[:] = 0.75
    path = tmp_path / "m.csv"
    write_moments_csv(path, [(0.5, mf, fld)], g, consts)
    cols = read_moments_csv(path)
    assert tuple(cols.keys()) == CSV_COLUMNS
    assert len(cols["t_ps"]) == 4
    assert np.all(cols["t_ps"] == 0.5)
    # row order: x outer, y inner
    assert np.allclose(cols["x_um"], np.repeat(g.x_centers, 2))
    assert np.allclose(cols["y_um"], np.tile(g.y_centers, 2))
    dens = consts.density_prefactor_m3
    assert np.allclose(cols["rho_cm3"], arrs[0].ravel() * dens * 1e-6,
                       rtol=1e-16)
    assert np.allclose(cols["energy_eV"], arrs[3].ravel() * consts.kT_eV,
                       rtol=1e-16)
    assert np.allclose(cols["Vx_cms"], arrs[4].ravel() * 1e8, rtol=1e-16)
    assert np.all(cols["Ex_kVcm"] == 15.0)
    assert np.all(cols["V_volts"] == 0.75)


TINY_VTK = """
[grid]
nx = 6
ny = 4
nw = 8
nmu = 4
nphi = 4
[time]
t_end_ps = 0.003
[output]
snapshots = 0.0,0.003
vtk = true
"""


def test_run_from_config_outputs(tmp_path):
    cfg = parse_config(TINY_VTK)
    res = run_from_config(cfg, tmp_path)
    assert res.t == cfg.t_end_ps
    for name in ("moments.csv", "mass.csv", "config_echo.ini", "meta.json",
                 "moments_000.vtk", "moments_001.vtk"):
        assert (tmp_path / name).exists(), name

    cols = read_moments_csv(tmp_path / "moments.csv")
    assert len(cols["t_ps"]) == 2 * 6 * 4          # two snapshots
    assert set(np.unique(cols["t_ps"])) == {0.0, 0.003}
    assert np.all(cols["rho_cm3"] > 0.0)

    mass = (tmp_path / "mass.csv").read_text().splitlines()
    assert mass[0] == "t_ps,relative_mass"
    assert len(mass) == res.n_steps + 2            # header + every step

    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["device"] == "bulk_diode"
    assert meta["grid"] == [6, 4, 8, 4, 4]
    assert meta["steps"] == res.n_steps
    assert "wall_residual_max" in meta and "time" not in meta

    echoed = load_config(tmp_path / "config_echo.ini")
    assert echoed == cfg

    vtk = (tmp_path / "moments_000.vtk").read_text().splitlines()
    assert vtk[0].startswith("# vtk DataFile")
    assert "DIMENSIONS 7 5 1" in vtk
    assert sum(1 for ln in vtk if ln.startswith("SCALARS")) == 5


def test_cli_validate_and_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text(TINY)
    assert main(["validate", str(good)]) == 0
    assert "config ok" in capsys.readouterr().out

    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nnx = 1\n")
    assert main(["validate", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err

    assert main(["validate", str(tmp_path / "nope.ini")]) == 2
    capsys.readouterr()

    assert main(["convergence", "neither"]) == 2
    capsys.readouterr()


def test_cli_run_and_tables(tmp_path, capsys):
    cfgp = tmp_path / "run.ini"
    cfgp.write_text(TINY)
    out = tmp_path / "out"
    assert main(["run", str(cfgp), "--out", str(out)]) == 0
    assert "done:" in capsys.readouterr().out
    assert (out / "moments.csv").exists()

    tdir = tmp_path / "tables"
    assert main(["tables", str(cfgp), "--out", str(tdir)]) == 0
    capsys.readouterr()
    wt = (tdir / "w_tables.csv").read_text().splitlines()
    assert wt[0].startswith("k,w_lo,w_hi")
    assert len(wt) == 1 + 8
    assert (tdir / "mu_tables.csv").exists()
    assert (tdir / "phi_tables.csv").exists()
