"""Run configuration, output writers, and the command line front end.

Configs are INI files (configparser syntax, no interpolation).  The full
grammar is documented in the README; unknown sections or keys are
rejected with their dotted path so typos fail loudly instead of silently
running defaults.  All lengths are micrometers, times picoseconds,
potentials volts, densities 1/m^3; these coincide with the solver's
scaled units except density, which is rescaled on the way in.

Outputs are plain CSV with a fixed column set, one row per cell per
snapshot, printed with repr-faithful %.17g so a rerun of the echoed
config reproduces the files byte for byte.  A legacy-format VTK
rectilinear file per snapshot is optional.  meta.json carries versions
and grid shape, deliberately no timestamps.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .boundary import build_wall_tables
from .collision import build_collision_tables
from .dg_transport import DGState, build_kernel_tables
from .driver import RunResult, Simulation
from .material_band import (ConstantSpecularity, DimensionlessConstants,
                            MaterialParams, SofferSpecularity,
                            build_integral_tables, doping_dimensionless,
                            nondimensionalize)
from .observables import MomentFields, moment_fields
from .phase_grid import GridConfig, GridError, build_grid
from .poisson_ldg import FieldState, LdgPoissonSolver, PoissonBC, SideBC

__all__ = [
    "ConfigError",
    "DeviceConfig",
    "parse_config",
    "load_config",
    "build_simulation",
    "run_from_config",
    "write_moments_csv",
    "write_mass_csv",
    "read_moments_csv",
    "write_vtk",
    "CSV_COLUMNS",
    "main",
]

CSV_COLUMNS = ("t_ps", "x_um", "y_um", "rho_cm3", "energy_eV", "Ux", "Uy",
               "Vx_cms", "Vy_cms", "Ex_kVcm", "Ey_kVcm", "V_volts")

_THREAD_ENV = "BPDG_NUM_THREADS"


class ConfigError(ValueError):
    """Configuration parse/validation failure; message carries the key path."""


# ---- config schema ----

def _f(s):
    try:
        v = float(s)
    except ValueError as e:
        raise ValueError("not a number") from e
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _i(s):
    try:
        return int(s)
    except ValueError as e:
        raise ValueError("not an integer") from e


def _b(s):
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def _s(s):
    return s.strip()


# section -> key -> (converter, default); None default means required-by-kind
_SCHEMA = {
    "device": {
        "kind": (_s, "bulk_diode"),
        "lx_um": (_f, 0.15),
        "ly_um": (_f, 0.012),
        "t_ox_um": (_f, 0.002),
        "gate_x0_um": (_f, None),
        "gate_x1_um": (_f, None),
    },
    "grid": {
        "nx": (_i, 24),
        "ny": (_i, 12),
        "nw": (_i, 20),
        "nmu": (_i, 8),
        "nphi": (_i, 8),
        "w_max": (_s, "auto"),
    },
    "bc": {
        "ymin": (_s, "specular"),
        "ymax": (_s, "specular"),
        "x": (_s, "neutral"),
    },
    "bias": {
        "source_v": (_f, 0.5235),
        "drain_v": (_f, 1.5235),
        "gate_v": (_f, 1.06),
    },
    "doping": {
        "background_m3": (_f, 1.0e24),
        "regions": (_s, ""),
    },
    "time": {
        "t_end_ps": (_f, 1.0),
        "cfl": (_f, 0.2),
        "dt_ps": (_s, ""),
    },
    "collisions": {
        "mode": (_s, "full"),
    },
    "output": {
        "snapshots": (_s, "end"),
        "csv": (_s, "moments.csv"),
        "mass_csv": (_s, "mass.csv"),
        "vtk": (_b, False),
    },
    "material": {
        "alpha_evinv": (_f, 0.5),
        "t_l_k": (_f, 300.0),
        "m_star_rel": (_f, 0.32),
        "phonon_ev": (_f, 0.063),
        "eps_r_si": (_f, 11.7),
        "eps_r_ox": (_f, 3.9),
    },
}


@dataclass(frozen=True)
class DeviceConfig:
    kind: str
    Lx_um: float
    Ly_um: float
    t_ox_um: float
    gate_x_um: Optional[Tuple[float, float]]
    Nx: int
    Ny: int
    Nw: int
    Nmu: int
    Nphi: int
    w_max: Optional[float]              # None = auto
    bc_ymin: Tuple[str, Optional[float]]
    bc_ymax: Tuple[str, Optional[float]]
    bc_x: str
    source_V: float
    drain_V: float
    gate_V: float
    doping_background_m3: float
    doping_regions: Tuple[Tuple[float, float, float, float, float], ...]
    t_end_ps: float
    cfl: float
    dt_ps: Optional[float]
    collision_mode: str
    snapshot_times: Optional[Tuple[float, ...]]   # None = final time only
    csv_name: str
    mass_csv_name: str
    vtk: bool
    material: Dict[str, float] = dc_field(default_factory=dict)


def _parse_bc_string(raw: str, path: str):
    """-> (kind, parameter): specular/diffusive/mixed:<p>/soffer:<eta>."""
    s = raw.strip().lower()
    if s in ("specular", "diffusive"):
        return (s, None)
    if s.startswith("mixed:"):
        try:
            p = float(s.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"{path}: mixed wall needs a number after ':'")
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"{path}: specular fraction {p} outside [0, 1]")
        if p == 1.0:
            return ("specular", None)   # no diffusive channel left
        return ("mixed", p)
    if s.startswith("soffer:"):
        try:
            eta = float(s.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"{path}: roughness wall needs a number after ':'")
        if not eta > 0.0:
            raise ConfigError(f"{path}: roughness parameter must be positive")
        return ("soffer", eta)
    raise ConfigError(
        f"{path}: unknown wall condition {raw!r} "
        "(expect specular | diffusive | mixed:<p> | soffer:<eta>)")


def _parse_regions(raw: str):
    """Semicolon list of x0,x1,y0,y1,value_m3 (micrometers, 1/m^3)."""
    out = []
    for part in filter(None, (p.strip() for p in raw.split(";"))):
        bits = part.split(",")
        if len(bits) != 5:
            raise ConfigError(
                f"doping.regions: {part!r} needs x0,x1,y0,y1,value_m3")
        try:
            x0, x1, y0, y1, v = (float(b) for b in bits)
        except ValueError:
            raise ConfigError(f"doping.regions: {part!r} has a non-number")
        if not (x1 > x0 and y1 > y0):
            raise ConfigError(f"doping.regions: {part!r} is an empty rectangle")
        if v < 0.0:
            raise ConfigError(f"doping.regions: negative doping in {part!r}")
        out.append((x0, x1, y0, y1, v))
    return tuple(out)


def parse_config(text: str) -> DeviceConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax: {e}") from e

    vals: Dict[str, Dict[str, object]] = {}
    for sect in cp.sections():
        key = sect.strip().lower()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown section [{sect}]")
        vals.setdefault(key, {})
        for k, raw in cp.items(sect):
            if k not in _SCHEMA[key]:
                raise ConfigError(f"unknown key {key}.{k}")
            conv = _SCHEMA[key][k][0]
            try:
                vals[key][k] = conv(raw)
            except ValueError as e:
                raise ConfigError(f"{key}.{k}: {e}") from e

    def get(sect, k):
        if sect in vals and k in vals[sect]:
            return vals[sect][k]
        return _SCHEMA[sect][k][1]

    kind = get("device", "kind")
    if kind not in ("bulk_diode", "dgmosfet"):
        raise ConfigError(f"device.kind: unknown device {kind!r}")
    Lx, Ly = get("device", "lx_um"), get("device", "ly_um")
    if not (Lx > 0 and Ly > 0):
        raise ConfigError("device.lx_um/ly_um must be positive")

    gate = None
    t_ox = get("device", "t_ox_um")
    if kind == "dgmosfet":
        g0, g1 = get("device", "gate_x0_um"), get("device", "gate_x1_um")
        if g0 is None or g1 is None:
            raise ConfigError("device.gate_x0_um/gate_x1_um required for dgmosfet")
        if not (0.0 <= g0 < g1 <= Lx):
            raise ConfigError("device.gate_x0_um/gate_x1_um outside the x range")
        if not t_ox > 0:
            raise ConfigError("device.t_ox_um must be positive")
        gate = (g0, g1)

    for k in ("nx", "ny", "nw", "nmu", "nphi"):
        if get("grid", k) < 2:
            raise ConfigError(f"grid.{k} must be at least 2")
    if get("grid", "nphi") % 2 != 0:
        raise ConfigError("grid.nphi must be even (azimuth reflection pairs)")
    if get("grid", "nmu") % 2 != 0:
        raise ConfigError("grid.nmu must be even (mirrored mu layout)")
    wmax_raw = get("grid", "w_max")
    if wmax_raw.strip().lower() == "auto":
        w_max = None
    else:
        try:
            w_max = float(wmax_raw)
        except ValueError:
            raise ConfigError("grid.w_max: number or 'auto'")
        if not w_max > 0:
            raise ConfigError("grid.w_max must be positive")

    bc_ymin = _parse_bc_string(get("bc", "ymin"), "bc.ymin")
    bc_ymax = _parse_bc_string(get("bc", "ymax"), "bc.ymax")
    bc_x = get("bc", "x").strip().lower()
    if bc_x not in ("neutral", "periodic"):
        raise ConfigError(f"bc.x: unknown condition {bc_x!r} "
                          "(expect neutral | periodic)")
    if kind == "dgmosfet" and bc_ymin != ("specular", None):
        raise ConfigError(
            "bc.ymin: the dgmosfet midplane is a symmetry plane; "
            "only specular is consistent")

    regions = _parse_regions(get("doping", "regions"))
    bg = get("doping", "background_m3")
    if bg < 0:
        raise ConfigError("doping.background_m3 must be nonnegative")
    if kind == "dgmosfet" and not regions:
        raise ConfigError("doping.regions: dgmosfet needs explicit "
                          "source/drain wells")
    for x0, x1, y0, y1, _v in regions:
        if x1 <= 0 or x0 >= Lx or y1 <= 0 or y0 >= Ly:
            raise ConfigError("doping.regions: rectangle outside the device")

    t_end = get("time", "t_end_ps")
    if not t_end > 0:
        raise ConfigError("time.t_end_ps must be positive")
    cfl = get("time", "cfl")
    if not 0 < cfl <= 0.4:
        raise ConfigError("time.cfl must lie in (0, 0.4]")
    dt_raw = get("time", "dt_ps").strip()
    dt_ps = None
    if dt_raw:
        try:
            dt_ps = float(dt_raw)
        except ValueError:
            raise ConfigError("time.dt_ps: number or empty")
        if not dt_ps > 0:
            raise ConfigError("time.dt_ps must be positive")

    mode = get("collisions", "mode").strip().lower()
    if mode not in ("full", "elastic", "off"):
        raise ConfigError(f"collisions.mode: unknown mode {mode!r}")

    snaps_raw = get("output", "snapshots").strip().lower()
    if snaps_raw == "end":
        snaps = None
    else:
        try:
            snaps = tuple(sorted(float(p) for p in snaps_raw.split(",")))
        except ValueError:
            raise ConfigError("output.snapshots: comma list of times or 'end'")
        if any(s < 0 for s in snaps) or len(set(snaps)) != len(snaps):
            raise ConfigError("output.snapshots: times must be distinct and "
                              "nonnegative")
        if any(s > t_end for s in snaps):
            raise ConfigError("output.snapshots: time past time.t_end_ps")

    material = {k: get("material", k) for k in _SCHEMA["material"]}
    for k, v in material.items():
        if not v > 0:
            raise ConfigError(f"material.{k} must be positive")

    return DeviceConfig(
        kind=kind, Lx_um=Lx, Ly_um=Ly, t_ox_um=t_ox, gate_x_um=gate,
        Nx=get("grid", "nx"), Ny=get("grid", "ny"), Nw=get("grid", "nw"),
        Nmu=get("grid", "nmu"), Nphi=get("grid", "nphi"), w_max=w_max,
        bc_ymin=bc_ymin, bc_ymax=bc_ymax, bc_x=bc_x,
        source_V=get("bias", "source_v"), drain_V=get("bias", "drain_v"),
        gate_V=get("bias", "gate_v"),
        doping_background_m3=bg, doping_regions=regions,
        t_end_ps=t_end, cfl=cfl, dt_ps=dt_ps, collision_mode=mode,
        snapshot_times=snaps, csv_name=get("output", "csv"),
        mass_csv_name=get("output", "mass_csv"), vtk=get("output", "vtk"),
        material=material)


def load_config(path) -> DeviceConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text)


def config_echo(cfg: DeviceConfig) -> str:
    """Canonical INI serialization; parsing it again gives an equal config."""
    lines = []

    def sect(name, pairs):
        lines.append(f"[{name}]")
        for k, v in pairs:
            lines.append(f"{k} = {v}")
        lines.append("")

    dev = [("kind", cfg.kind), ("lx_um", repr(cfg.Lx_um)),
           ("ly_um", repr(cfg.Ly_um)), ("t_ox_um", repr(cfg.t_ox_um))]
    if cfg.gate_x_um is not None:
        dev += [("gate_x0_um", repr(cfg.gate_x_um[0])),
                ("gate_x1_um", repr(cfg.gate_x_um[1]))]
    sect("device", dev)
    sect("grid", [("nx", cfg.Nx), ("ny", cfg.Ny), ("nw", cfg.Nw),
                  ("nmu", cfg.Nmu), ("nphi", cfg.Nphi),
                  ("w_max", "auto" if cfg.w_max is None else repr(cfg.w_max))])

    def bc_str(kind_p):
        kind, p = kind_p
        if p is None:
            return kind
        return f"{kind}:{p!r}"

    sect("bc", [("ymin", bc_str(cfg.bc_ymin)), ("ymax", bc_str(cfg.bc_ymax)),
                ("x", cfg.bc_x)])
    sect("bias", [("source_v", repr(cfg.source_V)),
                  ("drain_v", repr(cfg.drain_V)),
                  ("gate_v", repr(cfg.gate_V))])
    regions = "; ".join(",".join(repr(v) for v in r)
                        for r in cfg.doping_regions)
    sect("doping", [("background_m3", repr(cfg.doping_background_m3)),
                    ("regions", regions)])
    sect("time", [("t_end_ps", repr(cfg.t_end_ps)), ("cfl", repr(cfg.cfl)),
                  ("dt_ps", "" if cfg.dt_ps is None else repr(cfg.dt_ps))])
    sect("collisions", [("mode", cfg.collision_mode)])
    snaps = ("end" if cfg.snapshot_times is None
             else ",".join(repr(t) for t in cfg.snapshot_times))
    sect("output", [("snapshots", snaps), ("csv", cfg.csv_name),
                    ("mass_csv", cfg.mass_csv_name),
                    ("vtk", "true" if cfg.vtk else "false")])
    sect("material", sorted((k, repr(v)) for k, v in cfg.material.items()))
    return "\n".join(lines)


# ---- building the solver from a config ----

def _project_doping(grid, background, regions):
    """Piecewise-constant regions onto per-cell linear coefficients.

    Regions replace the background inside their rectangle (exact overlap
    integrals); overlapping regions stack relative to the background.
    """
    Nx, Ny = grid.Nx, grid.Ny
    T = np.full((Nx, Ny), background)
    X = np.zeros((Nx, Ny))
    Y = np.zeros((Nx, Ny))
    xe, ye = grid.x_edges, grid.y_edges
    for x0, x1, y0, y1, val in regions:
        delta = val - background
        for i in range(Nx):
            lo, hi = max(x0, xe[i]), min(x1, xe[i + 1])
            if hi <= lo:
                continue
            xc, hx = 0.5 * (xe[i] + xe[i + 1]), 0.5 * grid.dx[i]
            a, b = (lo - xc) / hx, (hi - xc) / hx
            for j in range(Ny):
                lo2, hi2 = max(y0, ye[j]), min(y1, ye[j + 1])
                if hi2 <= lo2:
                    continue
                yc, hy = 0.5 * (ye[j] + ye[j + 1]), 0.5 * grid.dy[j]
                c, d = (lo2 - yc) / hy, (hi2 - yc) / hy
                T[i, j] += delta * (b - a) * (d - c) / 4.0
                X[i, j] += 3.0 * delta * (b * b - a * a) * (d - c) / 8.0
                Y[i, j] += 3.0 * delta * (b - a) * (d * d - c * c) / 8.0
    return T, X, Y


@dataclass
class BuiltRun:
    cfg: DeviceConfig
    sim: Simulation
    consts: DimensionlessConstants
    params: MaterialParams


def build_simulation(cfg: DeviceConfig) -> BuiltRun:
    m = cfg.material
    params = MaterialParams(
        m_star=m["m_star_rel"] * 9.1093837015e-31,
        alpha=m["alpha_evinv"], hbar_omega_p=m["phonon_ev"],
        T_L=m["t_l_k"], eps_r_silicon=m["eps_r_si"],
        eps_r_oxide=m["eps_r_ox"])
    consts = nondimensionalize(params)

    w_max = cfg.w_max if cfg.w_max is not None else cfg.Nw * consts.gamma
    gcfg = GridConfig(
        Nx=cfg.Nx, Ny=cfg.Ny, Nw=cfg.Nw, Nmu=cfg.Nmu, Nphi=cfg.Nphi,
        Lx=cfg.Lx_um, Ly=cfg.Ly_um, w_max=w_max, gamma=consts.gamma,
        require_gamma_alignment=(cfg.collision_mode != "off"))
    try:
        grid = build_grid(gcfg)
    except GridError as e:
        # every input came from the config, so surface it as a config error
        raise ConfigError(str(e)) from e

    specs = []
    for kind, p in (cfg.bc_ymin, cfg.bc_ymax):
        if kind == "mixed":
            specs.append(ConstantSpecularity(p))
        elif kind == "soffer":
            specs.append(SofferSpecularity(p))
    p_spec = None
    if specs:
        first = specs[0]
        for other in specs[1:]:
            if other != first:
                raise ConfigError(
                    "bc: both walls must share one specularity model")
        p_spec = first

    tables = build_integral_tables(grid, consts, p_spec)
    ktab = build_kernel_tables(tables, consts)
    wall_tables = build_wall_tables(tables)
    coll = None
    if cfg.collision_mode != "off":
        try:
            coll = build_collision_tables(grid, consts, tables,
                                          mode=cfg.collision_mode)
        except GridError as e:
            raise ConfigError(str(e)) from e

    bg = doping_dimensionless(cfg.doping_background_m3, consts)
    regions = tuple((x0, x1, y0, y1, doping_dimensionless(v, consts))
                    for (x0, x1, y0, y1, v) in cfg.doping_regions)
    doping = _project_doping(grid, bg, regions)

    oxide_rows = 0
    if cfg.kind == "bulk_diode":
        # contacts pin the potential; with periodic transport the same pins
        # give the sawtooth-bias setup
        bc = PoissonBC(
            left=SideBC("dirichlet", cfg.source_V),
            right=SideBC("dirichlet", cfg.drain_V),
            bottom=SideBC("neumann"), top=SideBC("neumann"))
        poisson = LdgPoissonSolver(grid.x_edges, grid.y_edges,
                                   m["eps_r_si"], bc,
                                   c_p=consts.c_p, c_v=consts.c_v)
    else:
        dy = cfg.Ly_um / cfg.Ny
        n_ox = max(1, int(round(cfg.t_ox_um / dy)))
        y_ext = np.concatenate([
            grid.y_edges,
            grid.y_edges[-1] + dy * np.arange(1, n_ox + 1)])
        eps = np.full((cfg.Nx, cfg.Ny + n_ox), m["eps_r_si"])
        eps[:, cfg.Ny:] = m["eps_r_ox"]
        bc = PoissonBC(
            left=SideBC("dirichlet", cfg.source_V, extent=(0.0, cfg.Ly_um)),
            right=SideBC("dirichlet", cfg.drain_V, extent=(0.0, cfg.Ly_um)),
            bottom=SideBC("neumann"),
            top=SideBC("dirichlet", cfg.gate_V, extent=cfg.gate_x_um))
        poisson = LdgPoissonSolver(grid.x_edges, y_ext, eps, bc,
                                   c_p=consts.c_p, c_v=consts.c_v)
        oxide_rows = n_ox

    def wall_kind(kind):
        # both parameter models run through the blended wall operator
        return "mixed" if kind == "soffer" else kind

    sim = Simulation(
        grid=grid, consts=consts, tables=tables, ktab=ktab,
        wall_tables=wall_tables, doping=doping,
        bc_ymin=wall_kind(cfg.bc_ymin[0]), bc_ymax=wall_kind(cfg.bc_ymax[0]),
        bc_x=cfg.bc_x, collision=coll, poisson=poisson,
        oxide_rows=oxide_rows, cfl=cfg.cfl)
    return BuiltRun(cfg=cfg, sim=sim, consts=consts, params=params)


# ---- writers ----

def _fmt(v: float) -> str:
    return "%.17g" % v


def write_moments_csv(path, snapshots, grid,
                      consts: DimensionlessConstants) -> None:
    """snapshots: list of (t_ps, MomentFields, FieldState), times increasing."""
    if not snapshots:
        raise ValueError("no snapshots to write")
    dens = consts.density_prefactor_m3
    flux_scale = dens * 1.0e6 * 1.0e-4 / 1.0e28   # to 1e28 / (cm^2 s)
    xc, yc = grid.x_centers, grid.y_centers
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for t, mf, fld in snapshots:
            for i in range(grid.Nx):
                for j in range(grid.Ny):
                    row = (t, xc[i], yc[j],
                           mf.rho[i, j] * dens * 1.0e-6,
                           mf.energy[i, j] * consts.kT_eV,
                           mf.Ux[i, j] * flux_scale,
                           mf.Uy[i, j] * flux_scale,
                           mf.Vx[i, j] * 1.0e8,
                           mf.Vy[i, j] * 1.0e8,
                           fld.ExT[i, j] * 10.0,
                           fld.EyT[i, j] * 10.0,
                           fld.PsiT[i, j])
                    fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_mass_csv(path, times, rel_mass) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("t_ps,relative_mass\n")
        for t, m in zip(times, rel_mass):
            fh.write(f"{_fmt(t)},{_fmt(m)}\n")


def read_moments_csv(path):
    """-> dict column name -> 1d float array (also used by tests)."""
    with open(path, "r") as fh:
        header = fh.readline().strip().split(",")
        data = [[] for _ in header]
        for line in fh:
            if not line.strip():
                continue
            for slot, tok in zip(data, line.strip().split(",")):
                slot.append(float(tok))
    return {name: np.array(col) for name, col in zip(header, data)}


def write_vtk(path, t_ps, mf: MomentFields, fld: FieldState, grid,
              consts: DimensionlessConstants) -> None:
    """Legacy ASCII rectilinear file with the cell-mean fields."""
    dens = consts.density_prefactor_m3
    fields = [
        ("rho_cm3", mf.rho * dens * 1.0e-6),
        ("energy_eV", mf.energy * consts.kT_eV),
        ("Vx_cms", mf.Vx * 1.0e8),
        ("Vy_cms", mf.Vy * 1.0e8),
        ("V_volts", fld.PsiT),
    ]
    with open(path, "w", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"moment fields at t = {_fmt(t_ps)} ps\n")
        fh.write("ASCII\nDATASET RECTILINEAR_GRID\n")
        fh.write(f"DIMENSIONS {grid.Nx + 1} {grid.Ny + 1} 1\n")
        fh.write(f"X_COORDINATES {grid.Nx + 1} double\n")
        fh.write(" ".join(_fmt(v) for v in grid.x_edges) + "\n")
        fh.write(f"Y_COORDINATES {grid.Ny + 1} double\n")
        fh.write(" ".join(_fmt(v) for v in grid.y_edges) + "\n")
        fh.write("Z_COORDINATES 1 double\n0\n")
        fh.write(f"CELL_DATA {grid.Nx * grid.Ny}\n")
        for name, arr in fields:
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for j in range(grid.Ny):          # x varies fastest in VTK order
                fh.write(" ".join(_fmt(arr[i, j])
                                  for i in range(grid.Nx)) + "\n")


def run_from_config(cfg: DeviceConfig, out_dir, threads: Optional[int] = None,
                    progress=None) -> RunResult:
    if threads is not None:
        _set_threads(threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    built = build_simulation(cfg)
    sim = built.sim

    snaps: List[tuple] = []

    def on_snap(t, state, fld):
        mf = moment_fields(state, sim.tables, sim.consts)
        snaps.append((t, mf, fld))
        if progress is not None:
            progress(f"snapshot t = {t:g} ps")

    times = (list(cfg.snapshot_times) if cfg.snapshot_times is not None
             else [cfg.t_end_ps])
    result = sim.run(cfg.t_end_ps, dt=cfg.dt_ps, snapshot_times=times,
                     snapshot_cb=on_snap)

    write_moments_csv(out / cfg.csv_name, snaps, sim.grid, sim.consts)
    write_mass_csv(out / cfg.mass_csv_name, result.mass_t, result.mass_rel)
    if cfg.vtk:
        stem = Path(cfg.csv_name).stem
        for idx, (t, mf, fld) in enumerate(snaps):
            write_vtk(out / f"{stem}_{idx:03d}.vtk", t, mf, fld,
                      sim.grid, sim.consts)
    (out / "config_echo.ini").write_text(config_echo(cfg))
    meta = {
        "package": "bpdg",
        "version": __version__,
        "device": cfg.kind,
        "grid": [cfg.Nx, cfg.Ny, cfg.Nw, cfg.Nmu, cfg.Nphi],
        "steps": result.n_steps,
        "final_time_ps": result.t,
        "wall_residual_max": result.wall_residual_max,
    }
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2)
                                   + "\n")
    return result


# ---- convergence studies ----

def poisson_orders(levels=(8, 16, 32)) -> List[Tuple[int, float, float]]:
    """Manufactured smooth potential; returns (N, L2 error, order)."""
    Lx, Ly = 1.2, 0.7
    kx, ky = math.pi / Lx, math.pi / Ly

    def exact(x, y):
        return np.cos(kx * x) * np.cos(ky * y)

    out = []
    prev = None
    for N in levels:
        Nx, Ny = N, max(2, N // 2)
        xe = np.linspace(0.0, Lx, Nx + 1)
        ye = np.linspace(0.0, Ly, Ny + 1)
        bc = PoissonBC(left=SideBC("dirichlet", exact),
                       right=SideBC("dirichlet", exact),
                       bottom=SideBC("neumann"), top=SideBC("neumann"))
        sol = LdgPoissonSolver(xe, ye, 1.0, bc, c_p=1.0)
        xc = 0.5 * (xe[:-1] + xe[1:])
        yc = 0.5 * (ye[:-1] + ye[1:])
        dx, dy = np.diff(xe), np.diff(ye)
        lap = -(kx * kx + ky * ky)
        g = 0.5773502691896257
        RT = np.zeros((Nx, Ny))
        RX = np.zeros((Nx, Ny))
        RY = np.zeros((Nx, Ny))
        for a in (-g, g):
            for b in (-g, g):
                v = lap * exact(xc[:, None] + 0.5 * dx[:, None] * a,
                                yc[None, :] + 0.5 * dy[None, :] * b)
                RT += 0.25 * v
                RX += 0.75 * a * v
                RY += 0.75 * b * v
        z = (np.zeros((Nx, Ny)),) * 3
        f = sol.solve((RT, RX, RY), z)
        err2 = np.sum((f.PsiT - exact(xc[:, None], yc[None, :])) ** 2
                      * dx[:, None] * dy[None, :])
        err = math.sqrt(err2)
        order = math.nan if prev is None else math.log2(prev / err)
        out.append((N, err, order))
        prev = err
    return out


def transport_orders(levels=(16, 32, 64)) -> List[Tuple[int, float, float]]:
    """Field-free periodic advection of a smooth density profile.

    Every momentum cell advects its cell mean at the tabulated mean x
    speed, so the momentum-discretized problem has an exact solution: the
    initial profile translated per channel.  The reported error is the
    phase-space L2 distance of the cell means from that translate.
    """
    out = []
    prev = None
    t_final = 0.08
    for N in levels:
        cfg = GridConfig(Nx=N, Ny=2, Nw=4, Nmu=8, Nphi=8,
                         Lx=0.15, Ly=0.012, w_max=4.0, gamma=None,
                         require_gamma_alignment=False)
        grid = build_grid(cfg)
        params = MaterialParams()
        consts = nondimensionalize(params)
        tables = build_integral_tables(grid, consts)
        ktab = build_kernel_tables(tables, consts)
        wt = build_wall_tables(tables)
        dop = (np.ones((grid.Nx, grid.Ny)), np.zeros((grid.Nx, grid.Ny)),
               np.zeros((grid.Nx, grid.Ny)))
        sim = Simulation(grid=grid, consts=consts, tables=tables, ktab=ktab,
                         wall_tables=wt, doping=dop, bc_ymin="specular",
                         bc_ymax="specular", bc_x="periodic", collision=None,
                         poisson=None, cfl=0.1, track_residuals=False)
        state = DGState.zeros(grid)
        kx = 2.0 * math.pi / grid.Lx
        xe = grid.x_edges
        mean0 = (1.0 + 0.5 * (np.cos(kx * xe[:-1]) - np.cos(kx * xe[1:]))
                 / (kx * grid.dx))
        state.T[1:-1, 1:-1] = mean0[:, None, None, None, None]
        res = sim.run(t_final, state=state)

        mv = grid.momentum_cell_volumes()
        v_eff = (consts.c_x * tables.Iw[:, None, None]
                 * tables.Imu_mu[None, :, None]
                 * grid.dphi[None, None, :]) / mv
        shift = v_eff * t_final
        lo = xe[:-1][:, None, None, None] - shift[None]
        hi = xe[1:][:, None, None, None] - shift[None]
        exact_mean = (1.0 + 0.5 * (np.cos(kx * lo) - np.cos(kx * hi))
                      / (kx * grid.dx[:, None, None, None]))
        diff = res.state.T[1:-1, 1, :, :, :] - exact_mean
        err2 = np.sum(diff * diff * mv[None] * grid.dx[:, None, None, None]
                      * grid.Ly)
        err = math.sqrt(err2)
        order = math.nan if prev is None else math.log2(prev / err)
        out.append((N, err, order))
        prev = err
    return out


# ---- CLI ----

def _set_threads(n: int) -> None:
    try:
        import numba
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    except Exception as e:               # thread count is best-effort
        print(f"warning: could not set threads: {e}", file=sys.stderr)


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    threads = args.threads
    if threads is None and os.environ.get(_THREAD_ENV):
        try:
            threads = int(os.environ[_THREAD_ENV])
        except ValueError:
            print(f"warning: ignoring bad {_THREAD_ENV}", file=sys.stderr)
    result = run_from_config(cfg, args.out, threads=threads,
                             progress=lambda s: print(s))
    print(f"done: {result.n_steps} steps to t = {result.t:g} ps, "
          f"final relative mass {result.mass_rel[-1]:.12f}, "
          f"wall residual {result.wall_residual_max:.3e}")
    return 0


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"config ok: {cfg.kind}, grid {cfg.Nx}x{cfg.Ny}x{cfg.Nw}x"
          f"{cfg.Nmu}x{cfg.Nphi}, t_end {cfg.t_end_ps} ps, "
          f"bc y ({cfg.bc_ymin[0]}, {cfg.bc_ymax[0]}), x {cfg.bc_x}")
    return 0


def _cmd_tables(args) -> int:
    cfg = load_config(args.config)
    built = build_simulation(cfg)
    tb, grid = built.sim.tables, built.sim.grid
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "w_tables.csv", "w", newline="\n") as fh:
        fh.write("k,w_lo,w_hi,Iw,Iw_maxw,Iw_inv,s_bar,a_face_lo\n")
        for k in range(grid.Nw):
            fh.write(",".join(_fmt(v) for v in (
                k, grid.w_edges[k], grid.w_edges[k + 1], tb.Iw[k],
                tb.Iw_maxw[k], tb.Iw_inv[k], tb.s_bar[k], tb.a_face[k]))
                + "\n")
    with open(out / "mu_tables.csv", "w", newline="\n") as fh:
        fh.write("m,mu_lo,mu_hi,Imu,Imu_mu,Imu_mu_pos,Imu_mu_neg,Imu_inv\n")
        for m_ in range(grid.Nmu):
            fh.write(",".join(_fmt(v) for v in (
                m_, grid.mu_edges[m_], grid.mu_edges[m_ + 1], tb.Imu[m_],
                tb.Imu_mu[m_], tb.Imu_mu_pos[m_], tb.Imu_mu_neg[m_],
                tb.Imu_inv[m_])) + "\n")
    with open(out / "phi_tables.csv", "w", newline="\n") as fh:
        fh.write("n,phi_lo,phi_hi,Iphi_cos,sin_phi_face_lo\n")
        for n_ in range(grid.Nphi):
            fh.write(",".join(_fmt(v) for v in (
                n_, grid.phi_edges[n_], grid.phi_edges[n_ + 1],
                tb.Iphi_cos[n_], tb.sin_phi_face[n_])) + "\n")
    print(f"wrote tables to {out}")
    return 0


def _cmd_convergence(args) -> int:
    if args.suite == "poisson":
        rows = poisson_orders()
        need = 1.9
    elif args.suite == "transport":
        rows = transport_orders()
        need = 1.8
    else:
        print(f"unknown suite {args.suite!r} (poisson | transport)",
              file=sys.stderr)
        return 2
    ok = True
    for N, err, order in rows:
        tag = "" if math.isnan(order) else f"  order {order:.3f}"
        print(f"N = {N:4d}  L2 error {err:.6e}{tag}")
        if not math.isnan(order) and order < need:
            ok = False
    if not ok:
        print(f"FAIL: observed order below {need}", file=sys.stderr)
        return 1
    print(f"observed orders meet the {need} threshold")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="bpdg",
        description="deterministic kinetic device solver (transformed "
                    "momentum coordinates, DG in all five dimensions)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run a device simulation")
    p.add_argument("config")
    p.add_argument("--out", default="out")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("validate", help="parse and validate a config")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("tables", help="dump the cell integral tables")
    p.add_argument("config")
    p.add_argument("--out", default="tables_out")
    p.set_defaults(fn=_cmd_tables)

    p = sub.add_parser("convergence", help="run a built-in order study")
    p.add_argument("suite", help="poisson | transport")
    p.set_defaults(fn=_cmd_convergence)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:                # surface runtime failures cleanly
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
