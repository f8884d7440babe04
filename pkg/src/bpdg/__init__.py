"""Deterministic kinetic solver for electron transport in planar silicon
devices, discretized with a discontinuous Galerkin method on a transformed
momentum space, coupled to an LDG potential solve.

Scaled units throughout: lengths in 1e-6 m, times in 1e-12 s, potentials
in volts, energies in thermal units.
"""

__version__ = "0.1.0"

from .phase_grid import GridConfig, PhaseGrid, build_grid
from .material_band import (MaterialParams, DimensionlessConstants,
                            nondimensionalize, build_integral_tables)
from .dg_transport import DGState, build_kernel_tables, assemble_rhs
from .collision import build_collision_tables, apply_collision
from .poisson_ldg import LdgPoissonSolver, PoissonBC, SideBC, FieldState
from .boundary import build_wall_tables, boundary_flux_residual
from .observables import moment_fields, density_triples, relative_mass
from .driver import Simulation, RunResult, maxwellian_state
from .device_config_io import (DeviceConfig, parse_config, load_config,
                               build_simulation, run_from_config, main)

__all__ = [
    "GridConfig", "PhaseGrid", "build_grid",
    "MaterialParams", "DimensionlessConstants", "nondimensionalize",
    "build_integral_tables",
    "DGState", "build_kernel_tables", "assemble_rhs",
    "build_collision_tables", "apply_collision",
    "LdgPoissonSolver", "PoissonBC", "SideBC", "FieldState",
    "build_wall_tables", "boundary_flux_residual",
    "moment_fields", "density_triples", "relative_mass",
    "Simulation", "RunResult", "maxwellian_state",
    "DeviceConfig", "parse_config", "load_config", "build_simulation",
    "run_from_config", "main",
]
