"""Macroscopic moments of the kinetic state.

All quantities stay in scaled units here (density per scaled volume,
velocities in device lengths per picosecond scale, energy in thermal
units); the io layer owns the conversion to laboratory units.

The transformed unknown already absorbs the momentum-space Jacobian, so
the density is a plain sum of cell averages times momentum cell volumes.
Flux moments reuse the same cell integrals as the transport tables, which
keeps the observables consistent with what the scheme actually moves.
Ratio quantities (mean energy, drift velocities) are formed from cell
means only; the slope coefficients of a ratio of two linear fields are
not well defined and are not needed by any consumer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dg_transport import DGState
from .material_band import CellIntegralTables, DimensionlessConstants

__all__ = [
    "MomentFields",
    "density_triples",
    "moment_fields",
    "total_mass",
    "relative_mass",
]


@dataclass
class MomentFields:
    """Cell-mean observables on the interior (Nx, Ny) cells."""

    rho: np.ndarray       # number density, scaled
    Ux: np.ndarray        # x flux density, scaled
    Uy: np.ndarray        # y flux density, scaled
    energy: np.ndarray    # mean energy per particle, thermal units
    Vx: np.ndarray        # drift velocity, scaled
    Vy: np.ndarray


def density_triples(state: DGState, grid):
    """Linear density coefficients (T, X, Y) per interior cell."""
    mv = grid.momentum_cell_volumes()
    T, X, Y = state.interior()
    rhoT = np.einsum("xykmn,kmn->xy", T, mv, optimize=False)
    rhoX = np.einsum("xykmn,kmn->xy", X, mv, optimize=False)
    rhoY = np.einsum("xykmn,kmn->xy", Y, mv, optimize=False)
    return rhoT, rhoX, rhoY


def moment_fields(state: DGState, tables: CellIntegralTables,
                  consts: DimensionlessConstants) -> MomentFields:
    g = tables.grid
    mv = g.momentum_cell_volumes()
    T = state.interior()[0]

    rho = np.einsum("xykmn,kmn->xy", T, mv, optimize=False)

    wflux_x = (consts.c_x * tables.Iw[:, None, None]
               * tables.Imu_mu[None, :, None] * g.dphi[None, None, :])
    wflux_y = (consts.c_x * tables.Iw[:, None, None]
               * tables.Imu[None, :, None] * tables.Iphi_cos[None, None, :])
    Ux = np.einsum("xykmn,kmn->xy", T, wflux_x, optimize=False)
    Uy = np.einsum("xykmn,kmn->xy", T, wflux_y, optimize=False)

    w_weight = mv * tables.w_bar[:, None, None]
    energy_density = np.einsum("xykmn,kmn->xy", T, w_weight, optimize=False)

    safe = np.where(rho > 0.0, rho, 1.0)
    energy = np.where(rho > 0.0, energy_density / safe, 0.0)
    Vx = np.where(rho > 0.0, Ux / safe, 0.0)
    Vy = np.where(rho > 0.0, Uy / safe, 0.0)
    return MomentFields(rho=rho, Ux=Ux, Uy=Uy, energy=energy, Vx=Vx, Vy=Vy)


def total_mass(state: DGState, grid) -> float:
    """Integral of the unknown over the interior phase-space domain."""
    mv = grid.momentum_cell_volumes()
    cellvol = grid.dx[:, None] * grid.dy[None, :]
    T = state.interior()[0]
    per_cell = np.einsum("xykmn,kmn->xy", T, mv, optimize=False)
    return float(np.sum(per_cell * cellvol))


def relative_mass(state: DGState, grid, mass0: float) -> float:
    return total_mass(state, grid) / mass0
