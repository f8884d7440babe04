"""Ghost-cell boundary operators for the kinetic solver.

The kinetic state carries one ghost column/row on each spatial side.  The
transport kernel reads ghosts only through its upwind face fluxes, so a
boundary condition is applied by filling the ghost coefficients so that
the resulting wall flux has the desired property.  All operators here
fill ghosts for the interior columns only and leave the four corner
ghosts untouched (no flux ever reads them).

Reflecting walls (y sides).  Outgoing directions at a wall are the
azimuth half-range whose y velocity points out of the domain.  The three
wall models fill the incoming half of the ghost row:

* specular: incoming channel (k, m, n) copies the outgoing channel with
  the azimuth mirrored (n -> Nphi+1-n in 1-based counting) and the y-slope
  coefficient negated.  The azimuth tables are built mirror-symmetric, so
  the outgoing and incoming face weights cancel pairwise and the wall flux
  is zero to rounding.
* diffusive: the outgoing flux moments are collected and re-emitted with
  the Maxwellian energy shape; the normalization constant is chosen so
  the discrete wall flux of every test function vanishes identically.
* mixed: convex blend, specular with probability p (a constant or an
  energy/angle dependent roughness model), the rest re-emitted
  diffusively.  p = 0 reproduces the diffusive fill bitwise; p = 1 has no
  diffusive channel left to normalize and must be requested as a plain
  specular wall instead.

x sides: periodic wrap, or charge-neutral contacts which scale the
nearest interior column so its density cell mean equals the doping cell
mean (ghost inflow then carries the contact-equilibrium population).

boundary_flux_residual recomputes the discrete wall flux of the mass and
x-slope test functions exactly as the transport kernel assembles it and
returns the worst column residual relative to the outgoing magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .material_band import (CellIntegralTables, ConstantSpecularity,
                            SofferSpecularity, SpecularityFunction)
from .dg_transport import DGState

__all__ = [
    "PurelySpecular",
    "WallTables",
    "build_wall_tables",
    "apply_specular",
    "apply_diffusive",
    "apply_mixed",
    "apply_periodic_x",
    "apply_neutral_contacts",
    "boundary_flux_residual",
    "ConstantSpecularity",
    "SofferSpecularity",
    "SpecularityFunction",
]


class PurelySpecular(ValueError):
    """Mixed wall with p identically 1: use the specular operator."""


@dataclass(frozen=True)
class WallTables:
    """Angular weights and re-emission constants shared by the y walls.

    W is the signed momentum-cell face weight Iw*Imu*Iphi_cos (the c_x
    factor cancels in every ratio formed here); mw the Maxwellian mean
    coefficients.  inv_C_* are the diffusive normalization sums per wall,
    inv_Cp_* the mixed-wall variants (None without a specularity model).
    """

    W: np.ndarray
    absW: np.ndarray
    mw: np.ndarray
    half: int
    inv_C_ymin: float
    inv_C_ymax: float
    p_bar: Optional[np.ndarray] = None
    q_bar: Optional[np.ndarray] = None
    inv_Cp_ymin: Optional[float] = None
    inv_Cp_ymax: Optional[float] = None


def _in_slice(wt: WallTables, wall: str) -> slice:
    # incoming = directions whose y velocity points into the domain
    if wall == "ymax":
        return slice(wt.half, None)     # cos(phi) < 0
    if wall == "ymin":
        return slice(0, wt.half)        # cos(phi) > 0
    raise ValueError(f"unknown wall {wall!r}")


def _rows(state: DGState, wall: str):
    # (interior row, ghost row) indices along the y axis
    if wall == "ymax":
        return state.T.shape[1] - 2, state.T.shape[1] - 1
    return 1, 0


def build_wall_tables(tables: CellIntegralTables) -> WallTables:
    g = tables.grid
    W = (tables.Iw[:, None, None] * tables.Imu[None, :, None]
         * tables.Iphi_cos[None, None, :])
    absW = np.abs(W)
    half = g.Nphi // 2
    mwk = tables.mw
    # normalization over the incoming half, natural index order per wall
    inv_C_ymin = float(np.sum(absW[:, :, :half] * mwk[:, None, None]))
    inv_C_ymax = float(np.sum(absW[:, :, half:] * mwk[:, None, None]))
    inv_Cp_ymin = inv_Cp_ymax = None
    if tables.q_bar is not None:
        inv_Cp_ymin = float(np.sum(absW[:, :, :half] * tables.q_bar[:, :, :half]))
        inv_Cp_ymax = float(np.sum(absW[:, :, half:] * tables.q_bar[:, :, half:]))
    return WallTables(W=W, absW=absW, mw=mwk, half=half,
                      inv_C_ymin=inv_C_ymin, inv_C_ymax=inv_C_ymax,
                      p_bar=tables.p_bar, q_bar=tables.q_bar,
                      inv_Cp_ymin=inv_Cp_ymin, inv_Cp_ymax=inv_Cp_ymax)


def _mirrored_interior(state: DGState, ji: int):
    """Interior wall row with the azimuth axis mirrored, y slope negated."""
    MT = state.T[1:-1, ji, :, :, ::-1]
    MX = state.X[1:-1, ji, :, :, ::-1]
    MY = -state.Y[1:-1, ji, :, :, ::-1]
    return MT, MX, MY


def apply_specular(state: DGState, wt: WallTables, wall: str) -> None:
    ji, gi = _rows(state, wall)
    sl = _in_slice(wt, wall)
    MT, MX, MY = _mirrored_interior(state, ji)
    for arr in (state.T, state.X, state.Y):
        arr[1:-1, gi] = 0.0
    state.T[1:-1, gi, :, :, sl] = MT[:, :, :, sl]
    state.X[1:-1, gi, :, :, sl] = MX[:, :, :, sl]
    state.Y[1:-1, gi, :, :, sl] = MY[:, :, :, sl]


def _outgoing_moments(state: DGState, wt: WallTables, wall: str, ji: int):
    """Sums of |W| times T, X, Y over the outgoing half, per column."""
    sl = _in_slice(wt, "ymin" if wall == "ymax" else "ymax")  # outgoing half
    aw = wt.absW[:, :, sl]
    s0 = np.einsum("xkmn,kmn->x", state.T[1:-1, ji, :, :, sl], aw,
                   optimize=False)
    sx = np.einsum("xkmn,kmn->x", state.X[1:-1, ji, :, :, sl], aw,
                   optimize=False)
    sy = np.einsum("xkmn,kmn->x", state.Y[1:-1, ji, :, :, sl], aw,
                   optimize=False)
    return s0, sx, sy


def apply_diffusive(state: DGState, wt: WallTables, wall: str) -> None:
    ji, gi = _rows(state, wall)
    sl = _in_slice(wt, wall)
    s0, sx, sy = _outgoing_moments(state, wt, wall, ji)
    C = 1.0 / (wt.inv_C_ymax if wall == "ymax" else wt.inv_C_ymin)
    shape = state.T[1:-1, gi, :, :, sl].shape
    mwk = wt.mw[None, :, None, None]
    for arr in (state.T, state.X, state.Y):
        arr[1:-1, gi] = 0.0
    state.T[1:-1, gi, :, :, sl] = np.broadcast_to(
        (C * s0)[:, None, None, None] * mwk, shape)
    state.X[1:-1, gi, :, :, sl] = np.broadcast_to(
        (C * sx)[:, None, None, None] * mwk, shape)
    state.Y[1:-1, gi, :, :, sl] = np.broadcast_to(
        (-C * sy)[:, None, None, None] * mwk, shape)


def apply_mixed(state: DGState, wt: WallTables, wall: str) -> None:
    if wt.q_bar is None:
        raise ValueError("mixed wall needs tables built with a specularity model")
    inv_Cp = wt.inv_Cp_ymax if wall == "ymax" else wt.inv_Cp_ymin
    if inv_Cp == 0.0:
        raise PurelySpecular(
            "specularity is identically 1 on this wall; request a specular wall")
    ji, gi = _rows(state, wall)
    sl = _in_slice(wt, wall)
    MT, MX, MY = _mirrored_interior(state, ji)
    s0, sx, sy = _outgoing_moments(state, wt, wall, ji)

    # subtract the part the specular branch already returns (MY holds the
    # negated mirror, so the image y slope is -MY)
    awp = wt.absW[:, :, sl] * wt.p_bar[:, :, sl]
    s0 = s0 - np.einsum("xkmn,kmn->x", MT[:, :, :, sl], awp, optimize=False)
    sx = sx - np.einsum("xkmn,kmn->x", MX[:, :, :, sl], awp, optimize=False)
    sy = sy + np.einsum("xkmn,kmn->x", MY[:, :, :, sl], awp, optimize=False)

    Cp = 1.0 / inv_Cp
    pb = wt.p_bar[None, :, :, sl]
    qb = wt.q_bar[None, :, :, sl]
    for arr in (state.T, state.X, state.Y):
        arr[1:-1, gi] = 0.0
    state.T[1:-1, gi, :, :, sl] = pb * MT[:, :, :, sl] \
        + (Cp * s0)[:, None, None, None] * qb
    state.X[1:-1, gi, :, :, sl] = pb * MX[:, :, :, sl] \
        + (Cp * sx)[:, None, None, None] * qb
    state.Y[1:-1, gi, :, :, sl] = pb * MY[:, :, :, sl] \
        + (-Cp * sy)[:, None, None, None] * qb


def apply_periodic_x(state: DGState) -> None:
    for arr in (state.T, state.X, state.Y):
        arr[0, 1:-1] = arr[-2, 1:-1]
        arr[-1, 1:-1] = arr[1, 1:-1]


def apply_neutral_contacts(state: DGState, grid, doping_mean) -> None:
    """Contact columns: ghost = nearest interior column rescaled so its
    density cell mean matches the doping cell mean (charge neutrality).

    doping_mean: (Nx, Ny) doping cell means (scaled units).
    """
    mv = grid.momentum_cell_volumes()
    for ghost, interior, col in ((0, 1, 0), (-1, -2, grid.Nx - 1)):
        rho = np.einsum("ykmn,kmn->y", state.T[interior, 1:-1], mv,
                        optimize=False)
        if np.any(rho <= 0.0):
            j = int(np.argmax(rho <= 0.0))
            raise FloatingPointError(
                f"non-positive density {rho[j]} at contact column j={j}")
        lam = doping_mean[col, :] / rho
        for arr in (state.T, state.X, state.Y):
            arr[ghost, 1:-1] = arr[interior, 1:-1] * lam[:, None, None, None]


def boundary_flux_residual(state: DGState, wt: WallTables, wall: str) -> float:
    """Worst-column wall flux residual, relative to the outgoing magnitude.

    Evaluates the discrete face flux of the mass and x-slope tests with
    the ghosts currently in place, exactly as the transport kernel does.
    """
    ji, gi = _rows(state, wall)
    half = wt.half
    Wp = wt.W[:, :, :half]      # cos(phi) > 0 channels
    Wn = wt.W[:, :, half:]
    Ti, Xi, Yi = state.T[1:-1, ji], state.X[1:-1, ji], state.Y[1:-1, ji]
    Tg, Xg, Yg = state.T[1:-1, gi], state.X[1:-1, gi], state.Y[1:-1, gi]
    if wall == "ymax":
        out_terms = (Ti + Yi)[:, :, :, :half] * Wp
        in_part = np.einsum("xkmn,kmn->x", (Tg - Yg)[:, :, :, half:], Wn,
                            optimize=False)
        rx = np.einsum("xkmn,kmn->x", Xi[:, :, :, :half], Wp, optimize=False) \
            + np.einsum("xkmn,kmn->x", Xg[:, :, :, half:], Wn, optimize=False)
    else:
        out_terms = (Ti - Yi)[:, :, :, half:] * Wn
        in_part = np.einsum("xkmn,kmn->x", (Tg + Yg)[:, :, :, :half], Wp,
                            optimize=False)
        rx = np.einsum("xkmn,kmn->x", Xi[:, :, :, half:], Wn, optimize=False) \
            + np.einsum("xkmn,kmn->x", Xg[:, :, :, :half], Wp, optimize=False)
    r0 = out_terms.sum(axis=(1, 2, 3)) + in_part
    denom = np.maximum(np.abs(out_terms).sum(axis=(1, 2, 3)), 1e-300)
    return float(np.max((np.abs(r0) + np.abs(rx)) / denom))
