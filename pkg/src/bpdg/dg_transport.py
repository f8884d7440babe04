"""DG discretization of the transformed kinetic equation.

Basis: piecewise linear in (x, y), piecewise constant in (w, mu, phi):
on each cell Phi_h = T + X xi + Y eta with xi = (x - x_i)/(dx_i/2),
eta = (y - y_j)/(dy_j/2).  The basis is orthogonal per cell, so the mass
matrix is diagonal (cell volume times 1, 1/3, 1/3) and no linear solve is
needed in the update.

Face fluxes are upwind.  Spatial faces have field-independent speeds whose
momentum-cell integrals factor into the shared tables; the sign structure
is carried by the sign-split tables (mu for x-faces, cos phi for y-faces),
which also makes the flux expression on a face canonical: both adjacent
cells evaluate the same product chain, so the telescoping interior sum
cancels bitwise and total mass is conserved to rounding.

Momentum-space faces (the field drift terms) carry coefficients linear in
(Ex, Ey).  They are integrated exactly over each momentum face patch with
the tables and evaluated at the four 2x2 Gauss points of the spatial cell,
where the local field value fixes the upwind side.  Every integrand is at
most quadratic per direction, so the quadrature is exact.  The faces at
w=0, mu=+-1, phi=0 and phi=pi carry exactly zero coefficient and are
skipped; the w = w_max face sees a zero exterior state (cut-off), which is
the only mass sink of the interior scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .material_band import CellIntegralTables, DimensionlessConstants
from .phase_grid import PhaseGrid

__all__ = [
    "DGState",
    "RHSBuffer",
    "KernelTables",
    "upwind_flux",
    "project",
    "build_kernel_tables",
    "assemble_rhs",
]

_GAUSS = 0.5773502691896257  # 1/sqrt(3)


@dataclass
class DGState:
    """Coefficient arrays (Nx+2, Ny+2, Nw, Nmu, Nphi), ghosts inline."""

    T: np.ndarray
    X: np.ndarray
    Y: np.ndarray

    @classmethod
    def zeros(cls, grid: PhaseGrid) -> "DGState":
        shape = grid.state_shape
        return cls(T=np.zeros(shape), X=np.zeros(shape), Y=np.zeros(shape))

    def copy(self) -> "DGState":
        return DGState(T=self.T.copy(), X=self.X.copy(), Y=self.Y.copy())

    def interior(self):
        return self.T[1:-1, 1:-1], self.X[1:-1, 1:-1], self.Y[1:-1, 1:-1]


@dataclass
class RHSBuffer:
    """d/dt of the interior coefficients, shape (Nx, Ny, Nw, Nmu, Nphi)."""

    dT: np.ndarray
    dX: np.ndarray
    dY: np.ndarray


def upwind_flux(g_value, phi_minus, phi_plus):
    """((g+|g|)/2) Phi^- + ((g-|g|)/2) Phi^+ (vectorized)."""
    g = np.asarray(g_value, dtype=np.float64)
    return 0.5 * (g + np.abs(g)) * phi_minus + 0.5 * (g - np.abs(g)) * phi_plus


def project(f, grid: PhaseGrid) -> DGState:
    """L2 projection of f(x, y, w, mu, phi) onto the DG space.

    f must accept broadcastable arrays.  Quadrature: 2-point Gauss in each
    spatial direction, the shared sqrt(w) 8-point rule per energy cell, and
    4-point Gauss in mu and phi; exact for the test cases and accurate for
    smooth data.  Intended for initial data and tests, not hot paths.
    """
    from .material_band import _GL_NODES, _GL_WEIGHTS  # shared w rule

    state = DGState.zeros(grid)
    xg = np.array([-_GAUSS, _GAUSS])
    mu_n, mu_w = np.polynomial.legendre.leggauss(4)
    # spatial points per cell, broadcast over all (i, j) at once
    xc, yc = grid.x_centers, grid.y_centers
    xpts = xc[:, None] + 0.5 * grid.dx[:, None] * xg[None, :]      # (Nx, 2)
    ypts = yc[:, None] + 0.5 * grid.dy[:, None] * xg[None, :]      # (Ny, 2)

    for k in range(grid.Nw):
        u_lo, u_hi = np.sqrt(grid.w_edges[k]), np.sqrt(grid.w_edges[k + 1])
        um, uh = 0.5 * (u_hi + u_lo), 0.5 * (u_hi - u_lo)
        uq = um + uh * _GL_NODES
        wq, wwt = uq * uq, uh * _GL_WEIGHTS * 2.0 * uq
        for m in range(grid.Nmu):
            mm = 0.5 * (grid.mu_edges[m + 1] + grid.mu_edges[m])
            mh = 0.5 * grid.dmu[m]
            muq, muwt = mm + mh * mu_n, mh * mu_w
            for n in range(grid.Nphi):
                pm = 0.5 * (grid.phi_edges[n + 1] + grid.phi_edges[n])
                ph = 0.5 * grid.dphi[n]
                phq, phwt = pm + ph * mu_n, ph * mu_w
                # momentum average of f at each spatial point
                vals = f(xpts[:, None, :, None, None, None, None],
                         ypts[None, :, None, :, None, None, None],
                         wq[None, None, None, None, :, None, None],
                         muq[None, None, None, None, None, :, None],
                         phq[None, None, None, None, None, None, :])
                vals = np.broadcast_to(
                    vals, (grid.Nx, grid.Ny, 2, 2, len(wq), 4, 4))
                mom_wt = (wwt[:, None, None] * muwt[None, :, None]
                          * phwt[None, None, :])
                avg = np.einsum("ijabkmn,kmn->ijab", vals, mom_wt,
                                optimize=False)
                mom_vol = grid.dw[k] * grid.dmu[m] * grid.dphi[n]
                avg /= mom_vol
                # spatial moments: mean, 3 <f xi>, 3 <f eta>
                state.T[1:-1, 1:-1, k, m, n] = 0.25 * avg.sum(axis=(2, 3))
                state.X[1:-1, 1:-1, k, m, n] = 0.75 * np.einsum(
                    "ijab,a->ij", avg, xg, optimize=False)
                state.Y[1:-1, 1:-1, k, m, n] = 0.75 * np.einsum(
                    "ijab,b->ij", avg, xg, optimize=False)
    return state


@dataclass(frozen=True)
class KernelTables:
    """Precombined coefficient tables consumed by the RHS kernel.

    Ax*/By* are the sign-split spatial face factors, vol* the volume-term
    factors, wf*/mf*/pf the momentum-face factors (indexed by the face),
    inv_mv the inverse momentum cell volumes, dx/dy the widths extended to
    the ghost slots.
    """

    Axp: np.ndarray
    Axn: np.ndarray
    Byp: np.ndarray
    Byn: np.ndarray
    volx: np.ndarray
    voly: np.ndarray
    wf1: np.ndarray
    wf2: np.ndarray
    mf1: np.ndarray
    mf2: np.ndarray
    pf: np.ndarray
    inv_mv: np.ndarray
    dx: np.ndarray
    dy: np.ndarray


def build_kernel_tables(tables: CellIntegralTables,
                        consts: DimensionlessConstants) -> KernelTables:
    g = tables.grid
    cx, ck = consts.c_x, consts.c_k
    Iw, Imu, Imu_mu = tables.Iw, tables.Imu, tables.Imu_mu
    dphi = g.dphi

    Axp = cx * Iw[:, None, None] * tables.Imu_mu_pos[None, :, None] * dphi[None, None, :]
    Axn = cx * Iw[:, None, None] * tables.Imu_mu_neg[None, :, None] * dphi[None, None, :]
    Byp = cx * Iw[:, None, None] * Imu[None, :, None] * tables.Iphi_cos_pos[None, None, :]
    Byn = cx * Iw[:, None, None] * Imu[None, :, None] * tables.Iphi_cos_neg[None, None, :]
    volx = 2.0 * cx * Iw[:, None, None] * Imu_mu[None, :, None] * dphi[None, None, :]
    voly = 2.0 * cx * Iw[:, None, None] * Imu[None, :, None] * tables.Iphi_cos[None, None, :]

    af = tables.a_face
    wf1 = 2.0 * ck * af[:, None, None] * Imu_mu[None, :, None] * dphi[None, None, :]
    wf2 = 2.0 * ck * af[:, None, None] * Imu[None, :, None] * tables.Iphi_cos[None, None, :]

    mu_f = g.mu_edges
    smu2 = 1.0 - mu_f ** 2
    smu2[0] = 0.0
    smu2[-1] = 0.0  # exact zero-flux faces
    mf1 = ck * tables.Iw_inv[:, None, None] * smu2[None, :, None] * dphi[None, None, :]
    mf2 = (ck * tables.Iw_inv[:, None, None]
           * (mu_f * np.sqrt(smu2))[None, :, None] * tables.Iphi_cos[None, None, :])

    pf = (ck * tables.Iw_inv[:, None, None] * tables.Imu_inv[None, :, None]
          * tables.sin_phi_face[None, None, :])

    inv_mv = 1.0 / g.momentum_cell_volumes()
    dx = np.concatenate(([g.dx[0]], g.dx, [g.dx[-1]]))
    dy = np.concatenate(([g.dy[0]], g.dy, [g.dy[-1]]))
    return KernelTables(
        Axp=np.ascontiguousarray(Axp), Axn=np.ascontiguousarray(Axn),
        Byp=np.ascontiguousarray(Byp), Byn=np.ascontiguousarray(Byn),
        volx=np.ascontiguousarray(volx), voly=np.ascontiguousarray(voly),
        wf1=np.ascontiguousarray(wf1), wf2=np.ascontiguousarray(wf2),
        mf1=np.ascontiguousarray(mf1), mf2=np.ascontiguousarray(mf2),
        pf=np.ascontiguousarray(pf), inv_mv=np.ascontiguousarray(inv_mv),
        dx=dx, dy=dy)


@njit(parallel=True, cache=True)
def _rhs_kernel(T, X, Y,
                ExT, ExX, ExY, EyT, EyX, EyY,
                dx, dy,
                Axp, Axn, Byp, Byn, volx, voly,
                wf1, wf2, mf1, mf2, pf, inv_mv,
                dT, dX, dY):  # pragma: no cover (exercised via wrapper)
    Nxg, Nyg, Nw, Nmu, Nphi = T.shape
    Nx, Ny = Nxg - 2, Nyg - 2
    g = _GAUSS
    for ij in prange(Nx * Ny):
        i = 1 + ij // Ny
        j = 1 + ij % Ny
        ii = i - 1
        jj = j - 1
        dyj = dy[j]
        dxi = dx[i]
        inv_dxdy = 1.0 / (dxi * dyj)

        # field values at the 2x2 Gauss points of the spatial cell
        exT = ExT[ii, jj]; exX = ExX[ii, jj]; exY = ExY[ii, jj]
        eyT = EyT[ii, jj]; eyX = EyX[ii, jj]; eyY = EyY[ii, jj]
        gx0 = -g; gx1 = g; gx2 = -g; gx3 = g
        gy0 = -g; gy1 = -g; gy2 = g; gy3 = g
        ex0 = exT + exX * gx0 + exY * gy0
        ex1 = exT + exX * gx1 + exY * gy1
        ex2 = exT + exX * gx2 + exY * gy2
        ex3 = exT + exX * gx3 + exY * gy3
        ey0 = eyT + eyX * gx0 + eyY * gy0
        ey1 = eyT + eyX * gx1 + eyY * gy1
        ey2 = eyT + eyX * gx2 + eyY * gy2
        ey3 = eyT + eyX * gx3 + eyY * gy3

        # ---- spatial faces and volume terms (initial assignment) ----
        for k in range(Nw):
            for m in range(Nmu):
                for n in range(Nphi):
                    t0 = T[i, j, k, m, n]
                    axp = Axp[k, m, n]; axn = Axn[k, m, n]
                    fL1 = axp * (T[i - 1, j, k, m, n] + X[i - 1, j, k, m, n]) \
                        + axn * (t0 - X[i, j, k, m, n])
                    fR1 = axp * (t0 + X[i, j, k, m, n]) \
                        + axn * (T[i + 1, j, k, m, n] - X[i + 1, j, k, m, n])
                    fLh = axp * Y[i - 1, j, k, m, n] + axn * Y[i, j, k, m, n]
                    fRh = axp * Y[i, j, k, m, n] + axn * Y[i + 1, j, k, m, n]
                    rT = -dyj * (fR1 - fL1)
                    rX = -dyj * (fR1 + fL1) + volx[k, m, n] * t0 * dyj
                    rY = -(dyj / 3.0) * (fRh - fLh)

                    byp = Byp[k, m, n]; byn = Byn[k, m, n]
                    fD1 = byp * (T[i, j - 1, k, m, n] + Y[i, j - 1, k, m, n]) \
                        + byn * (t0 - Y[i, j, k, m, n])
                    fU1 = byp * (t0 + Y[i, j, k, m, n]) \
                        + byn * (T[i, j + 1, k, m, n] - Y[i, j + 1, k, m, n])
                    fDx = byp * X[i, j - 1, k, m, n] + byn * X[i, j, k, m, n]
                    fUx = byp * X[i, j, k, m, n] + byn * X[i, j + 1, k, m, n]
                    rT += -dxi * (fU1 - fD1)
                    rY += -dxi * (fU1 + fD1) + voly[k, m, n] * t0 * dxi
                    rX += -(dxi / 3.0) * (fUx - fDx)

                    q = inv_mv[k, m, n] * inv_dxdy
                    dT[ii, jj, k, m, n] = rT * q
                    dX[ii, jj, k, m, n] = 3.0 * rX * q
                    dY[ii, jj, k, m, n] = 3.0 * rY * q

        # ---- energy faces (kf = 1..Nw; Nw is the cut-off face) ----
        for kf in range(1, Nw + 1):
            for m in range(Nmu):
                for n in range(Nphi):
                    w1 = wf1[kf, m, n]; w2 = wf2[kf, m, n]
                    kl = kf - 1
                    Tl = T[i, j, kl, m, n]; Xl = X[i, j, kl, m, n]; Yl = Y[i, j, kl, m, n]
                    if kf < Nw:
                        Tu = T[i, j, kf, m, n]; Xu = X[i, j, kf, m, n]; Yu = Y[i, j, kf, m, n]
                    else:
                        Tu = 0.0; Xu = 0.0; Yu = 0.0
                    a1 = 0.0; ax = 0.0; ay = 0.0
                    # point 0
                    S = -(ex0 * w1 + ey0 * w2)
                    lo = Tl + Xl * gx0 + Yl * gy0
                    up = Tu + Xu * gx0 + Yu * gy0
                    fl = max(S, 0.0) * lo + min(S, 0.0) * up
                    a1 += fl; ax += gx0 * fl; ay += gy0 * fl
                    # point 1
                    S = -(ex1 * w1 + ey1 * w2)
                    lo = Tl + Xl * gx1 + Yl * gy1
                    up = Tu + Xu * gx1 + Yu * gy1
                    fl = max(S, 0.0) * lo + min(S, 0.0) * up
                    a1 += fl; ax += gx1 * fl; ay += gy1 * fl
                    # point 2
                    S = -(ex2 * w1 + ey2 * w2)
                    lo = Tl + Xl * gx2 + Yl * gy2
                    up = Tu + Xu * gx2 + Yu * gy2
                    fl = max(S, 0.0) * lo + min(S, 0.0) * up
                    a1 += fl; ax += gx2 * fl; ay += gy2 * fl
                    # point 3
                    S = -(ex3 * w1 + ey3 * w2)
                    lo = Tl + Xl * gx3 + Yl * gy3
                    up = Tu + Xu * gx3 + Yu * gy3
                    fl = max(S, 0.0) * lo + min(S, 0.0) * up
                    a1 += fl; ax += gx3 * fl; ay += gy3 * fl

                    ql = inv_mv[kl, m, n]
                    dT[ii, jj, kl, m, n] -= 0.25 * a1 * ql
                    dX[ii, jj, kl, m, n] -= 0.75 * ax * ql
                    dY[ii, jj, kl, m, n] -= 0.75 * ay * ql
                    if kf < Nw:
                        qu = inv_mv[kf, m, n]
                        dT[ii, jj, kf, m, n] += 0.25 * a1 * qu
                        dX[ii, jj, kf, m, n] += 0.75 * ax * qu
                        dY[ii, jj, kf, m, n] += 0.75 * ay * qu

        # ---- direction-cosine faces (mf = 1..Nmu-1; ends carry zero) ----
        for k in range(Nw):
            for mf in range(1, Nmu):
                for n in range(Nphi):
                    m1 = mf1[k, mf, n]; m2 = mf2[k, mf, n]
                    ml = mf - 1
                    Tl = T[i, j, k, ml, n]; Xl = X[i, j, k, ml, n]; Yl = Y[i, j, k, ml, n]
                    Tu = T[i, j, k, mf, n]; Xu = X[i, j, k, mf, n]; Yu = Y[i, j, k, mf, n]
                    a1 = 0.0; ax = 0.0; ay = 0.0
                    S = -m1 * ex0 + m2 * ey0
                    fl = max(S, 0.0) * (Tl + Xl * gx0 + Yl * gy0) \
                        + min(S, 0.0) * (Tu + Xu * gx0 + Yu * gy0)
                    a1 += fl; ax += gx0 * fl; ay += gy0 * fl
                    S = -m1 * ex1 + m2 * ey1
                    fl = max(S, 0.0) * (Tl + Xl * gx1 + Yl * gy1) \
                        + min(S, 0.0) * (Tu + Xu * gx1 + Yu * gy1)
                    a1 += fl; ax += gx1 * fl; ay += gy1 * fl
                    S = -m1 * ex2 + m2 * ey2
                    fl = max(S, 0.0) * (Tl + Xl * gx2 + Yl * gy2) \
                        + min(S, 0.0) * (Tu + Xu * gx2 + Yu * gy2)
                    a1 += fl; ax += gx2 * fl; ay += gy2 * fl
                    S = -m1 * ex3 + m2 * ey3
                    fl = max(S, 0.0) * (Tl + Xl * gx3 + Yl * gy3) \
                        + min(S, 0.0) * (Tu + Xu * gx3 + Yu * gy3)
                    a1 += fl; ax += gx3 * fl; ay += gy3 * fl

                    ql = inv_mv[k, ml, n]
                    dT[ii, jj, k, ml, n] -= 0.25 * a1 * ql
                    dX[ii, jj, k, ml, n] -= 0.75 * ax * ql
                    dY[ii, jj, k, ml, n] -= 0.75 * ay * ql
                    qu = inv_mv[k, mf, n]
                    dT[ii, jj, k, mf, n] += 0.25 * a1 * qu
                    dX[ii, jj, k, mf, n] += 0.75 * ax * qu
                    dY[ii, jj, k, mf, n] += 0.75 * ay * qu

        # ---- azimuth faces (nf = 1..Nphi-1; ends carry zero) ----
        for k in range(Nw):
            for m in range(Nmu):
                for nf in range(1, Nphi):
                    pfv = pf[k, m, nf]
                    nl = nf - 1
                    Tl = T[i, j, k, m, nl]; Xl = X[i, j, k, m, nl]; Yl = Y[i, j, k, m, nl]
                    Tu = T[i, j, k, m, nf]; Xu = X[i, j, k, m, nf]; Yu = Y[i, j, k, m, nf]
                    a1 = 0.0; ax = 0.0; ay = 0.0
                    S = pfv * ey0
                    fl = max(S, 0.0) * (Tl + Xl * gx0 + Yl * gy0) \
                        + min(S, 0.0) * (Tu + Xu * gx0 + Yu * gy0)
                    a1 += fl; ax += gx0 * fl; ay += gy0 * fl
                    S = pfv * ey1
                    fl = max(S, 0.0) * (Tl + Xl * gx1 + Yl * gy1) \
                        + min(S, 0.0) * (Tu + Xu * gx1 + Yu * gy1)
                    a1 += fl; ax += gx1 * fl; ay += gy1 * fl
                    S = pfv * ey2
                    fl = max(S, 0.0) * (Tl + Xl * gx2 + Yl * gy2) \
                        + min(S, 0.0) * (Tu + Xu * gx2 + Yu * gy2)
                    a1 += fl; ax += gx2 * fl; ay += gy2 * fl
                    S = pfv * ey3
                    fl = max(S, 0.0) * (Tl + Xl * gx3 + Yl * gy3) \
                        + min(S, 0.0) * (Tu + Xu * gx3 + Yu * gy3)
                    a1 += fl; ax += gx3 * fl; ay += gy3 * fl

                    ql = inv_mv[k, m, nl]
                    dT[ii, jj, k, m, nl] -= 0.25 * a1 * ql
                    dX[ii, jj, k, m, nl] -= 0.75 * ax * ql
                    dY[ii, jj, k, m, nl] -= 0.75 * ay * ql
                    qu = inv_mv[k, m, nf]
                    dT[ii, jj, k, m, nf] += 0.25 * a1 * qu
                    dX[ii, jj, k, m, nf] += 0.75 * ax * qu
                    dY[ii, jj, k, m, nf] += 0.75 * ay * qu


def assemble_rhs(state: DGState,
                 ex_coeffs, ey_coeffs,
                 ktab: KernelTables) -> RHSBuffer:
    """Transport right side for freshly populated ghosts and current field.

    ex_coeffs/ey_coeffs are (T, X, Y) coefficient arrays of the field on
    the interior (Nx, Ny) cells.  Collision terms are added by the caller.
    Raises on non-finite input state (with the first offending cell).
    """
    Nx, Ny = state.T.shape[0] - 2, state.T.shape[1] - 2
    shape = (Nx, Ny) + state.T.shape[2:]
    dT = np.empty(shape)
    dX = np.empty(shape)
    dY = np.empty(shape)
    _rhs_kernel(state.T, state.X, state.Y,
                np.ascontiguousarray(ex_coeffs[0]), np.ascontiguousarray(ex_coeffs[1]),
                np.ascontiguousarray(ex_coeffs[2]), np.ascontiguousarray(ey_coeffs[0]),
                np.ascontiguousarray(ey_coeffs[1]), np.ascontiguousarray(ey_coeffs[2]),
                ktab.dx, ktab.dy,
                ktab.Axp, ktab.Axn, ktab.Byp, ktab.Byn, ktab.volx, ktab.voly,
                ktab.wf1, ktab.wf2, ktab.mf1, ktab.mf2, ktab.pf, ktab.inv_mv,
                dT, dX, dY)
    if not np.isfinite(dT).all():
        bad = np.argwhere(~np.isfinite(dT))[0]
        raise FloatingPointError(f"non-finite transport RHS at cell {tuple(bad)}")
    return RHSBuffer(dT=dT, dX=dX, dY=dY)
