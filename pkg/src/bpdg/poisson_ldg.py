"""LDG solver for the potential equation on the device rectangle.

Mixed first order form: q = dPsi/dx, s = dPsi/dy,
d/dx (eps_r q) + d/dy (eps_r s) = R, with R the scaled net charge.
Every unknown (Psi, q, s) is piecewise linear per cell (coefficients
T, X, Y on the same scaled basis as the kinetic solver), 9 degrees of
freedom per cell.

Numerical fluxes take the potential from the lower-index side and the
gradient from the upper-index side, with a penalty on the potential jump
added to the gradient flux; the pairing is what makes the scheme stable
and optimally convergent for this basis.  On Dirichlet boundary faces the
prescribed value replaces the outside trace (both in the potential flux
and in the jump); on Neumann faces the potential flux is the interior
trace and the gradient flux is zero.

The matrix depends only on mesh, permittivity and boundary layout, so it
is factorized once (sparse LU) and reused every step; the boundary data
contributes a constant right side vector assembled alongside.

The electric field is E = -c_v grad Psi, returned per cell as linear
coefficient triples ready for the transport kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

__all__ = [
    "SideBC",
    "PoissonBC",
    "FieldState",
    "LdgPoissonSolver",
]

_G = 0.5773502691896257  # 1/sqrt(3)

DirichletData = Union[float, Callable[[float, float], float]]


@dataclass(frozen=True)
class SideBC:
    """Boundary condition on one side of the rectangle.

    kind "dirichlet" prescribes the potential (value: number, or a
    callable g(x, y) sampled at the face Gauss points); kind "neumann"
    imposes zero normal flux.  extent, if given, limits the Dirichlet
    patch to faces whose center lies in [lo, hi] along the side (the rest
    of the side is zero-flux), which is how contacts and gates are cut
    out of a wall.
    """

    kind: str
    value: DirichletData = 0.0
    extent: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.extent is not None:
            lo, hi = self.extent
            if not hi > lo:
                raise ValueError("extent must be a nonempty interval")
            if self.kind != "dirichlet":
                raise ValueError("extent only applies to dirichlet sides")


@dataclass(frozen=True)
class PoissonBC:
    left: SideBC
    right: SideBC
    bottom: SideBC
    top: SideBC


@dataclass
class FieldState:
    """Potential and field coefficients on the interior cells (Nx, Ny)."""

    PsiT: np.ndarray
    PsiX: np.ndarray
    PsiY: np.ndarray
    ExT: np.ndarray
    ExX: np.ndarray
    ExY: np.ndarray
    EyT: np.ndarray
    EyX: np.ndarray
    EyY: np.ndarray

    @classmethod
    def zeros(cls, Nx: int, Ny: int) -> "FieldState":
        a = [np.zeros((Nx, Ny)) for _ in range(9)]
        return cls(*a)

    @property
    def ex_coeffs(self):
        return (self.ExT, self.ExX, self.ExY)

    @property
    def ey_coeffs(self):
        return (self.EyT, self.EyX, self.EyY)


def _project_face_data(value: DirichletData, p0, p1, tangent_half):
    """Project Dirichlet data onto {1, tau} on one face.

    p0/p1 are the face Gauss points (x, y); tangent_half is unused for
    constant data.  Returns (G0, G1) with g(tau) ~ G0 + G1 tau.
    """
    if callable(value):
        ga = float(value(*p0))
        gb = float(value(*p1))
    else:
        ga = gb = float(value)
    G0 = 0.5 * (ga + gb)
    G1 = 0.5 * np.sqrt(3.0) * (gb - ga)
    return G0, G1


# local dof layout per cell
_PT, _PX, _PY, _QT, _QX, _QY, _ST, _SX, _SY = range(9)


class LdgPoissonSolver:
    """Factorized LDG solve on a tensor mesh with per-cell permittivity.

    Parameters
    ----------
    x_edges, y_edges : 1d arrays
        Cell edges (scaled units).  The y mesh may extend past the kinetic
        region (oxide rows), in which case the caller passes zero charge
        there.
    eps_r : float or (Nx, Ny) array
        Relative permittivity per cell.
    bc : PoissonBC
    c_p : float
        Charge coupling constant: R = c_p (rho - doping).
    c_v : float
        Field scaling: E = -c_v grad Psi.
    """

    def __init__(self, x_edges, y_edges, eps_r, bc: PoissonBC,
                 c_p: float, c_v: float = 1.0):
        self.x_edges = np.asarray(x_edges, dtype=np.float64)
        self.y_edges = np.asarray(y_edges, dtype=np.float64)
        self.Nx = len(self.x_edges) - 1
        self.Ny = len(self.y_edges) - 1
        self.dx = np.diff(self.x_edges)
        self.dy = np.diff(self.y_edges)
        self.xc = 0.5 * (self.x_edges[:-1] + self.x_edges[1:])
        self.yc = 0.5 * (self.y_edges[:-1] + self.y_edges[1:])
        self.eps = np.broadcast_to(np.asarray(eps_r, dtype=np.float64),
                                   (self.Nx, self.Ny)).copy()
        self.bc = bc
        self.c_p = float(c_p)
        self.c_v = float(c_v)
        self._assemble()

    def _dof(self, i, j, c):
        return 9 * (i * self.Ny + j) + c

    def _side_face(self, side: SideBC, along_center, p0, p1):
        """Classify one boundary face: ('d', G0, G1) or ('n',)."""
        if side.kind == "neumann":
            return ("n",)
        if side.extent is not None:
            lo, hi = side.extent
            if not (lo <= along_center <= hi):
                return ("n",)
        G0, G1 = _project_face_data(side.value, p0, p1, None)
        return ("d", G0, G1)

    def _assemble(self):
        Nx, Ny = self.Nx, self.Ny
        rows, cols, vals = [], [], []
        b_bc = np.zeros(9 * Nx * Ny)
        any_dirichlet = False

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        # ---- per cell: mass blocks, volume couplings ----
        for i in range(Nx):
            for j in range(Ny):
                dx, dy = self.dx[i], self.dy[j]
                dxdy = dx * dy
                e = self.eps[i, j]
                # row layout: the gradient equations live on the q/s dofs,
                # the divergence equation on the Psi dofs
                def d(c, i=i, j=j):
                    return self._dof(i, j, c)
                add(d(_QT), d(_QT), dxdy)
                add(d(_QX), d(_QX), dxdy / 3.0)
                add(d(_QY), d(_QY), dxdy / 3.0)
                add(d(_ST), d(_ST), dxdy)
                add(d(_SX), d(_SX), dxdy / 3.0)
                add(d(_SY), d(_SY), dxdy / 3.0)
                add(d(_QX), d(_PT), 2.0 * dy)          # gradient eq, xi test
                add(d(_SY), d(_PT), 2.0 * dx)          # gradient eq, eta test
                add(d(_PX), d(_QT), -2.0 * e * dy)     # divergence eq, xi test
                add(d(_PY), d(_ST), -2.0 * e * dx)     # divergence eq, eta test

        # ---- x faces ----
        for j in range(Ny):
            dy = self.dy[j]
            ya = self.yc[j] - 0.5 * dy * _G
            yb = self.yc[j] + 0.5 * dy * _G
            for f in range(Nx + 1):
                L = f - 1
                R = f
                xf = self.x_edges[f]
                has_L = L >= 0
                has_R = R <= Nx - 1

                # potential flux coefficients: P0 + P1*eta as dof terms
                # terms: list of (dof, coeff); const: scalar
                if has_L:
                    P0 = [(self._dof(L, j, _PT), 1.0), (self._dof(L, j, _PX), 1.0)]
                    P1 = [(self._dof(L, j, _PY), 1.0)]
                    P0c = P1c = 0.0
                    face_kind = None
                else:
                    face_kind = self._side_face(self.bc.left, self.yc[j],
                                                (xf, ya), (xf, yb))
                    if face_kind[0] == "d":
                        any_dirichlet = True
                        P0, P1 = [], []
                        P0c, P1c = face_kind[1], face_kind[2]
                    else:
                        P0 = [(self._dof(R, j, _PT), 1.0), (self._dof(R, j, _PX), -1.0)]
                        P1 = [(self._dof(R, j, _PY), 1.0)]
                        P0c = P1c = 0.0
                if has_L and not has_R:
                    face_kind = self._side_face(self.bc.right, self.yc[j],
                                                (xf, ya), (xf, yb))
                    if face_kind[0] == "d":
                        any_dirichlet = True
                        P0, P1 = [], []
                        P0c, P1c = face_kind[1], face_kind[2]
                    # neumann keeps the interior (left) trace set above

                # gradient flux coefficients: F0 + F1*eta
                F0, F1 = [], []
                F0c = F1c = 0.0
                if has_L and has_R:
                    eR = self.eps[R, j]
                    F0 = [(self._dof(R, j, _QT), eR), (self._dof(R, j, _QX), -eR),
                          (self._dof(L, j, _PT), -1.0), (self._dof(L, j, _PX), -1.0),
                          (self._dof(R, j, _PT), 1.0), (self._dof(R, j, _PX), -1.0)]
                    F1 = [(self._dof(R, j, _QY), eR),
                          (self._dof(L, j, _PY), -1.0), (self._dof(R, j, _PY), 1.0)]
                elif not has_L:
                    if face_kind[0] == "d":
                        eR = self.eps[R, j]
                        F0 = [(self._dof(R, j, _QT), eR), (self._dof(R, j, _QX), -eR),
                              (self._dof(R, j, _PT), 1.0), (self._dof(R, j, _PX), -1.0)]
                        F0c = -face_kind[1]
                        F1 = [(self._dof(R, j, _QY), eR), (self._dof(R, j, _PY), 1.0)]
                        F1c = -face_kind[2]
                    # neumann: F stays empty (zero flux)
                else:
                    if face_kind[0] == "d":
                        eL = self.eps[L, j]
                        F0 = [(self._dof(L, j, _QT), eL), (self._dof(L, j, _QX), eL),
                              (self._dof(L, j, _PT), -1.0), (self._dof(L, j, _PX), -1.0)]
                        F0c = face_kind[1]
                        F1 = [(self._dof(L, j, _QY), eL), (self._dof(L, j, _PY), -1.0)]
                        F1c = face_kind[2]

                # scatter: eq1 rows (q dofs), eq3 rows (Psi dofs)
                def scat(row, terms, const, coeff):
                    for dof_, v in terms:
                        add(row, dof_, coeff * v)
                    if const != 0.0:
                        b_bc[row] -= coeff * const

                if has_L:
                    scat(self._dof(L, j, _QT), P0, P0c, -dy)
                    scat(self._dof(L, j, _QX), P0, P0c, -dy)
                    scat(self._dof(L, j, _QY), P1, P1c, -dy / 3.0)
                    scat(self._dof(L, j, _PT), F0, F0c, dy)
                    scat(self._dof(L, j, _PX), F0, F0c, dy)
                    scat(self._dof(L, j, _PY), F1, F1c, dy / 3.0)
                if has_R:
                    scat(self._dof(R, j, _QT), P0, P0c, dy)
                    scat(self._dof(R, j, _QX), P0, P0c, -dy)
                    scat(self._dof(R, j, _QY), P1, P1c, dy / 3.0)
                    scat(self._dof(R, j, _PT), F0, F0c, -dy)
                    scat(self._dof(R, j, _PX), F0, F0c, dy)
                    scat(self._dof(R, j, _PY), F1, F1c, -dy / 3.0)

        # ---- y faces ----
        for i in range(Nx):
            dx = self.dx[i]
            xa = self.xc[i] - 0.5 * dx * _G
            xb = self.xc[i] + 0.5 * dx * _G
            for f in range(Ny + 1):
                D = f - 1
                U = f
                yf = self.y_edges[f]
                has_D = D >= 0
                has_U = U <= Ny - 1

                if has_D:
                    P0 = [(self._dof(i, D, _PT), 1.0), (self._dof(i, D, _PY), 1.0)]
                    P1 = [(self._dof(i, D, _PX), 1.0)]
                    P0c = P1c = 0.0
                    face_kind = None
                else:
                    face_kind = self._side_face(self.bc.bottom, self.xc[i],
                                                (xa, yf), (xb, yf))
                    if face_kind[0] == "d":
                        any_dirichlet = True
                        P0, P1 = [], []
                        P0c, P1c = face_kind[1], face_kind[2]
                    else:
                        P0 = [(self._dof(i, U, _PT), 1.0), (self._dof(i, U, _PY), -1.0)]
                        P1 = [(self._dof(i, U, _PX), 1.0)]
                        P0c = P1c = 0.0
                if has_D and not has_U:
                    face_kind = self._side_face(self.bc.top, self.xc[i],
                                                (xa, yf), (xb, yf))
                    if face_kind[0] == "d":
                        any_dirichlet = True
                        P0, P1 = [], []
                        P0c, P1c = face_kind[1], face_kind[2]

                F0, F1 = [], []
                F0c = F1c = 0.0
                if has_D and has_U:
                    eU = self.eps[i, U]
                    F0 = [(self._dof(i, U, _ST), eU), (self._dof(i, U, _SY), -eU),
                          (self._dof(i, D, _PT), -1.0), (self._dof(i, D, _PY), -1.0),
                          (self._dof(i, U, _PT), 1.0), (self._dof(i, U, _PY), -1.0)]
                    F1 = [(self._dof(i, U, _SX), eU),
                          (self._dof(i, D, _PX), -1.0), (self._dof(i, U, _PX), 1.0)]
                elif not has_D:
                    if face_kind[0] == "d":
                        eU = self.eps[i, U]
                        F0 = [(self._dof(i, U, _ST), eU), (self._dof(i, U, _SY), -eU),
                              (self._dof(i, U, _PT), 1.0), (self._dof(i, U, _PY), -1.0)]
                        F0c = -face_kind[1]
                        F1 = [(self._dof(i, U, _SX), eU), (self._dof(i, U, _PX), 1.0)]
                        F1c = -face_kind[2]
                else:
                    if face_kind[0] == "d":
                        eD = self.eps[i, D]
                        F0 = [(self._dof(i, D, _ST), eD), (self._dof(i, D, _SY), eD),
                              (self._dof(i, D, _PT), -1.0), (self._dof(i, D, _PY), -1.0)]
                        F0c = face_kind[1]
                        F1 = [(self._dof(i, D, _SX), eD), (self._dof(i, D, _PX), -1.0)]
                        F1c = face_kind[2]

                def scat(row, terms, const, coeff):
                    for dof_, v in terms:
                        add(row, dof_, coeff * v)
                    if const != 0.0:
                        b_bc[row] -= coeff * const

                if has_D:
                    scat(self._dof(i, D, _ST), P0, P0c, -dx)
                    scat(self._dof(i, D, _SY), P0, P0c, -dx)
                    scat(self._dof(i, D, _SX), P1, P1c, -dx / 3.0)
                    scat(self._dof(i, D, _PT), F0, F0c, dx)
                    scat(self._dof(i, D, _PY), F0, F0c, dx)
                    scat(self._dof(i, D, _PX), F1, F1c, dx / 3.0)
                if has_U:
                    scat(self._dof(i, U, _ST), P0, P0c, dx)
                    scat(self._dof(i, U, _SY), P0, P0c, -dx)
                    scat(self._dof(i, U, _SX), P1, P1c, dx / 3.0)
                    scat(self._dof(i, U, _PT), F0, F0c, -dx)
                    scat(self._dof(i, U, _PY), F0, F0c, dx)
                    scat(self._dof(i, U, _PX), F1, F1c, -dx / 3.0)

        if not any_dirichlet:
            raise ValueError(
                "all sides are zero-flux: the potential is only defined up "
                "to a constant; pin it with at least one dirichlet face")

        n = 9 * Nx * Ny
        A = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()
        self._lu = splu(A)
        self._b_bc = b_bc

    def solve(self, rho, doping) -> FieldState:
        """Solve for the potential given charge and doping triples.

        rho and doping are (T, X, Y) coefficient tuples on the solver mesh
        (oxide rows, if any, are included and normally zero).
        """
        Nx, Ny = self.Nx, self.Ny
        b = self._b_bc.copy()
        area = self.dx[:, None] * self.dy[None, :]
        RT = self.c_p * (rho[0] - doping[0]) * area
        RX = self.c_p * (rho[1] - doping[1]) * area / 3.0
        RY = self.c_p * (rho[2] - doping[2]) * area / 3.0
        idx = 9 * (np.arange(Nx)[:, None] * Ny + np.arange(Ny)[None, :])
        b[idx + _PT] += RT
        b[idx + _PX] += RX
        b[idx + _PY] += RY

        u = self._lu.solve(b)
        if not np.isfinite(u).all():
            raise FloatingPointError("potential solve produced non-finite values")
        u = u.reshape(Nx, Ny, 9)
        f = FieldState(
            PsiT=u[:, :, _PT].copy(), PsiX=u[:, :, _PX].copy(),
            PsiY=u[:, :, _PY].copy(),
            ExT=-self.c_v * u[:, :, _QT], ExX=-self.c_v * u[:, :, _QX],
            ExY=-self.c_v * u[:, :, _QY],
            EyT=-self.c_v * u[:, :, _ST], EyX=-self.c_v * u[:, :, _SX],
            EyY=-self.c_v * u[:, :, _SY])
        return f
